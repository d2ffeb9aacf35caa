//! Independent verification engines.

mod closed_loop;
mod realization;
mod riccati;
mod search;

pub use closed_loop::{
    closed_loop_covariance, closed_loop_system, lyapunov_variance, open_loop_system, simulate,
    simulate_closed_loop, simulate_with_halved_step, AugmentedSystem, EmpiricalState,
    SimulationConfig,
};
pub use realization::{realize, state_space_rational, StateSpaceRealization};
pub use riccati::{care, eigenvalues, lyapunov, max_real_eigenvalue, CARE_RESIDUAL_TOL};
pub use search::{brute_force_controller_search, ControllerFamily, SearchResult};

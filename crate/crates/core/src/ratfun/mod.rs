//! Polynomials and rational functions of the angular frequency Ω.
//!
//! Fourier convention is e^{−iΩt}: a transfer function is causal when all
//! of its poles lie in the lower half-plane.

mod polynomial;
mod rational;
mod spectral;

pub use polynomial::{cluster_roots, root_scale, Polynomial, Root, CLUSTER_TOL, RECONSTRUCTION_TOL};
pub use rational::{
    combine, from_partial_fractions, PartialFractions, PoleTerm, RationalFunction, CANCEL_TOL, CLUSTER_CANCEL_TOL,
    POLE_MERGE_TOL, REAL_AXIS_TOL,
};
pub use spectral::{
    integrate_full_line, integrate_spectrum, integrate_spectrum_quadrature, sample_grid,
    spectral_factorize, Sidedness, SpectralDensity, FACTOR_TOL, SPECTRUM_TOL,
};

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("polynomial of degree 0 has no roots")]
    EmptyRoots,

    #[error("root finding did not converge (relative coefficient residual {residual:.3e})")]
    RootNonConvergence { residual: f64 },

    #[error("rational function has a zero denominator")]
    ZeroDenominator,

    #[error("spectrum is negative at Ω = {omega:.6e} (value {value:.6e})")]
    NegativeSpectrum { omega: f64, value: f64 },

    #[error("spectrum is not real and even at Ω = {omega:.6e}")]
    NotAutoSpectrum { omega: f64 },

    #[error("spectrum has a real-axis {kind} of odd multiplicity at Ω = {location}")]
    MarginalSpectrum { kind: &'static str, location: Complex64 },

    #[error("spectrum cannot be factorized: {0}")]
    NonFactorizable(String),

    #[error("pole on the real axis at Ω = {0}; regularize the damping first")]
    MarginalPole(Complex64),

    #[error("integrand decays only as Ω^{power}; integral diverges")]
    Divergent { power: i64 },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("Heisenberg relation violated: μ = {mu:.12} < 1")]
    HeisenbergViolation { mu: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("Riccati equation has no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("linear system is not asymptotically stable (max Re λ = {max_real:.3e})")]
    Unstable { max_real: f64 },

    #[error("controller synthesis inconsistent: {0}")]
    SynthesisConsistency(String),

    #[error("rational algebra inconsistent: {0}")]
    AlgebraConsistency(String),

    #[error("controller is improper: {0}")]
    ImproperController(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("simulation diverged at t = {time:.3e}; closed-loop poles {poles:?}")]
    SimulationDiverged { time: f64, poles: Vec<Complex64> },

    #[error("no stable candidate in controller search grid")]
    EmptyStableSet,
}

//! Interferometric position readout of a free mass.
//!
//! Input quadratures (a_1, a_2) have covariance R(λ)diag(e^{−2r}, e^{2r})R(λ)ᵀ
//! with vacuum normalized to one. Classical sensing and force noises are
//! white with S_ξx = 2ζ_x²/Ω_q² and S_ξF = 2Ω_q²ζ_F².

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::controlled_n_eff;
use crate::error::{Error, Result};
use crate::optim::{golden_section, nelder_mead};
use crate::plant::{purity_mu, MarkovianNoise, Oscillator, SystemModel, HEISENBERG_SLACK};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Points per axis of the coarse search grid.
pub const GRID_POINTS: usize = 32;
/// Range of log10 Ω_q searched, relative to the budget reference Ω_q0 = 1.
pub const LOG10_OMEGA_Q_RANGE: (f64, f64) = (-3.0, 3.0);
pub const OPT_TOL: f64 = 1e-8;

/// Loss used for the squeezing comparison sweep.
pub const FIG2_RIGHT_LOSS: f64 = 0.01;
pub const FIG2_RIGHT_SQUEEZE_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub omega_q: f64,
    pub phi: f64,
    pub squeeze_db: f64,
    pub squeeze_angle: f64,
    pub loss: f64,
    pub zeta_x: f64,
    pub zeta_f: f64,
}

impl ReadoutConfig {
    /// Lossless vacuum phase-quadrature readout without classical noise.
    pub fn quantum_limited(omega_q: f64) -> Self {
        Self {
            omega_q,
            phi: 0.0,
            squeeze_db: 0.0,
            squeeze_angle: 0.0,
            loss: 0.0,
            zeta_x: 0.0,
            zeta_f: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_q > 0.0) || !self.omega_q.is_finite() {
            return Err(Error::InvalidParameter(format!("Ω_q = {} must be > 0", self.omega_q)));
        }
        if !self.phi.is_finite() || self.phi.cos().abs() < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "homodyne angle φ = {} carries no position information",
                self.phi
            )));
        }
        if !(self.squeeze_db >= 0.0) || !self.squeeze_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeezing {} dB must be ≥ 0",
                self.squeeze_db
            )));
        }
        if !(0.0..1.0).contains(&self.loss) {
            return Err(Error::InvalidParameter(format!("loss ε = {} must lie in [0, 1)", self.loss)));
        }
        if !(self.zeta_x >= 0.0 && self.zeta_f >= 0.0) {
            return Err(Error::InvalidParameter("ζ_x and ζ_F must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Quadrature covariance (S11, S12, S22).
    pub fn quadrature_covariance(&self) -> (f64, f64, f64) {
        let e2r = 10f64.powf(self.squeeze_db / 10.0);
        let (lo, hi) = (1.0 / e2r, e2r);
        let (s, c) = self.squeeze_angle.sin_cos();
        (
            c * c * lo + s * s * hi,
            c * s * (lo - hi),
            s * s * lo + c * c * hi,
        )
    }
}

/// Markovian noise triple of the readout.
pub fn to_markovian(cfg: &ReadoutConfig) -> Result<MarkovianNoise> {
    cfg.validate()?;
    let (s11, s12, s22) = cfg.quadrature_covariance();
    let w2 = cfg.omega_q * cfg.omega_q;
    let t = cfg.phi.tan();
    let cos2 = cfg.phi.cos().powi(2);
    let s_ff = w2 * s11 + 2.0 * w2 * cfg.zeta_f * cfg.zeta_f;
    let s_zf = s11 * t + s12;
    let s_zz = 2.0 * cfg.zeta_x * cfg.zeta_x / w2
        + (s11 * t * t + 2.0 * s12 * t + s22 + cfg.loss / cos2) / w2;
    let noise = MarkovianNoise {
        s_zz,
        s_ff,
        s_zf,
    };
    if s_zz * s_ff - s_zf * s_zf < 1.0 - HEISENBERG_SLACK * (s_zz * s_ff).max(1.0) {
        return Err(Error::InternalConsistency(format!(
            "readout noise violates the Heisenberg relation (S_ZZS_FF − S_ZF² = {:.12})",
            s_zz * s_ff - s_zf * s_zf
        )));
    }
    noise.validate()?;
    Ok(noise)
}

/// η_cl² = 2ζ_Fζ_x.
pub fn classical_factor(cfg: &ReadoutConfig) -> f64 {
    2.0 * cfg.zeta_f * cfg.zeta_x
}

/// min over Ω of (S_ξF + Ω⁴S_ξx)/(2Ω²), found numerically.
pub fn classical_factor_numeric(cfg: &ReadoutConfig) -> f64 {
    let w2 = cfg.omega_q * cfg.omega_q;
    let s_f = 2.0 * w2 * cfg.zeta_f * cfg.zeta_f;
    let s_x = 2.0 * cfg.zeta_x * cfg.zeta_x / w2;
    if s_f == 0.0 || s_x == 0.0 {
        return 0.0;
    }
    let f = |u: f64| {
        let o2 = u.exp();
        (s_f + o2 * o2 * s_x) / (2.0 * o2)
    };
    let centre = (s_f / s_x).sqrt().ln();
    golden_section(f, centre - 10.0, centre + 10.0, 1e-10).value
}

/// Ω_q = α/√ħ for a Michelson interferometer with arm cavities,
/// α = 4√(ħω_0I_c/(τc²)), per unit test mass in SI units.
pub fn omega_q_from_power(omega_0: f64, circulating_power: f64, transmissivity: f64, mass: f64) -> Result<f64> {
    if !(omega_0 > 0.0 && circulating_power >= 0.0 && transmissivity > 0.0 && mass > 0.0) {
        return Err(Error::InvalidParameter(
            "carrier frequency, transmissivity and mass must be positive, power non-negative".into(),
        ));
    }
    Ok(4.0 * (omega_0 * circulating_power / (transmissivity * SPEED_OF_LIGHT * SPEED_OF_LIGHT * mass)).sqrt())
}

/// Classical noise fixed in absolute terms, expressed through ζ's at the
/// reference Ω_q0 = 1. At other Ω_q, ζ_x scales as Ω_q and ζ_F as 1/Ω_q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBudget {
    pub zeta_f: f64,
    pub zeta_x: f64,
}

impl ClassicalBudget {
    pub fn new(zeta_f: f64, zeta_x: f64) -> Result<Self> {
        if !(zeta_f >= 0.0 && zeta_x >= 0.0) || !(zeta_f.is_finite() && zeta_x.is_finite()) {
            return Err(Error::InvalidParameter("ζ_x and ζ_F must be finite and ≥ 0".into()));
        }
        Ok(Self { zeta_f, zeta_x })
    }

    /// Symmetric split ζ_F = ζ_x = √(η_cl²/2).
    pub fn symmetric(eta_cl2: f64) -> Result<Self> {
        if !(eta_cl2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("η_cl² = {eta_cl2} must be ≥ 0")));
        }
        let z = (eta_cl2 / 2.0).sqrt();
        Self::new(z, z)
    }

    pub fn eta_cl2(&self) -> f64 {
        2.0 * self.zeta_f * self.zeta_x
    }

    pub fn at(&self, omega_q: f64) -> (f64, f64) {
        (self.zeta_f / omega_q, self.zeta_x * omega_q)
    }
}

/// Free-mass model of a readout.
pub fn free_mass_model(cfg: &ReadoutConfig) -> Result<SystemModel> {
    SystemModel::new(Oscillator::free_mass(), to_markovian(cfg)?)
}

pub fn occupation(cfg: &ReadoutConfig) -> Result<f64> {
    controlled_n_eff(&free_mass_model(cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedReadout {
    pub config: ReadoutConfig,
    pub n_eff: f64,
    pub mu: f64,
    pub converged: bool,
}

/// Which readout parameters the optimizer may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchSpace {
    Full,
    PhaseQuadrature,
}

/// Minimum N_eff over (Ω_q, φ, λ) for fixed budget, loss and squeezing:
/// coarse grid, then simplex refinement from the best grid point.
pub fn minimize_occupation(
    budget: &ClassicalBudget,
    loss: f64,
    squeeze_db: f64,
    space: SearchSpace,
) -> Result<OptimizedReadout> {
    let build = |v: &[f64]| -> ReadoutConfig {
        let omega_q = 10f64.powf(v[0]);
        let (zeta_f, zeta_x) = budget.at(omega_q);
        ReadoutConfig {
            omega_q,
            phi: if space == SearchSpace::Full { v[1] } else { 0.0 },
            squeeze_db,
            squeeze_angle: if v.len() > 2 { v[2] } else { 0.0 },
            loss,
            zeta_x,
            zeta_f,
        }
    };
    build(&[0.0, 0.0]).validate()?;
    let objective = |v: &[f64]| -> f64 {
        if space == SearchSpace::Full && v[1].abs() >= FRAC_PI_2 {
            return f64::INFINITY;
        }
        occupation(&build(v)).unwrap_or(f64::INFINITY)
    };

    let n = GRID_POINTS;
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / n as f64).collect()
    };
    let log_q = axis(LOG10_OMEGA_Q_RANGE.0, LOG10_OMEGA_Q_RANGE.1);
    let phis = if space == SearchSpace::Full { axis(-FRAC_PI_2, FRAC_PI_2) } else { vec![0.0] };
    let lambdas = if squeeze_db > 0.0 { axis(0.0, PI) } else { vec![0.0] };
    let mut points = Vec::with_capacity(log_q.len() * phis.len() * lambdas.len());
    for &q in &log_q {
        for &p in &phis {
            for &l in &lambdas {
                points.push([q, p, l]);
            }
        }
    }
    let (best, _) = points
        .par_iter()
        .map(|p| (*p, objective(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0[0].total_cmp(&b.0[0])))
        .ok_or_else(|| Error::InvalidParameter("empty search grid".into()))?;

    let cell = [
        (LOG10_OMEGA_Q_RANGE.1 - LOG10_OMEGA_Q_RANGE.0) / n as f64,
        PI / n as f64,
        PI / n as f64,
    ];
    let free: Vec<usize> = [0usize, 1, 2]
        .into_iter()
        .filter(|&i| match i {
            1 => space == SearchSpace::Full,
            2 => squeeze_db > 0.0,
            _ => true,
        })
        .collect();
    let embed = |u: &[f64]| -> [f64; 3] {
        let mut v = best;
        for (k, &i) in free.iter().enumerate() {
            v[i] = u[k];
        }
        v
    };
    let start: Vec<f64> = free.iter().map(|&i| best[i]).collect();
    let step: Vec<f64> = free.iter().map(|&i| 0.5 * cell[i]).collect();
    let m = nelder_mead(|u| objective(&embed(u)), &start, &step, 1e-12, 4000);
    let refined = embed(&m.x);
    let config = build(&refined);
    let noise = to_markovian(&config)?;
    Ok(OptimizedReadout {
        config,
        n_eff: m.value,
        mu: purity_mu(&noise)?,
        converged: m.converged,
    })
}

/// Minimum N_eff versus η_cl² for vacuum input and for 10 dB squeezing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Right {
    pub eta_cl2: Vec<f64>,
    pub vacuum: Vec<OptimizedReadout>,
    pub squeezed: Vec<OptimizedReadout>,
}

pub fn fig2_right_sweep(eta_cl2_grid: &[f64], loss: f64) -> Result<Fig2Right> {
    let curve = |db: f64| -> Result<Vec<OptimizedReadout>> {
        eta_cl2_grid
            .iter()
            .map(|&e| minimize_occupation(&ClassicalBudget::symmetric(e)?, loss, db, SearchSpace::Full))
            .collect()
    };
    Ok(Fig2Right {
        eta_cl2: eta_cl2_grid.to_vec(),
        vacuum: curve(0.0)?,
        squeezed: curve(FIG2_RIGHT_SQUEEZE_DB)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantum_limited_phase_readout() {
        let w = 1.7;
        let n = to_markovian(&ReadoutConfig::quantum_limited(w)).unwrap();
        assert!((n.s_zz - 1.0 / (w * w)).abs() < 1e-15);
        assert!((n.s_ff - w * w).abs() < 1e-15);
        assert_eq!(n.s_zf, 0.0);
        assert!((purity_mu(&n).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tilted_readout_correlates() {
        let cfg = ReadoutConfig {
            phi: std::f64::consts::FRAC_PI_4,
            ..ReadoutConfig::quantum_limited(1.0)
        };
        let n = to_markovian(&cfg).unwrap();
        assert!((n.s_zf - 1.0).abs() < 1e-15);
        assert!((purity_mu(&n).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_factor_matches_minimum() {
        for (zf, zx) in [(0.1, 0.05), (0.5f64.sqrt(), 0.5f64.sqrt()), (3.0, 1e-3)] {
            let cfg = ReadoutConfig {
                zeta_f: zf,
                zeta_x: zx,
                ..ReadoutConfig::quantum_limited(2.3)
            };
            let (a, b) = (classical_factor(&cfg), classical_factor_numeric(&cfg));
            assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
        }
        assert_eq!(classical_factor(&ReadoutConfig::quantum_limited(1.0)), 0.0);
    }

    #[test]
    fn budget_keeps_eta_fixed() {
        let b = ClassicalBudget::symmetric(0.3).unwrap();
        for w in [0.01, 1.0, 50.0] {
            let (zf, zx) = b.at(w);
            assert!((2.0 * zf * zx - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn amplitude_quadrature_rejected() {
        let cfg = ReadoutConfig {
            phi: FRAC_PI_2,
            ..ReadoutConfig::quantum_limited(1.0)
        };
        assert!(to_markovian(&cfg).is_err());
    }

    #[test]
    fn lossless_optimum_approaches_ground_state() {
        let m = minimize_occupation(&ClassicalBudget::new(0.0, 0.0).unwrap(), 0.0, 0.0, SearchSpace::Full).unwrap();
        assert!(m.n_eff < 0.05, "{}", m.n_eff);
        let p = minimize_occupation(
            &ClassicalBudget::new(0.0, 0.0).unwrap(),
            0.0,
            0.0,
            SearchSpace::PhaseQuadrature,
        )
        .unwrap();
        assert!(p.n_eff >= 0.5, "{}", p.n_eff);
    }

    proptest! {
        #[test]
        fn pure_input_gives_pure_measurement(
            phi in -1.5f64..1.5,
            db in 0.0f64..20.0,
            lambda in 0.0f64..PI,
            lq in -2.0f64..2.0,
        ) {
            let cfg = ReadoutConfig {
                omega_q: 10f64.powf(lq),
                phi,
                squeeze_db: db,
                squeeze_angle: lambda,
                ..ReadoutConfig::quantum_limited(1.0)
            };
            let mu = purity_mu(&to_markovian(&cfg).unwrap()).unwrap();
            prop_assert!((mu - 1.0).abs() < 1e-10, "μ = {}", mu);
        }
    }
}

#[cfg(test)]
mod sweep_tests {
    use super::*;

    #[test]
    fn squeezing_changes_little() {
        let grid = [1e-2, 1e-1, 1.0, 10.0];
        let f = fig2_right_sweep(&grid, FIG2_RIGHT_LOSS).unwrap();
        for c in [&f.vacuum, &f.squeezed] {
            assert!(c.windows(2).all(|w| w[1].n_eff >= w[0].n_eff));
            assert!(c[1].n_eff < 1.0);
        }
        for (v, s) in f.vacuum.iter().zip(&f.squeezed) {
            assert!(s.n_eff <= v.n_eff && v.n_eff <= 2.0 * s.n_eff);
        }
    }
}

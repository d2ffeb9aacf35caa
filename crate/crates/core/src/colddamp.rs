//! Cold damping of a viscously damped oscillator read out in the phase
//! quadrature.
//!
//! Strength is x = Ω_q²/ω_p² and temperature θ = T/T_c. In units ω_p = 1 the
//! model has S_ZZ = 1/x, S_FF = x + √2θ, S_ZF = 0, so that
//! μ² = 1 + √2θ/x, A = 1 and B² = 1 + x² + √2θx.

use serde::{Deserialize, Serialize};

use crate::control::analyze;
use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::plant::{MarkovianNoise, Oscillator, SystemModel};

pub const HBAR_SI: f64 = 1.054_571_817e-34;
pub const BOLTZMANN_SI: f64 = 1.380_649e-23;

/// Bracket of the strength search in log10 x.
pub const LOG10_X_RANGE: (f64, f64) = (-4.0, 6.0);
pub const STRENGTH_TOL: f64 = 1e-8;

/// Temperatures of the five reference curves.
pub const FIG2_LEFT_THETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

/// Oscillator in a viscous bath, SI units. `q_p = ω_p/γ` with γ the energy
/// damping rate, so the thermal force spectrum is 4γk_BT (single-sided).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnvironment {
    pub temperature: f64,
    pub q_p: f64,
    pub omega_p: f64,
}

impl ThermalEnvironment {
    pub fn new(temperature: f64, q_p: f64, omega_p: f64) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!("T = {temperature} must be ≥ 0")));
        }
        if !(q_p > 0.0) || !q_p.is_finite() {
            return Err(Error::InvalidParameter(format!("Q_p = {q_p} must be > 0")));
        }
        if !(omega_p > 0.0) || !omega_p.is_finite() {
            return Err(Error::InvalidParameter(format!("ω_p = {omega_p} must be > 0")));
        }
        Ok(Self {
            temperature,
            q_p,
            omega_p,
        })
    }

    /// Energy damping rate ω_p/Q_p.
    pub fn damping_rate(&self) -> f64 {
        self.omega_p / self.q_p
    }

    /// ζ_F² such that the classical force spectrum 2ħΩ_q²ζ_F² equals 4γk_BT.
    pub fn zeta_f2(&self, omega_q: f64) -> f64 {
        2.0 * self.damping_rate() * BOLTZMANN_SI * self.temperature / (omega_q * omega_q * HBAR_SI)
    }
}

/// T_c = ħω_pQ_p/(2√2 k_B) and θ = T/T_c.
pub fn critical_temperature(env: &ThermalEnvironment) -> (f64, f64) {
    let t_c = HBAR_SI * env.omega_p * env.q_p / (2.0 * 2f64.sqrt() * BOLTZMANN_SI);
    (t_c, env.temperature / t_c)
}

/// Closed-form minimum occupation for θ ≤ 1.
pub fn n_opt(theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("θ = {theta} must be ≥ 0")));
    }
    if theta > 1.0 {
        return Err(Error::OutOfRegime(format!(
            "θ = {theta} > 1: above T_c the infimum is 1/√2, reached only at infinite strength"
        )));
    }
    let s = (2.0 - theta * theta).sqrt();
    Ok(2f64.powf(-1.5) * (s + (2.0 * theta * s).sqrt() + theta - 2f64.sqrt()))
}

/// Closed-form optimal Ω_q/ω_p for 0 < θ < 1.
pub fn optimal_strength(theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("θ = {theta} must be > 0")));
    }
    if theta >= 1.0 {
        return Err(Error::OutOfRegime(format!(
            "θ = {theta} ≥ 1: optimal strength diverges at and above T_c"
        )));
    }
    let s2 = 2.0 - theta * theta;
    let s = s2.sqrt();
    Ok((theta.sqrt() * s2.powf(0.75) / (s - theta) - theta / 2f64.sqrt()).sqrt())
}

/// Markovian model at temperature θ and strength x, in units ω_p = 1.
pub fn cold_damping_model(theta: f64, x: f64) -> Result<SystemModel> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("strength x = {x} must be > 0")));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("θ = {theta} must be ≥ 0")));
    }
    SystemModel::new(
        Oscillator::new(1.0, 0.0)?,
        MarkovianNoise::new(1.0 / x, x + 2f64.sqrt() * theta, 0.0)?,
    )
}

/// N_eff of the optimally controlled state.
pub fn occupation_vs_strength(theta: f64, x: f64) -> Result<f64> {
    Ok(analyze(&cold_damping_model(theta, x)?)?.metrics.n_eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthMinimum {
    pub x: f64,
    pub n_eff: f64,
}

impl StrengthMinimum {
    pub fn omega_q_ratio(&self) -> f64 {
        self.x.sqrt()
    }
}

/// Minimum of N_eff over log10 x in [`LOG10_X_RANGE`].
pub fn minimize(theta: f64) -> Result<StrengthMinimum> {
    cold_damping_model(theta, 1.0)?;
    let f = |lx: f64| occupation_vs_strength(theta, 10f64.powf(lx)).unwrap_or(f64::INFINITY);
    let m = golden_section(f, LOG10_X_RANGE.0, LOG10_X_RANGE.1, STRENGTH_TOL);
    Ok(StrengthMinimum {
        x: 10f64.powf(m.x),
        n_eff: m.value,
    })
}

/// One curve of N_eff over the strength grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub theta: f64,
    pub n_eff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Left {
    pub x: Vec<f64>,
    pub curves: Vec<SweepCurve>,
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

pub fn fig2_left_sweep(thetas: &[f64], x_grid: &[f64]) -> Result<Fig2Left> {
    use rayon::prelude::*;
    let curves = thetas
        .iter()
        .map(|&theta| {
            let n_eff = x_grid
                .par_iter()
                .map(|&x| occupation_vs_strength(theta, x))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepCurve { theta, n_eff })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig2Left {
        x: x_grid.to_vec(),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{ab_params, purity_mu};

    #[test]
    fn mapping_reproduces_mu_and_b() {
        let (theta, x) = (0.37, 2.3);
        let m = cold_damping_model(theta, x).unwrap();
        let mu = purity_mu(&m.noise).unwrap();
        assert!((mu * mu - (1.0 + 2f64.sqrt() * theta / x)).abs() < 1e-14);
        let ab = ab_params(&m).unwrap();
        assert!((ab.a - 1.0).abs() < 1e-15);
        assert!((ab.b * ab.b - (1.0 + x * x + 2f64.sqrt() * theta * x)).abs() < 1e-12);
    }

    #[test]
    fn n_opt_values() {
        assert!((n_opt(0.1).unwrap() - 0.22189844761635677).abs() < 1e-15);
        assert!((n_opt(1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(n_opt(0.0).unwrap(), 0.0);
        assert!(matches!(n_opt(1.5), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn small_theta_asymptotes() {
        for theta in [1e-6, 1e-5, 1e-4] {
            let r = n_opt(theta).unwrap() / theta.sqrt();
            assert!((r - 2f64.powf(-0.75)).abs() < 0.4 * theta.sqrt(), "{r}");
            let s = optimal_strength(theta).unwrap() / (2f64.sqrt() * theta).powf(0.25);
            assert!((s - 1.0).abs() < 0.05, "{s}");
        }
        assert!(optimal_strength(1.0).is_err());
    }

    #[test]
    fn minimum_matches_closed_form() {
        for theta in [0.01, 0.5] {
            let m = minimize(theta).unwrap();
            assert!((m.n_eff - n_opt(theta).unwrap()).abs() < 1e-6);
            let ratio = m.omega_q_ratio() / optimal_strength(theta).unwrap();
            assert!((ratio - 1.0).abs() < 1e-4, "θ = {theta}: {ratio}");
        }
    }

    #[test]
    fn hot_curves_decrease_to_the_limit() {
        for theta in [2.0, 10.0] {
            let grid = log_grid(1e-2, 1e6, 60);
            let n: Vec<f64> = grid.iter().map(|&x| occupation_vs_strength(theta, x).unwrap()).collect();
            assert!(n.windows(2).all(|w| w[1] < w[0]));
            assert!(n.iter().all(|&v| v > 0.5f64.sqrt()));
            assert!(n.last().unwrap() - 0.5f64.sqrt() < 1e-3);
        }
    }

    #[test]
    fn critical_temperature_scale() {
        let env = ThermalEnvironment::new(17.0, 1e6, 2.0 * std::f64::consts::PI * 1e6).unwrap();
        let (t_c, theta) = critical_temperature(&env);
        assert!((t_c - 16.97).abs() < 0.01, "{t_c}");
        assert!((theta - 17.0 / t_c).abs() < 1e-15);
    }

    #[test]
    fn si_environment_maps_to_theta() {
        let env = ThermalEnvironment::new(3.0, 1e5, 2.0e5).unwrap();
        let (_, theta) = critical_temperature(&env);
        let omega_q = 1.7 * env.omega_p;
        // 2Ω_q²ζ_F² in units of ω_p² is the thermal term √2θ.
        let thermal = 2.0 * omega_q * omega_q * env.zeta_f2(omega_q) / env.omega_p.powi(2);
        assert!((thermal - 2f64.sqrt() * theta).abs() < 1e-12 * thermal);
    }
}

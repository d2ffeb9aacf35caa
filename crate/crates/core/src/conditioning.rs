//! Conditional state of the oscillator given the measurement record.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{care, state_space_rational};
use crate::plant::{
    cross_spectrum_py, cross_spectrum_xy, output_spectrum, position_spectrum, AbParams,
    SystemModel,
};
use crate::ratfun::{integrate_full_line, integrate_spectrum, spectral_factorize, RationalFunction};

/// Gaussian position/momentum covariance. V_xp is the symmetrized covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub v_xx: f64,
    pub v_pp: f64,
    pub v_xp: f64,
}

impl GaussianState {
    pub fn new(v_xx: f64, v_pp: f64, v_xp: f64) -> Result<Self> {
        let s = Self { v_xx, v_pp, v_xp };
        if !(v_xx > 0.0 && v_pp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "variances must be positive (V_xx = {v_xx}, V_pp = {v_pp})"
            )));
        }
        if s.purity() < 0.5 - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "state violates the uncertainty relation (U = {})",
                s.purity()
            )));
        }
        Ok(s)
    }

    /// U = √(V_xx V_pp − V_xp²).
    pub fn purity(&self) -> f64 {
        (self.v_xx * self.v_pp - self.v_xp * self.v_xp).sqrt()
    }

    /// N_eff = U/ħ − 1/2.
    pub fn n_eff(&self) -> f64 {
        self.purity() - 0.5
    }

    /// Trap frequency √(V_pp/V_xx) in which the state looks thermal.
    pub fn omega_star(&self) -> f64 {
        (self.v_pp / self.v_xx).sqrt()
    }

    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        let scale = self.v_xx.abs().max(self.v_pp.abs()).max(self.v_xp.abs());
        [
            (self.v_xx - other.v_xx).abs() / self.v_xx.abs(),
            (self.v_pp - other.v_pp).abs() / self.v_pp.abs(),
            (self.v_xp - other.v_xp).abs() / self.v_xp.abs().max(1e-3 * scale),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerFilterPair {
    pub k_x: RationalFunction,
    pub k_p: RationalFunction,
}

/// Closed-form conditional covariance of the Markovian model.
pub fn conditional_covariance_markovian(ab: &AbParams, mu: f64) -> Result<GaussianState> {
    let (a, b) = (ab.a_hom(), ab.b_hom());
    if a > b * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("A = {} exceeds B = {}", ab.a, ab.b)));
    }
    if a + b <= 0.0 {
        return Err(Error::Degenerate("A = −B leaves the conditional state undefined".into()));
    }
    let half = mu / 2.0;
    let v_xp = half * ((b - a).max(0.0) / (b + a)).sqrt();
    Ok(GaussianState {
        v_xx: half * (2.0 / (a + b)).sqrt(),
        v_pp: half * (2.0 * b * b / (a + b)).sqrt(),
        v_xp,
    })
}

/// Steady-state Kalman–Bucy filter for (x, p).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilter {
    /// Estimation error covariance.
    pub error: DMatrix<f64>,
    /// Gain L in dx̂ = A x̂ dt + L (dy − x̂ dt).
    pub gain: DVector<f64>,
    /// A − L C.
    pub closed: DMatrix<f64>,
}

impl KalmanFilter {
    pub fn state(&self) -> GaussianState {
        GaussianState {
            v_xx: self.error[(0, 0)],
            v_pp: self.error[(1, 1)],
            v_xp: self.error[(0, 1)],
        }
    }

    /// Filters from y to x̂ and p̂ as rational functions of Ω.
    pub fn filters(&self) -> Result<WienerFilterPair> {
        let ex = DVector::from_vec(vec![1.0, 0.0]);
        let ep = DVector::from_vec(vec![0.0, 1.0]);
        Ok(WienerFilterPair {
            k_x: state_space_rational(&self.closed, &self.gain, &ex, 0.0)?,
            k_p: state_space_rational(&self.closed, &self.gain, &ep, 0.0)?,
        })
    }
}

/// Plant matrix of ẋ = p, ṗ = −(ω_p² + γ_p²)x − 2γ_p p.
pub fn plant_matrix(model: &SystemModel) -> DMatrix<f64> {
    let (w, g) = (model.osc.omega_p, model.osc.gamma_p);
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -(w * w + g * g), -2.0 * g])
}

/// Solve the filter Riccati equation with correlated process and
/// measurement noise (intensities S_FF/2, S_ZZ/2, cross S_ZF/2).
pub fn kalman_filter(model: &SystemModel) -> Result<KalmanFilter> {
    let n = &model.noise;
    let a = plant_matrix(model);
    let r = n.s_zz / 2.0;
    let cross = DVector::from_vec(vec![0.0, n.s_zf / 2.0]);
    let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    // remove the correlation: Ā = A − N R⁻¹ C, Q̄ = Q − N R⁻¹ Nᵀ
    let a_bar = &a - &cross * &c / r;
    let q_bar = DMatrix::from_row_slice(
        2,
        2,
        &[0.0, 0.0, 0.0, (n.s_ff - n.s_zf * n.s_zf / n.s_zz) / 2.0],
    );
    let g = c.transpose() * &c / r;
    let p = care(&a_bar.transpose(), &g, &q_bar)?;
    let gain = (&p * c.transpose() + &cross) / r;
    let gain = DVector::from_column_slice(gain.as_slice());
    let closed = &a - &gain * &c;
    Ok(KalmanFilter {
        error: p,
        gain,
        closed,
    })
}

/// Conditional covariance from the Riccati equation.
pub fn conditional_covariance_general(model: &SystemModel) -> Result<GaussianState> {
    Ok(kalman_filter(model)?.state())
}

/// K_a = (1/φ_+)·[S_ay/φ_+*]_+.
pub fn wiener_filter(s_ay: &RationalFunction, phi: &RationalFunction) -> Result<RationalFunction> {
    let g = causal_projection(s_ay, phi)?;
    g.div(phi).map(|k| k.reduced())
}

/// G_a = [S_ay/φ_+*]_+.
pub fn causal_projection(s_ay: &RationalFunction, phi: &RationalFunction) -> Result<RationalFunction> {
    s_ay.div(&phi.para_conj())?.causal_part()
}

/// Frequency-domain construction of the conditional state and its filters.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerSolution {
    pub phi: RationalFunction,
    pub g_x: RationalFunction,
    pub g_p: RationalFunction,
    pub filters: WienerFilterPair,
    pub state: GaussianState,
}

/// ∫₀^∞ f dΩ/2π for f with f(−Ω) = conj f(Ω).
pub fn single_sided(f: &RationalFunction) -> Result<f64> {
    Ok(0.5 * integrate_full_line(f)?.re)
}

/// φ_+ and the causal projections G_x = [S_xy/φ_+*]_+, G_p = [S_py/φ_+*]_+.
pub fn whitened_projections(
    model: &SystemModel,
) -> Result<(RationalFunction, RationalFunction, RationalFunction)> {
    let syy = output_spectrum(model)?;
    let phi = spectral_factorize(&syy)?;
    let g_x = causal_projection(&cross_spectrum_xy(model)?, &phi)?;
    let g_p = causal_projection(&cross_spectrum_py(model)?, &phi)?;
    Ok((phi, g_x, g_p))
}

/// Wiener filters and the residual-integral conditional state for a model
/// with γ_p > 0:
/// V_xx = ∫S_xx − ∫|G_x|², V_pp = ∫Ω²S_xx − ∫|G_p|², V_xp = −∫Re(G_x G_p*).
pub fn wiener_solution(model: &SystemModel) -> Result<WienerSolution> {
    if model.osc.gamma_p <= 0.0 {
        return Err(Error::InvalidParameter(
            "Wiener route needs γ_p > 0; regularize the model first".into(),
        ));
    }
    let (phi, g_x, g_p) = whitened_projections(model)?;
    let sxx = position_spectrum(model)?;
    let v_xx_open = integrate_spectrum(&sxx)?;
    let v_pp_open = single_sided(&sxx.rat().mul(&RationalFunction::omega().abs_sqr()))?;
    let v_xx = v_xx_open - single_sided(&g_x.abs_sqr())?;
    let v_pp = v_pp_open - single_sided(&g_p.abs_sqr())?;
    let v_xp = -single_sided(&g_x.mul(&g_p.para_conj()))?;
    let filters = WienerFilterPair {
        k_x: g_x.div(&phi)?.reduced(),
        k_p: g_p.div(&phi)?.reduced(),
    };
    Ok(WienerSolution {
        phi,
        g_x,
        g_p,
        filters,
        state: GaussianState { v_xx, v_pp, v_xp },
    })
}

/// Value at t = 0⁺ of the causal impulse response whose transform is `f`,
/// i.e. lim −iΩ·f(Ω). Zero for relative degree ≥ 2; infinite (an impulse)
/// for relative degree 0.
pub fn initial_value(f: &RationalFunction) -> Result<f64> {
    let f = f.reduced();
    match f.relative_degree() {
        d if d >= 2 => Ok(0.0),
        1 => {
            let v = -Complex64::i() * f.gain();
            if v.im.abs() > 1e-8 * v.norm() {
                return Err(Error::InternalConsistency(format!(
                    "impulse response of a real filter is complex at t = 0: {v}"
                )));
            }
            Ok(v.re)
        }
        _ => Err(Error::ImproperController(
            "filter contains a δ(t) term; its t = 0 value is undefined".into(),
        )),
    }
}

/// Check of G_x(t = 0⁺)² = 4V_xp^c; returns (G_x(0⁺), 4V_xp^c).
pub fn gx_zero_check(sol: &WienerSolution) -> Result<(f64, f64)> {
    Ok((initial_value(&sol.g_x)?, 4.0 * sol.state.v_xp))
}

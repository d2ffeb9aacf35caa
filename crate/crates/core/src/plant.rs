//! Oscillator, Markovian noise and the open-loop measurement spectra.
//!
//! Units: ħ = 1, mass = 1. The plant obeys
//! ẍ = −(ω_p² + γ_p²)x − 2γ_p ẋ + F and the detector records y = x + Z.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::scan_then_golden;
use crate::ratfun::{Polynomial, RationalFunction, SpectralDensity};

/// Slack allowed on μ ≥ 1 to absorb rounding in assembled noise triples.
pub const HEISENBERG_SLACK: f64 = 1e-12;

/// Damping used to move marginal poles off the real axis, relative to the
/// model's frequency scale.
pub const GAMMA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub omega_p: f64,
    pub gamma_p: f64,
}

impl Oscillator {
    pub fn new(omega_p: f64, gamma_p: f64) -> Result<Self> {
        if !(omega_p >= 0.0 && omega_p.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_p = {omega_p} must be ≥ 0")));
        }
        if !(gamma_p >= 0.0 && gamma_p.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma_p = {gamma_p} must be ≥ 0")));
        }
        Ok(Self { omega_p, gamma_p })
    }

    pub fn free_mass() -> Self {
        Self {
            omega_p: 0.0,
            gamma_p: 0.0,
        }
    }

    /// Q_p = ω_p/γ_p.
    pub fn quality(&self) -> f64 {
        self.omega_p / self.gamma_p
    }

    /// Poles of R_xx: ±ω_p − iγ_p.
    pub fn poles(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.omega_p, -self.gamma_p),
            Complex64::new(-self.omega_p, -self.gamma_p),
        ]
    }

    pub fn with_gamma(&self, gamma_p: f64) -> Self {
        Self {
            omega_p: self.omega_p,
            gamma_p,
        }
    }

    /// P(Ω) = (Ω − ω_p + iγ_p)(Ω + ω_p + iγ_p) = −1/R_xx.
    pub fn inverse_response(&self) -> RationalFunction {
        RationalFunction::from_zpk(Complex64::new(1.0, 0.0), self.poles().to_vec(), vec![])
    }

    pub fn inverse_response_poly(&self) -> Polynomial {
        Polynomial::from_roots(&self.poles(), Complex64::new(1.0, 0.0))
    }
}

/// R_xx = −1/[(Ω − ω_p + iγ_p)(Ω + ω_p + iγ_p)].
pub fn response(osc: &Oscillator) -> RationalFunction {
    RationalFunction::from_zpk(Complex64::new(-1.0, 0.0), vec![], osc.poles().to_vec())
}

/// Constant single-sided spectra of the sensing noise Z and force noise F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovianNoise {
    pub s_zz: f64,
    pub s_ff: f64,
    pub s_zf: f64,
}

impl MarkovianNoise {
    pub fn new(s_zz: f64, s_ff: f64, s_zf: f64) -> Result<Self> {
        let noise = Self { s_zz, s_ff, s_zf };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_zz > 0.0 && self.s_zz.is_finite()) {
            return Err(Error::InvalidNoise(format!("S_ZZ = {} must be > 0", self.s_zz)));
        }
        if !(self.s_ff > 0.0 && self.s_ff.is_finite()) {
            return Err(Error::InvalidNoise(format!("S_FF = {} must be > 0", self.s_ff)));
        }
        if !self.s_zf.is_finite() {
            return Err(Error::InvalidNoise("S_ZF must be finite".into()));
        }
        purity_mu(self).map(|_| ())
    }

    /// Same spectra multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            s_zz: c * self.s_zz,
            s_ff: c * self.s_ff,
            s_zf: c * self.s_zf,
        }
    }
}

/// μ = √(S_ZZ S_FF − S_ZF²)/ħ; values within [`HEISENBERG_SLACK`] below 1,
/// relative to S_ZZ S_FF, are clamped to 1.
pub fn purity_mu(noise: &MarkovianNoise) -> Result<f64> {
    let det = noise.s_zz * noise.s_ff - noise.s_zf * noise.s_zf;
    let mu = det.max(0.0).sqrt();
    let slack = HEISENBERG_SLACK * (noise.s_zz * noise.s_ff).max(1.0);
    if mu < 1.0 - slack || det.is_nan() {
        return Err(Error::HeisenbergViolation { mu });
    }
    Ok(mu.max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub osc: Oscillator,
    pub noise: MarkovianNoise,
}

impl SystemModel {
    pub fn new(osc: Oscillator, noise: MarkovianNoise) -> Result<Self> {
        noise.validate()?;
        Ok(Self { osc, noise })
    }

    /// ω_p, or (S_FF/S_ZZ)^{1/4} for a free mass.
    pub fn frequency_scale(&self) -> f64 {
        if self.osc.omega_p > 0.0 {
            self.osc.omega_p
        } else {
            (self.noise.s_ff / self.noise.s_zz).powf(0.25)
        }
    }

    /// Copy with γ_p raised to at least `GAMMA_FLOOR` times the frequency scale.
    pub fn regularized(&self) -> Self {
        self.with_gamma_at_least(GAMMA_FLOOR * self.frequency_scale())
    }

    pub fn with_gamma_at_least(&self, gamma: f64) -> Self {
        Self {
            osc: self.osc.with_gamma(self.osc.gamma_p.max(gamma)),
            noise: self.noise,
        }
    }

    /// Numerator of S_yy·|P|²: S_ZZ PP* − S_ZF(P + P*) + S_FF.
    fn output_numerator(&self) -> Polynomial {
        let p = self.osc.inverse_response_poly();
        let pc = conj_poly(&p);
        let n = &self.noise;
        p.mul(&pc)
            .scale(Complex64::new(n.s_zz, 0.0))
            .sub(&p.add(&pc).scale(Complex64::new(n.s_zf, 0.0)))
            .add(&Polynomial::constant(Complex64::new(n.s_ff, 0.0)))
    }

    fn over_pp(&self, num: &Polynomial) -> Result<RationalFunction> {
        let poles = self.osc.poles();
        let mut all = poles.to_vec();
        all.extend(poles.iter().map(|p| p.conj()));
        let zeros = if num.degree() > 0 { num.roots_flat()? } else { vec![] };
        Ok(RationalFunction::from_zpk(num.leading(), zeros, all))
    }
}

/// Para-conjugate of a polynomial: coefficients conjugated.
fn conj_poly(p: &Polynomial) -> Polynomial {
    Polynomial::new(p.coeffs().iter().map(|c| c.conj()).collect())
}

/// Dimensionless (A, B) of the Markovian model at reference frequency ω_s,
/// built from the homogeneous combinations
/// ω_s²A = ω_p² + S_ZF/S_ZZ and ω_s⁴B² = ω_p⁴ + 2ω_p²S_ZF/S_ZZ + S_FF/S_ZZ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbParams {
    pub a: f64,
    pub b: f64,
    pub omega_s: f64,
    pub omega_p: f64,
}

impl AbParams {
    /// ω_s²A.
    pub fn a_hom(&self) -> f64 {
        self.a * self.omega_s * self.omega_s
    }

    /// ω_s²B.
    pub fn b_hom(&self) -> f64 {
        self.b * self.omega_s * self.omega_s
    }

    pub fn ratio(&self) -> f64 {
        self.a / self.b
    }

    /// Q_eff = √(B + A)/(2√(B − A)).
    pub fn q_eff(&self) -> f64 {
        (self.b + self.a).sqrt() / (2.0 * (self.b - self.a).sqrt())
    }

    /// Parameters for given dimensionless A, B at ω_s = ω_p.
    pub fn from_dimensionless(a: f64, b: f64, omega_p: f64) -> Result<Self> {
        let ab = Self {
            a,
            b,
            omega_s: omega_p,
            omega_p,
        };
        ab.check()?;
        Ok(ab)
    }

    fn check(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::InvalidNoise(format!("B = {} must be positive", self.b)));
        }
        if self.a > self.b * (1.0 + 1e-12) || self.a < -self.b * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "|A| = {} exceeds B = {}",
                self.a.abs(),
                self.b
            )));
        }
        Ok(())
    }
}

pub fn ab_params(model: &SystemModel) -> Result<AbParams> {
    ab_params_at(model, model.frequency_scale())
}

pub fn ab_params_at(model: &SystemModel, omega_s: f64) -> Result<AbParams> {
    if !(omega_s > 0.0) {
        return Err(Error::InvalidParameter(format!("reference frequency {omega_s} must be > 0")));
    }
    let n = &model.noise;
    let w2 = model.osc.omega_p * model.osc.omega_p;
    let r = n.s_zf / n.s_zz;
    let b2 = w2 * w2 + 2.0 * w2 * r + n.s_ff / n.s_zz;
    if !(b2 > 0.0) {
        return Err(Error::InvalidNoise(format!("B² = {b2:.6e} is not positive")));
    }
    let s2 = omega_s * omega_s;
    let ab = AbParams {
        a: (w2 + r) / s2,
        b: b2.sqrt() / s2,
        omega_s,
        omega_p: model.osc.omega_p,
    };
    ab.check()?;
    Ok(ab)
}

/// Open-loop S_yy = S_ZZ + 2Re(R_xx)S_ZF + |R_xx|²S_FF.
pub fn output_spectrum(model: &SystemModel) -> Result<SpectralDensity> {
    SpectralDensity::new(output_rational(model)?)
}

pub fn output_rational(model: &SystemModel) -> Result<RationalFunction> {
    model.over_pp(&model.output_numerator())
}

/// S_xy = (S_FF − S_ZF P*)/|P|², the cross spectrum of position and record.
pub fn cross_spectrum_xy(model: &SystemModel) -> Result<RationalFunction> {
    let p = model.osc.inverse_response_poly();
    let n = &model.noise;
    let num = Polynomial::constant(Complex64::new(n.s_ff, 0.0))
        .sub(&conj_poly(&p).scale(Complex64::new(n.s_zf, 0.0)));
    model.over_pp(&num)
}

/// S_py = −iΩ·S_xy.
pub fn cross_spectrum_py(model: &SystemModel) -> Result<RationalFunction> {
    Ok(cross_spectrum_xy(model)?.mul(&RationalFunction::omega().scale_by(-Complex64::i())))
}

/// S_xx = S_FF/|P|².
pub fn position_spectrum(model: &SystemModel) -> Result<SpectralDensity> {
    let num = Polynomial::constant(Complex64::new(model.noise.s_ff, 0.0));
    SpectralDensity::new(model.over_pp(&num)?)
}

/// Force-referred noise S_G = S_yy/|R_xx|².
pub fn force_referred_spectrum(model: &SystemModel) -> Result<SpectralDensity> {
    SpectralDensity::new(RationalFunction::from_polynomial(&model.output_numerator())?)
}

/// Free-mass force SQL, 2ħmΩ².
pub fn sql_force(omega: f64) -> f64 {
    2.0 * omega * omega
}

/// η² = min over Ω of S_G/S_G^SQL, found numerically.
pub fn eta2_numeric(model: &SystemModel) -> Result<(f64, f64)> {
    let sg = force_referred_spectrum(model)?;
    let ln_scale = model.frequency_scale().ln();
    let f = |u: f64| {
        let w = u.exp();
        sg.eval(w) / sql_force(w)
    };
    let m = scan_then_golden(f, ln_scale - 12.0, ln_scale + 12.0, 2401, 1e-12);
    Ok((m.value, m.x.exp()))
}

/// Closed form η² = μ/(2Q_eff) = S_ZZ(ω_s²B − ω_s²A).
pub fn eta2_closed(model: &SystemModel) -> Result<f64> {
    let ab = ab_params(model)?;
    Ok(model.noise.s_zz * (ab.b_hom() - ab.a_hom()))
}

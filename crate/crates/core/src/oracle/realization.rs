//! State-space realizations of rational transfer functions.
//!
//! With the e^{−iΩt} convention the Laplace variable is s = −iΩ, so a
//! realization (A, b, c, d) has transfer function c(sI − A)⁻¹b + d at
//! s = −iΩ, and an eigenvalue λ of A is a pole at Ω = iλ.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::riccati::eigenvalues;
use crate::error::{Error, Result};
use crate::ratfun::{Polynomial, RationalFunction};

/// Largest relative imaginary part tolerated in s-domain coefficients.
const REALNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpaceRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn eval(&self, omega: Complex64) -> Complex64 {
        let n = self.order();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let s = -Complex64::i() * omega;
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        match m.lu().solve(&rhs) {
            Some(v) => {
                v.iter()
                    .zip(self.c.iter())
                    .map(|(x, c)| x * c)
                    .sum::<Complex64>()
                    + self.d
            }
            None => Complex64::new(f64::INFINITY, 0.0),
        }
    }

    /// Poles in the Ω plane.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return vec![];
        }
        eigenvalues(&self.a)
            .into_iter()
            .map(|l| Complex64::i() * l)
            .collect()
    }

    pub fn to_rational(&self) -> Result<RationalFunction> {
        state_space_rational(&self.a, &self.b, &self.c, self.d)
    }
}

/// Coefficients of p(Ω) re-expressed in s = −iΩ (Ω = is).
fn to_s_coeffs(p: &Polynomial) -> Vec<Complex64> {
    let mut ik = Complex64::new(1.0, 0.0);
    p.coeffs()
        .iter()
        .map(|&c| {
            let v = c * ik;
            ik *= Complex64::i();
            v
        })
        .collect()
}

/// Real parts of `v`, failing if any imaginary part is significant.
fn real_coeffs(v: &[Complex64]) -> Result<Vec<f64>> {
    let max = v.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let worst_im = v.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    if worst_im > REALNESS_TOL * max {
        return Err(Error::InvalidParameter(format!(
            "transfer function has no real realization (imaginary part {worst_im:.3e})"
        )));
    }
    Ok(v.iter().map(|c| c.re).collect())
}

/// Controllable canonical realization of a proper rational function.
pub fn realize(r: &RationalFunction) -> Result<StateSpaceRealization> {
    let r = r.reduced();
    if !r.is_proper() {
        return Err(Error::ImproperController(format!(
            "relative degree {} < 0",
            r.relative_degree()
        )));
    }
    let num = to_s_coeffs(&r.num());
    let den = to_s_coeffs(&r.den());
    let n = den.len() - 1;
    let lead = den[n];
    let den = real_coeffs(&den.iter().map(|c| c / lead).collect::<Vec<_>>())?;
    let mut num = real_coeffs(&num.iter().map(|c| c / lead).collect::<Vec<_>>())?;
    num.resize(n + 1, 0.0);
    let d = num[n];
    let beta: Vec<f64> = (0..n).map(|k| num[k] - d * den[k]).collect();

    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for k in 0..n {
        a[(n - 1, k)] = -den[k];
    }
    let mut b = DVector::<f64>::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    Ok(StateSpaceRealization {
        a,
        b,
        c: DVector::from_vec(beta),
        d,
    })
}

/// c(sI − A)⁻¹b + d as a rational function of Ω. Poles come from the
/// eigenvalues of A; the numerator from the Faddeev–LeVerrier adjugate.
pub fn state_space_rational(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    d: f64,
) -> Result<RationalFunction> {
    let n = a.nrows();
    if n == 0 {
        return Ok(RationalFunction::real(d));
    }
    // adj(sI − A) = Σ_k s^{n−1−k} M_k, det(sI − A) = s^n + Σ c_{n−k} s^{n−k}
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = id.clone();
    let mut char_s = vec![0.0; n + 1];
    char_s[n] = 1.0;
    let mut num_s = vec![0.0; n + 1];
    for k in 1..=n {
        num_s[n - k] = (c.transpose() * &m * b)[(0, 0)];
        let am = a * &m;
        let ck = -am.trace() / k as f64;
        char_s[n - k] = ck;
        m = am + &id * ck;
    }
    for (ns, cs) in num_s.iter_mut().zip(&char_s) {
        *ns += d * cs;
    }
    // s^k = (−iΩ)^k
    let to_omega = |v: &[f64]| {
        let mut f = Complex64::new(1.0, 0.0);
        Polynomial::new(
            v.iter()
                .map(|&x| {
                    let out = f * x;
                    f *= -Complex64::i();
                    out
                })
                .collect(),
        )
    };
    let num = to_omega(&num_s);
    let den = to_omega(&char_s);
    if num.is_zero() {
        return Ok(RationalFunction::zero());
    }
    let scale = den
        .coeffs()
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let num = num.trimmed(1e-13, scale.max(1.0));
    let zeros = if num.degree() > 0 { num.roots_flat()? } else { vec![] };
    let poles = eigenvalues(a)
        .into_iter()
        .map(|l| Complex64::i() * l)
        .collect();
    Ok(RationalFunction::from_zpk(num.leading() / den.leading(), zeros, poles))
}

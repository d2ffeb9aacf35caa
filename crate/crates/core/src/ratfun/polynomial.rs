use std::fmt;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative distance below which computed roots are reported as one root
/// with multiplicity.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Maximum relative coefficient error accepted when rebuilding a
/// polynomial from its computed roots.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Polynomial in Ω with complex coefficients, stored in ascending degree.
///
/// Trailing zero coefficients are trimmed on construction; the zero
/// polynomial has an empty coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

/// A root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// `lead · Π (Ω − r)`.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        let mut coeffs = vec![lead];
        for &r in roots {
            coeffs = mul_linear(&coeffs, r);
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0 and is flagged by [`is_zero`](Self::is_zero).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(ZERO)
                        + other.coeffs.get(k).copied().unwrap_or(ZERO)
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Quotient and remainder of long division.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        if self.coeffs.len() < divisor.coeffs.len() {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dn = divisor.coeffs.len() - 1;
        let lead = divisor.leading();
        let mut quot = vec![ZERO; rem.len() - dn];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dn] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
        }
        rem.truncate(dn);
        (Self::new(quot), Self::new(rem))
    }

    /// Drop leading coefficients that are negligible relative to the rest,
    /// weighting degree k by `scale^k` so the test is unit-consistent.
    pub fn trimmed(&self, rel_tol: f64, scale: f64) -> Self {
        let weighted: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * scale.powi(k as i32))
            .collect();
        let max = weighted.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return Self::zero();
        }
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && weighted[coeffs.len() - 1] <= rel_tol * max {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    /// Roots via companion-matrix eigenvalues with one Newton polish step;
    /// nearby roots are merged into one entry with multiplicity.
    pub fn roots(&self) -> Result<Vec<Root>> {
        let flat = self.roots_flat()?;
        Ok(cluster_roots(&flat, CLUSTER_TOL))
    }

    /// All roots, repeated according to multiplicity.
    pub fn roots_flat(&self) -> Result<Vec<Complex64>> {
        if self.degree() == 0 {
            return Err(Error::EmptyRoots);
        }
        let raw = self.companion_roots()?;
        let clustered: Vec<Root> = cluster_roots(&raw, CLUSTER_TOL)
            .into_iter()
            .map(|r| Root {
                value: polish_multiple(self, r),
                multiplicity: r.multiplicity,
            })
            .collect();
        let flat: Vec<Complex64> = clustered
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity))
            .collect();
        let residual = self.reconstruction_error(&flat);
        if residual > RECONSTRUCTION_TOL {
            // clustering can hurt a near-multiple root; fall back to raw values
            let raw_residual = self.reconstruction_error(&raw);
            if raw_residual > RECONSTRUCTION_TOL {
                return Err(Error::RootNonConvergence {
                    residual: raw_residual,
                });
            }
            return Ok(raw);
        }
        Ok(flat)
    }

    fn reconstruction_error(&self, roots: &[Complex64]) -> f64 {
        let rebuilt = Self::from_roots(roots, self.leading());
        let scale = root_scale(roots);
        let max = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * scale.powi(k as i32))
            .fold(0.0, f64::max);
        self.coeffs
            .iter()
            .zip(rebuilt.coeffs.iter())
            .enumerate()
            .map(|(k, (a, b))| (a - b).norm() * scale.powi(k as i32))
            .fold(0.0, f64::max)
            / max
    }

    fn companion_roots(&self) -> Result<Vec<Complex64>> {
        // exact roots at the origin
        let zeros_at_origin = self.coeffs.iter().take_while(|c| **c == ZERO).count();
        let reduced = &self.coeffs[zeros_at_origin..];
        let n = reduced.len() - 1;
        let mut roots = vec![ZERO; zeros_at_origin];
        if n == 0 {
            return Ok(roots);
        }
        let lead = reduced[n];
        if n == 1 {
            roots.push(-reduced[0] / lead);
            return Ok(roots);
        }
        // substitute Ω = s·w so the monic polynomial has unit constant term
        let s = (reduced[0] / lead).norm().powf(1.0 / n as f64);
        let s = if s.is_finite() && s > 0.0 { s } else { 1.0 };
        let monic: Vec<Complex64> = (0..n)
            .map(|k| reduced[k] / lead / s.powi((n - k) as i32))
            .collect();
        let mut companion = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = ONE;
        }
        for (i, &c) in monic.iter().enumerate() {
            companion[(i, n - 1)] = -c;
        }
        let eig = companion_eigenvalues(companion)?;
        let dp = self.derivative();
        for w in &eig {
            let z = w * s;
            roots.push(newton_polish(self, &dp, z));
        }
        Ok(roots)
    }
}

/// Complex Schur eigenvalues of the companion matrix, computed on a shifted
/// copy: symmetric spectra such as Ω⁴ + 1 stall the unshifted QR iteration.
fn companion_eigenvalues(companion: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = companion.nrows();
    let shifts = [
        Complex64::new(0.312_739_046, 0.170_796_327),
        ZERO,
        Complex64::new(-0.271_828_183, 0.414_213_562),
    ];
    for sigma in shifts {
        let shifted = &companion + DMatrix::<Complex64>::identity(n, n) * sigma;
        if let Some(eig) = Schur::try_new(shifted, f64::EPSILON, 300 * n)
            .and_then(|schur| schur.eigenvalues())
        {
            return Ok(eig.iter().map(|l| l - sigma).collect());
        }
    }
    Err(Error::RootNonConvergence {
        residual: f64::INFINITY,
    })
}

/// A root of multiplicity m is a simple root of the (m−1)-th derivative.
fn polish_multiple(p: &Polynomial, root: Root) -> Complex64 {
    if root.multiplicity == 1 {
        return root.value;
    }
    let mut q = p.clone();
    for _ in 1..root.multiplicity {
        q = q.derivative();
    }
    let dq = q.derivative();
    let mut z = root.value;
    for _ in 0..3 {
        z = newton_polish(&q, &dq, z);
    }
    z
}

fn newton_polish(p: &Polynomial, dp: &Polynomial, z: Complex64) -> Complex64 {
    let f = p.eval(z);
    let d = dp.eval(z);
    if d.norm() == 0.0 || !d.is_finite() {
        return z;
    }
    let candidate = z - f / d;
    if candidate.is_finite() && p.eval(candidate).norm() < f.norm() {
        candidate
    } else {
        z
    }
}

fn mul_linear(coeffs: &[Complex64], r: Complex64) -> Vec<Complex64> {
    let mut out = vec![ZERO; coeffs.len() + 1];
    for (k, &c) in coeffs.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= c * r;
    }
    out
}

/// Characteristic magnitude of a root set (mean modulus, 1 if all zero).
pub fn root_scale(roots: &[Complex64]) -> f64 {
    let nonzero: Vec<f64> = roots.iter().map(|r| r.norm()).filter(|&m| m > 0.0).collect();
    if nonzero.is_empty() {
        1.0
    } else {
        nonzero.iter().sum::<f64>() / nonzero.len() as f64
    }
}

/// Group roots closer than `tol` (relative to their magnitude and the set's
/// scale); each group is represented by its mean.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<Root> {
    let scale = root_scale(roots);
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        for j in (i + 1)..roots.len() {
            if used[j] {
                continue;
            }
            let bound = tol * roots[i].norm().max(roots[j].norm()).max(1e-6 * scale);
            if (roots[i] - roots[j]).norm() <= bound {
                used[j] = true;
                members.push(roots[j]);
            }
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push(Root {
            value: mean,
            multiplicity: members.len(),
        });
    }
    out
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})Ω"),
                _ => format!("({c})Ω^{k}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn contains(roots: &[Complex64], target: Complex64, tol: f64) -> bool {
        roots.iter().any(|r| (r - target).norm() < tol)
    }

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::from_real(&[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::from_real(&[0.0, 0.0]).is_zero());
    }

    #[test]
    fn roots_of_omega_squared_plus_one() {
        let p = Polynomial::from_real(&[1.0, 0.0, 1.0]);
        let r = p.roots_flat().unwrap();
        assert_eq!(r.len(), 2);
        assert!(contains(&r, c(0.0, 1.0), 1e-14));
        assert!(contains(&r, c(0.0, -1.0), 1e-14));
    }

    #[test]
    fn roots_of_omega_fourth_plus_one() {
        let p = Polynomial::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = p.roots_flat().unwrap();
        for k in [1.0, 3.0, 5.0, 7.0] {
            let expected = Complex64::from_polar(1.0, k * PI / 4.0);
            assert!(contains(&r, expected, 1e-13), "missing {expected}");
        }
    }

    #[test]
    fn double_root_is_clustered() {
        let a = c(1.0, -2.0);
        let p = Polynomial::from_roots(&[a, a, c(-3.0, 0.0)], ONE);
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 2);
        let double = roots.iter().find(|r| r.multiplicity == 2).unwrap();
        assert!((double.value - a).norm() < 1e-10);
        let single = roots.iter().find(|r| r.multiplicity == 1).unwrap();
        assert!((single.value - c(-3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degree_zero_has_no_roots() {
        assert_eq!(
            Polynomial::constant(c(2.0, 0.0)).roots(),
            Err(Error::EmptyRoots)
        );
    }

    #[test]
    fn zero_roots_at_origin_are_exact() {
        let p = Polynomial::from_real(&[0.0, 0.0, 1.0, 1.0]);
        let r = p.roots_flat().unwrap();
        assert_eq!(r.iter().filter(|z| **z == ZERO).count(), 2);
        assert!(contains(&r, c(-1.0, 0.0), 1e-14));
    }

    #[test]
    fn division_reconstructs() {
        let a = Polynomial::from_real(&[1.0, -2.0, 0.5, 3.0, 1.0]);
        let b = Polynomial::from_real(&[2.0, 1.0, 1.0]);
        let (q, r) = a.div_rem(&b);
        let back = q.mul(&b).add(&r);
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!(r.degree() < b.degree());
    }

    #[test]
    fn roots_widely_scaled() {
        let roots = [c(1e3, -2.0), c(-1e3, -2.0), c(0.0, -5e2)];
        let p = Polynomial::from_roots(&roots, c(2.0, 0.0));
        let found = p.roots_flat().unwrap();
        for r in roots {
            assert!(contains(&found, r, 1e-9 * 1e3));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reconstruction_matches(coeffs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..8)) {
                let mut cs: Vec<Complex64> = coeffs.iter().map(|&(a, b)| c(a, b)).collect();
                let last = cs.len() - 1;
                if cs[last].norm() < 0.1 { cs[last] = ONE; }
                let p = Polynomial::new(cs);
                let roots = p.roots_flat().unwrap();
                prop_assert_eq!(roots.len(), p.degree());
                for r in &roots {
                    let scale = p.coeffs().iter().enumerate()
                        .map(|(k, cc)| cc.norm() * r.norm().powi(k as i32)).fold(0.0, f64::max);
                    prop_assert!(p.eval(*r).norm() <= 1e-9 * scale.max(1.0));
                }
            }
        }
    }
}

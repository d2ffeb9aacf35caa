use std::fmt;

use num_complex::Complex64;

use super::polynomial::{root_scale, Polynomial};
use crate::error::{Error, Result};

/// Relative distance at which a zero and a pole are cancelled by [`RationalFunction::reduced`].
pub const CANCEL_TOL: f64 = 1e-8;

/// Radius, relative to the function's root scale, of the neighbourhood of
/// the origin inside which split root clusters are cancelled.
pub const CLUSTER_CANCEL_TOL: f64 = 1e-6;

/// Relative distance at which two poles are treated as the same pole when
/// forming common denominators or partial fractions.
pub const POLE_MERGE_TOL: f64 = 1e-10;

/// Relative |Im Ω| below which a pole counts as lying on the real axis.
pub const REAL_AXIS_TOL: f64 = 1e-12;

/// Relative size below which leading coefficients of a summed numerator are
/// dropped as cancellation noise.
pub const TRIM_TOL: f64 = 1e-11;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Rational function of the angular frequency Ω, stored as
/// `gain · Π(Ω − zeros) / Π(Ω − poles)`.
///
/// Products, quotients and conjugate reflections act on the root lists
/// directly and are exact; sums re-root the combined numerator only.
/// Common factors are kept until [`reduced`](Self::reduced) is called.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    gain: Complex64,
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
}

/// Principal part at one (possibly repeated) pole: `coeffs[j] / (Ω − pole)^(j+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    /// Polynomial part (nonzero only for improper functions).
    pub polynomial: Polynomial,
    pub terms: Vec<PoleTerm>,
}

impl RationalFunction {
    pub fn new(num: &Polynomial, den: &Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        let zeros = if num.degree() > 0 { num.roots_flat()? } else { Vec::new() };
        let poles = if den.degree() > 0 { den.roots_flat()? } else { Vec::new() };
        Ok(Self {
            gain: num.leading() / den.leading(),
            zeros,
            poles,
        })
    }

    pub fn from_zpk(gain: Complex64, zeros: Vec<Complex64>, poles: Vec<Complex64>) -> Self {
        if gain == ZERO {
            return Self::zero();
        }
        Self { gain, zeros, poles }
    }

    pub fn zero() -> Self {
        Self {
            gain: ZERO,
            zeros: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_zpk(c, Vec::new(), Vec::new())
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    /// The identity function Ω.
    pub fn omega() -> Self {
        Self::from_zpk(ONE, vec![ZERO], Vec::new())
    }

    /// Polynomial as a rational function with unit denominator.
    pub fn from_polynomial(p: &Polynomial) -> Result<Self> {
        Self::new(p, &Polynomial::constant(ONE))
    }

    pub fn gain(&self) -> Complex64 {
        self.gain
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn is_zero(&self) -> bool {
        self.gain == ZERO
    }

    pub fn num(&self) -> Polynomial {
        if self.is_zero() {
            return Polynomial::zero();
        }
        Polynomial::from_roots(&self.zeros, self.gain)
    }

    /// Monic denominator.
    pub fn den(&self) -> Polynomial {
        Polynomial::from_roots(&self.poles, ONE)
    }

    /// `deg den − deg num`; `i64::MAX` for the zero function.
    pub fn relative_degree(&self) -> i64 {
        if self.is_zero() {
            return i64::MAX;
        }
        self.poles.len() as i64 - self.zeros.len() as i64
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    /// Ω·f(Ω) → 0 as |Ω| → ∞.
    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() >= 1
    }

    /// All poles strictly in the lower half-plane.
    pub fn is_causal(&self) -> bool {
        let scale = self.scale();
        self.poles
            .iter()
            .all(|p| p.im < -REAL_AXIS_TOL * p.norm().max(scale))
    }

    /// Characteristic frequency of the function (mean root modulus).
    pub fn scale(&self) -> f64 {
        let all: Vec<Complex64> = self.zeros.iter().chain(&self.poles).copied().collect();
        root_scale(&all)
    }

    pub fn eval(&self, omega: Complex64) -> Complex64 {
        if self.is_zero() {
            return ZERO;
        }
        let mut v = self.gain;
        for z in &self.zeros {
            v *= omega - z;
        }
        for p in &self.poles {
            v /= omega - p;
        }
        v
    }

    pub fn eval_real(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(omega, 0.0))
    }

    pub fn scale_by(&self, c: Complex64) -> Self {
        Self::from_zpk(self.gain * c, self.zeros.clone(), self.poles.clone())
    }

    pub fn neg(&self) -> Self {
        self.scale_by(-ONE)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut zeros = self.zeros.clone();
        zeros.extend_from_slice(&other.zeros);
        let mut poles = self.poles.clone();
        poles.extend_from_slice(&other.poles);
        Self::from_zpk(self.gain * other.gain, zeros, poles)
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::from_zpk(
            ONE / self.gain,
            self.poles.clone(),
            self.zeros.clone(),
        ))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    /// Para-conjugate f*(Ω) = conj(f(conj Ω)); equals the complex conjugate
    /// of f on the real axis.
    pub fn para_conj(&self) -> Self {
        Self::from_zpk(
            self.gain.conj(),
            self.zeros.iter().map(|z| z.conj()).collect(),
            self.poles.iter().map(|p| p.conj()).collect(),
        )
    }

    /// f(−Ω).
    pub fn reflect(&self) -> Self {
        let sign = if (self.zeros.len() + self.poles.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        Self::from_zpk(
            self.gain * sign,
            self.zeros.iter().map(|z| -z).collect(),
            self.poles.iter().map(|p| -p).collect(),
        )
    }

    /// |f|² on the real axis, as f·f*.
    pub fn abs_sqr(&self) -> Self {
        self.mul(&self.para_conj())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        combine(&[self, other])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        combine(&[self, &other.neg()])
    }

    pub fn add_const(&self, c: Complex64) -> Result<Self> {
        self.add(&Self::constant(c))
    }

    /// Cancel zero/pole pairs closer than `tol` (relative), nearest pairs first.
    pub fn reduced_with(&self, tol: f64) -> Self {
        self.reduced_with_floor(tol, 0.0)
    }

    /// As [`reduced_with`](Self::reduced_with), and also cancels any zero
    /// and pole that both lie within `floor` of the origin. A double root
    /// there, recovered from coefficients, splits by about √ε times the
    /// scale and never meets the relative test.
    pub fn reduced_with_floor(&self, tol: f64, floor: f64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let scale = self.scale();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, z) in self.zeros.iter().enumerate() {
            for (j, p) in self.poles.iter().enumerate() {
                let d = (z - p).norm();
                let near_origin = z.norm() <= floor && p.norm() <= floor;
                if d <= tol * z.norm().max(p.norm()).max(1e-6 * scale) || near_origin {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut zero_used = vec![false; self.zeros.len()];
        let mut pole_used = vec![false; self.poles.len()];
        for (_, i, j) in pairs {
            if !zero_used[i] && !pole_used[j] {
                zero_used[i] = true;
                pole_used[j] = true;
            }
        }
        Self {
            gain: self.gain,
            zeros: keep_unused(&self.zeros, &zero_used),
            poles: keep_unused(&self.poles, &pole_used),
        }
    }

    pub fn reduced(&self) -> Self {
        self.reduced_with(CANCEL_TOL)
    }

    /// Partial-fraction expansion of the reduced function.
    pub fn partial_fractions(&self) -> PartialFractions {
        let f = self.reduced();
        if f.is_zero() {
            return PartialFractions {
                polynomial: Polynomial::zero(),
                terms: Vec::new(),
            };
        }
        let groups = group_poles(&f.poles, POLE_MERGE_TOL);
        let mut terms = Vec::with_capacity(groups.len());
        for (g, (pole, members)) in groups.iter().enumerate() {
            let m = members.len();
            // Taylor series of (Ω − p)^m f(Ω) around p, up to order m − 1
            let mut series = vec![ZERO; m];
            series[0] = f.gain;
            for z in &f.zeros {
                series = mul_series(&series, &[pole - z, ONE]);
            }
            for (h, (other, others)) in groups.iter().enumerate() {
                if h == g {
                    continue;
                }
                let d = pole - other;
                let inv: Vec<Complex64> = (0..m)
                    .map(|k| {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sign / d.powi(k as i32 + 1)
                    })
                    .collect();
                for _ in 0..others.len() {
                    series = mul_series(&series, &inv);
                }
            }
            let coeffs = (1..=m).map(|j| series[m - j]).collect();
            terms.push(PoleTerm {
                pole: *pole,
                coeffs,
            });
        }
        let polynomial = if f.zeros.len() >= f.poles.len() {
            f.num().div_rem(&f.den()).0
        } else {
            Polynomial::zero()
        };
        PartialFractions { polynomial, terms }
    }

    /// Sum of principal parts whose poles satisfy `keep`, plus an optional
    /// constant.
    fn select_terms(&self, keep: impl Fn(Complex64) -> bool, with_constant: bool) -> Result<Self> {
        let pf = self.partial_fractions();
        let scale = self.scale();
        for t in &pf.terms {
            if t.pole.im.abs() <= REAL_AXIS_TOL * t.pole.norm().max(scale) {
                return Err(Error::MarginalPole(t.pole));
            }
        }
        let terms: Vec<PoleTerm> = pf.terms.into_iter().filter(|t| keep(t.pole)).collect();
        let constant = if with_constant {
            pf.polynomial.coeffs().first().copied().unwrap_or(ZERO)
        } else {
            ZERO
        };
        from_partial_fractions(&terms, constant)
    }

    /// Causal part: principal parts at lower-half-plane poles plus the
    /// constant term of the polynomial part.
    pub fn causal_part(&self) -> Result<Self> {
        self.select_terms(|p| p.im < 0.0, true)
    }

    /// Principal parts at upper-half-plane poles.
    pub fn anticausal_part(&self) -> Result<Self> {
        self.select_terms(|p| p.im > 0.0, false)
    }

    /// Value at Ω → ∞ times Ω^k where k = −relative degree (the leading
    /// asymptotic coefficient).
    pub fn leading_coefficient(&self) -> Complex64 {
        self.gain
    }
}

fn keep_unused(values: &[Complex64], used: &[bool]) -> Vec<Complex64> {
    values
        .iter()
        .zip(used)
        .filter(|(_, u)| !**u)
        .map(|(v, _)| *v)
        .collect()
}

fn mul_series(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut out = vec![ZERO; n];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            if i + j < n {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// Group poles that coincide within `tol`; returns (representative, members).
fn group_poles(poles: &[Complex64], tol: f64) -> Vec<(Complex64, Vec<Complex64>)> {
    let scale = root_scale(poles);
    let mut groups: Vec<(Complex64, Vec<Complex64>)> = Vec::new();
    for &p in poles {
        let hit = groups.iter_mut().find(|(rep, _)| {
            (p - *rep).norm() <= tol * p.norm().max(rep.norm()).max(1e-6 * scale)
        });
        match hit {
            Some((_, members)) => members.push(p),
            None => groups.push((p, vec![p])),
        }
    }
    for (rep, members) in groups.iter_mut() {
        *rep = members.iter().sum::<Complex64>() / members.len() as f64;
    }
    groups
}

/// Build `constant + Σ coeffs[j]/(Ω − pole)^(j+1)` in factored form.
pub fn from_partial_fractions(terms: &[PoleTerm], constant: Complex64) -> Result<RationalFunction> {
    let mut poles: Vec<Complex64> = Vec::new();
    for t in terms {
        poles.extend(std::iter::repeat_n(t.pole, t.coeffs.len()));
    }
    let den = Polynomial::from_roots(&poles, ONE);
    let mut num = den.scale(constant);
    for (k, t) in terms.iter().enumerate() {
        let m = t.coeffs.len();
        let others: Vec<Complex64> = terms
            .iter()
            .enumerate()
            .filter(|(h, _)| *h != k)
            .flat_map(|(_, o)| std::iter::repeat_n(o.pole, o.coeffs.len()))
            .collect();
        for (j, &c) in t.coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            // den / (Ω − p)^(j+1) = others · (Ω − p)^(m − j − 1)
            let mut roots = others.clone();
            roots.extend(std::iter::repeat_n(t.pole, m - j - 1));
            num = num.add(&Polynomial::from_roots(&roots, c));
        }
    }
    finish_sum(num, poles)
}

fn finish_sum(num: Polynomial, poles: Vec<Complex64>) -> Result<RationalFunction> {
    let scale = root_scale(&poles);
    let num = num.trimmed(TRIM_TOL, scale);
    if num.is_zero() {
        return Ok(RationalFunction::zero());
    }
    let zeros = if num.degree() > 0 {
        num.roots_flat()?
    } else {
        Vec::new()
    };
    Ok(RationalFunction {
        gain: num.leading(),
        zeros,
        poles,
    }
    .reduced())
}

/// Sum of rational functions over the least common multiple of their pole
/// sets. The result is reduced.
pub fn combine(parts: &[&RationalFunction]) -> Result<RationalFunction> {
    let live: Vec<&RationalFunction> = parts.iter().copied().filter(|f| !f.is_zero()).collect();
    if live.is_empty() {
        return Ok(RationalFunction::zero());
    }
    if live.len() == 1 {
        return Ok(live[0].clone());
    }
    let all: Vec<Complex64> = live.iter().flat_map(|f| f.poles.iter().copied()).collect();
    let scale = root_scale(&all);
    let same = |a: Complex64, b: Complex64| {
        (a - b).norm() <= POLE_MERGE_TOL * a.norm().max(b.norm()).max(1e-6 * scale)
    };
    // common denominator, multiplicity = max over parts
    let mut lcm: Vec<Complex64> = Vec::new();
    let mut matched_sets: Vec<Vec<bool>> = Vec::with_capacity(live.len());
    for f in &live {
        let mut used = vec![false; lcm.len()];
        for &p in &f.poles {
            let slot = (0..lcm.len())
                .filter(|&k| !used[k] && same(lcm[k], p))
                .min_by(|&a, &b| (lcm[a] - p).norm().total_cmp(&(lcm[b] - p).norm()));
            match slot {
                Some(k) => used[k] = true,
                None => {
                    lcm.push(p);
                    used.push(true);
                }
            }
        }
        matched_sets.push(used);
    }
    let mut num = Polynomial::zero();
    for (f, used) in live.iter().zip(&matched_sets) {
        let mut roots = f.zeros.clone();
        for (k, &p) in lcm.iter().enumerate() {
            if k >= used.len() || !used[k] {
                roots.push(p);
            }
        }
        num = num.add(&Polynomial::from_roots(&roots, f.gain));
    }
    finish_sum(num, lcm)
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gain)?;
        for z in &self.zeros {
            write!(f, "·(Ω − {z})")?;
        }
        if !self.poles.is_empty() {
            write!(f, " / [")?;
            for p in &self.poles {
                write!(f, "(Ω − {p})")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

//! Spectral densities: validation, causal factorization and integration.

use num_complex::Complex64;

use super::rational::{RationalFunction, REAL_AXIS_TOL};
use crate::error::{Error, Result};

/// Relative tolerance for the real/nonnegative/even checks on the sample grid.
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Relative tolerance for |φ_+|² = S on the post-check grid.
pub const FACTOR_TOL: f64 = 1e-8;

/// Real-axis roots closer than this (relative) are grouped when counting
/// multiplicities during factorization.
const REAL_GROUP_TOL: f64 = 1e-6;

/// Which half of the frequency axis the spectrum is normalized on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    /// Power is counted on Ω ≥ 0 only; white noise of level S has
    /// autocorrelation (S/2)·δ(t).
    #[default]
    Single,
}

/// A rational function that is real, nonnegative and even on the real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    rat: RationalFunction,
    sidedness: Sidedness,
}

impl SpectralDensity {
    /// Validate `rat` as an auto-spectrum on a log-spaced sample grid.
    pub fn new(rat: RationalFunction) -> Result<Self> {
        let scale = rat.scale();
        let grid = sample_grid(scale, 241);
        let peak = grid
            .iter()
            .map(|&w| rat.eval_real(w).norm())
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        for &w in &grid {
            let v = rat.eval_real(w);
            let vm = rat.eval_real(-w);
            if !(v.is_finite() && vm.is_finite()) {
                continue;
            }
            let mag = v.norm().max(SPECTRUM_TOL * peak);
            if v.im.abs() > SPECTRUM_TOL * mag.max(f64::MIN_POSITIVE) {
                return Err(Error::NotAutoSpectrum { omega: w });
            }
            if (v - vm).norm() > SPECTRUM_TOL * mag.max(vm.norm()) {
                return Err(Error::NotAutoSpectrum { omega: w });
            }
            if v.re < -SPECTRUM_TOL * peak {
                return Err(Error::NegativeSpectrum {
                    omega: w,
                    value: v.re,
                });
            }
        }
        Ok(Self {
            rat,
            sidedness: Sidedness::Single,
        })
    }

    pub fn white(level: f64) -> Result<Self> {
        Self::new(RationalFunction::real(level))
    }

    pub fn rat(&self) -> &RationalFunction {
        &self.rat
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn eval(&self, omega: f64) -> f64 {
        self.rat.eval_real(omega).re
    }
}

/// Symmetric log-spaced grid (plus zero) spanning six decades around `scale`.
pub fn sample_grid(scale: f64, n_per_side: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    for k in 0..n_per_side {
        let e = -3.0 + 6.0 * k as f64 / (n_per_side - 1).max(1) as f64;
        let w = scale * 10f64.powf(e) * (1.0 + 1e-3 * ((k * 7919) % 97) as f64);
        grid.push(w);
        grid.push(-w);
    }
    grid
}

fn is_real_axis(z: Complex64, scale: f64) -> bool {
    z.im.abs() <= REAL_AXIS_TOL * z.norm().max(scale)
}

/// Split a root list into (lower-half, upper-half, real-axis groups) and
/// return the roots assigned to the causal factor.
fn causal_roots(roots: &[Complex64], kind: &'static str, scale: f64) -> Result<Vec<Complex64>> {
    let mut lower = Vec::new();
    let mut upper = 0usize;
    let mut real: Vec<Complex64> = Vec::new();
    for &z in roots {
        if is_real_axis(z, scale) {
            real.push(Complex64::new(z.re, 0.0));
        } else if z.im < 0.0 {
            lower.push(z);
        } else {
            upper += 1;
        }
    }
    if lower.len() != upper {
        return Err(Error::NonFactorizable(format!(
            "{} {kind}s below the real axis but {upper} above",
            lower.len()
        )));
    }
    real.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut i = 0;
    while i < real.len() {
        let mut j = i + 1;
        while j < real.len()
            && (real[j].re - real[i].re).abs() <= REAL_GROUP_TOL * real[i].norm().max(scale)
        {
            j += 1;
        }
        let count = j - i;
        if count % 2 == 1 {
            return Err(Error::MarginalSpectrum {
                kind,
                location: real[i],
            });
        }
        let mean = real[i..j].iter().sum::<Complex64>() / count as f64;
        lower.extend(std::iter::repeat_n(mean, count / 2));
        i = j;
    }
    Ok(lower)
}

/// Causal spectral factor: φ_+ with zeros and poles in the closed lower
/// half-plane and φ_+·φ_+* = S on the real axis. The gain is real and
/// positive.
pub fn spectral_factorize(s: &SpectralDensity) -> Result<RationalFunction> {
    let r = s.rat.reduced();
    if r.is_zero() {
        return Err(Error::NonFactorizable("spectrum is identically zero".into()));
    }
    let g = r.gain();
    let scale = r.scale();
    if g.re <= 0.0 || g.im.abs() > SPECTRUM_TOL * g.norm() {
        return Err(Error::NonFactorizable(format!(
            "asymptotic gain {g} is not real and positive"
        )));
    }
    let zeros = causal_roots(r.zeros(), "zero", scale)?;
    let poles = causal_roots(r.poles(), "pole", scale)?;
    let phi = RationalFunction::from_zpk(Complex64::new(g.re.sqrt(), 0.0), zeros, poles);

    for &w in &sample_grid(scale, 500) {
        let target = s.eval(w);
        let got = phi.eval_real(w).norm_sqr();
        if !target.is_finite() {
            continue;
        }
        if (got - target).abs() > FACTOR_TOL * target.abs().max(f64::MIN_POSITIVE) {
            // zeros on the real axis make the relative check meaningless there
            if target.abs() > 1e-300 {
                return Err(Error::NonFactorizable(format!(
                    "|φ_+|² = {got:.12e} but S = {target:.12e} at Ω = {w:.6e}"
                )));
            }
        }
    }
    Ok(phi)
}

/// ∫_{−∞}^{∞} r(Ω) dΩ/2π by residues at the upper-half-plane poles.
pub fn integrate_full_line(r: &RationalFunction) -> Result<Complex64> {
    let f = r.reduced();
    if f.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rel = f.relative_degree();
    if rel < 2 {
        return Err(Error::Divergent { power: -rel });
    }
    let scale = f.scale();
    let pf = f.partial_fractions();
    let mut sum = Complex64::new(0.0, 0.0);
    for t in &pf.terms {
        if is_real_axis(t.pole, scale) {
            return Err(Error::MarginalPole(t.pole));
        }
        if t.pole.im > 0.0 {
            sum += t.coeffs[0];
        }
    }
    Ok(Complex64::i() * sum)
}

/// ∫₀^∞ S(Ω) dΩ/2π for an even spectrum, by residue summation.
pub fn integrate_spectrum(s: &SpectralDensity) -> Result<f64> {
    Ok(0.5 * integrate_full_line(&s.rat)?.re)
}

/// ∫₀^∞ S(Ω) dΩ/2π by double-exponential quadrature, split at the pole
/// frequencies and mapped onto a finite interval for the tail.
pub fn integrate_spectrum_quadrature(s: &SpectralDensity) -> Result<f64> {
    let f = s.rat.reduced();
    if f.is_zero() {
        return Ok(0.0);
    }
    let rel = f.relative_degree();
    if rel < 2 {
        return Err(Error::Divergent { power: -rel });
    }
    let scale = f.scale();
    let mut breaks = vec![0.0];
    for p in f.poles() {
        if is_real_axis(*p, scale) {
            return Err(Error::MarginalPole(*p));
        }
        let (c, w) = (p.re.abs(), p.im.abs());
        for k in [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0] {
            let b = c + k * w;
            if b > 0.0 {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(b.abs()));

    let g = |w: f64| f.eval_real(w).re;
    let peak = breaks
        .windows(2)
        .map(|ab| g(0.5 * (ab[0] + ab[1])).abs() * (ab[1] - ab[0]))
        .chain(breaks.iter().map(|&b| g(b).abs() * scale))
        .fold(0.0f64, f64::max);
    let tol = 1e-14 * peak.max(f64::MIN_POSITIVE);

    let mut total = 0.0;
    for ab in breaks.windows(2) {
        total += quadrature::integrate(g, ab[0], ab[1], tol).integral;
    }
    let last = *breaks.last().unwrap();
    let tail_scale = last.max(scale);
    let tail = |t: f64| {
        let u = 1.0 - t;
        g(last + tail_scale * t / u) * tail_scale / (u * u)
    };
    total += quadrature::integrate(tail, 0.0, 1.0, tol).integral;
    Ok(total / (2.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfun::Polynomial;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spectrum(num: &[f64], den: &[f64]) -> SpectralDensity {
        let r = RationalFunction::new(&Polynomial::from_real(num), &Polynomial::from_real(den))
            .unwrap();
        SpectralDensity::new(r).unwrap()
    }

    #[test]
    fn white_factor_is_square_root() {
        let phi = spectral_factorize(&SpectralDensity::white(4.0).unwrap()).unwrap();
        assert!((phi.eval_real(0.3) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quartic_factor() {
        // Ω⁴ + 1 → Ω² + i√2 Ω − 1
        let phi = spectral_factorize(&spectrum(&[1.0, 0.0, 0.0, 0.0, 1.0], &[1.0])).unwrap();
        let expected = Polynomial::new(vec![c(-1.0, 0.0), c(0.0, 2f64.sqrt()), c(1.0, 0.0)]);
        for w in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let z = c(w, 0.0);
            assert!((phi.eval(z) - expected.eval(z)).norm() < 1e-12);
        }
        assert!(phi.zeros().iter().all(|z| z.im < 0.0));
    }

    #[test]
    fn negative_spectrum_rejected() {
        let r = RationalFunction::new(
            &Polynomial::from_real(&[-1.0, 0.0, 1.0]),
            &Polynomial::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            SpectralDensity::new(r),
            Err(Error::NegativeSpectrum { .. })
        ));
    }

    #[test]
    fn odd_spectrum_rejected() {
        let r = RationalFunction::new(
            &Polynomial::from_real(&[0.0, 1.0]),
            &Polynomial::from_real(&[1.0, 0.0, 1.0]),
        )
        .unwrap();
        assert!(SpectralDensity::new(r).is_err());
    }

    #[test]
    fn double_real_zero_is_split() {
        // Ω²/(Ω² + 1)
        let phi = spectral_factorize(&spectrum(&[0.0, 0.0, 1.0], &[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(phi.zeros().len(), 1);
        assert!((phi.eval_real(2.0).norm_sqr() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn textbook_integrals() {
        let lorentz = spectrum(&[1.0], &[1.0, 0.0, 1.0]);
        assert!((integrate_spectrum(&lorentz).unwrap() - 0.25).abs() < 1e-14);
        let a = 2.5;
        let scaled = spectrum(&[1.0], &[a * a, 0.0, 1.0]);
        assert!((integrate_spectrum(&scaled).unwrap() - 1.0 / (4.0 * a)).abs() < 1e-14);
        let band = spectrum(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 0.0, 1.0]);
        let expected = 2f64.sqrt() / 8.0;
        assert!((integrate_spectrum(&band).unwrap() - expected).abs() < 1e-14);
        assert!((integrate_spectrum_quadrature(&band).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn slow_tail_diverges() {
        let s = spectrum(&[1.0, 0.0, 1.0], &[1.0, 0.0, 2.0]);
        assert_eq!(integrate_spectrum(&s), Err(Error::Divergent { power: 0 }));
    }

    #[test]
    fn narrow_resonance_matches_quadrature() {
        // 1/|(Ω − 1 + iγ)(Ω + 1 + iγ)|²
        let gamma = 1e-3;
        let p = [c(1.0, -gamma), c(-1.0, -gamma)];
        let r = RationalFunction::from_zpk(c(1.0, 0.0), vec![], p.to_vec()).abs_sqr();
        let s = SpectralDensity::new(r).unwrap();
        let exact = 1.0 / (8.0 * gamma * (1.0 + gamma * gamma));
        let res = integrate_spectrum(&s).unwrap();
        let quad = integrate_spectrum_quadrature(&s).unwrap();
        assert!((res - exact).abs() < 1e-10 * exact);
        assert!((quad - exact).abs() < 1e-7 * exact);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn stable_roots(max: usize) -> impl Strategy<Value = Vec<Complex64>> {
            proptest::collection::vec((-3.0f64..3.0, 0.05f64..3.0), 1..=max)
                .prop_map(|v| v.into_iter().map(|(re, im)| c(re, -im)).collect())
        }

        /// |p|²/|q|² with real-coefficient p, q (roots mirrored in Ω → −conj Ω).
        fn even_spectrum(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> SpectralDensity {
            let mirror = |v: &[Complex64]| -> Vec<Complex64> {
                v.iter().flat_map(|z| [*z, -z.conj()]).collect()
            };
            let f = RationalFunction::from_zpk(c(gain, 0.0), mirror(&zeros), mirror(&poles));
            SpectralDensity::new(f.abs_sqr()).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn factorization_round_trip(z in stable_roots(2), p in stable_roots(3), g in 0.1f64..10.0) {
                let s = even_spectrum(z, p, g);
                let phi = spectral_factorize(&s).unwrap();
                prop_assert!(phi.is_causal());
                prop_assert!(phi.zeros().iter().all(|z| z.im < 0.0));
                for k in 0..1000 {
                    let w = -50.0 + 0.1 * k as f64 + 0.0123;
                    let target = s.eval(w);
                    let got = phi.eval_real(w).norm_sqr();
                    prop_assert!((got - target).abs() <= 1e-8 * target);
                }
            }

            #[test]
            fn residue_matches_quadrature(z in stable_roots(1), p in stable_roots(3), g in 0.1f64..10.0) {
                prop_assume!(p.len() > z.len());
                let s = even_spectrum(z, p, g);
                let res = integrate_spectrum(&s).unwrap();
                let quad = integrate_spectrum_quadrature(&s).unwrap();
                prop_assert!((res - quad).abs() <= 1e-7 * res.abs(), "{res} vs {quad}");
            }
        }
    }
}

//! Exhaustive search over first-order feedback kernels
//! C = c_0(Ω − ik_1)/(Ω − ik_2).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::closed_loop::closed_loop_system;
use super::riccati::max_real_eigenvalue;
use crate::control::{IntegralRoute, MarkovianController};
use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::plant::SystemModel;
use crate::ratfun::RationalFunction;

/// Grid of (c_0, k_1, k_2). `c0` is searched on a log scale, `k1` and
/// `k2` linearly; `k1 = None` pins the kernel zero at Ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerFamily {
    pub c0: (f64, f64),
    pub k1: Option<(f64, f64)>,
    pub k2: (f64, f64),
    pub points: usize,
}

impl ControllerFamily {
    /// c_0 within a factor 2 and k_1, k_2 within ±50% of the closed form.
    pub fn around(ctrl: &MarkovianController, points: usize) -> Self {
        let span = |v: f64| 0.5 * v.abs().max(0.1 * ctrl.poles[0].norm());
        let (k1, k2) = (ctrl.c1.im, ctrl.c2.im);
        let c0 = ctrl.c0;
        Self {
            c0: (0.5 * c0, 2.0 * c0),
            k1: Some((k1 - span(k1), k1 + span(k1))),
            k2: (k2 - span(k2), (k2 + span(k2)).min(-1e-6 * span(k2))),
            points,
        }
    }

    /// Same ranges with the kernel zero fixed at Ω = 0.
    pub fn without_zero(self) -> Self {
        Self { k1: None, ..self }
    }

    pub fn kernel(&self, v: &[f64]) -> RationalFunction {
        let (c0, k1, k2) = self.unpack(v);
        RationalFunction::from_zpk(
            Complex64::new(c0, 0.0),
            vec![Complex64::new(0.0, k1)],
            vec![Complex64::new(0.0, k2)],
        )
    }

    fn unpack(&self, v: &[f64]) -> (f64, f64, f64) {
        let sign = self.c0.0.signum();
        let c0 = sign * v[0].exp();
        match self.k1 {
            Some(_) => (c0, v[1], v[2]),
            None => (c0, 0.0, v[1]),
        }
    }

    fn axes(&self) -> Vec<Vec<f64>> {
        let n = self.points.max(2);
        let lin = |(lo, hi): (f64, f64)| -> Vec<f64> {
            (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
        };
        let mut axes = vec![lin((self.c0.0.abs().ln(), self.c0.1.abs().ln()))];
        if let Some(k1) = self.k1 {
            axes.push(lin(k1));
        }
        axes.push(lin(self.k2));
        axes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub u: f64,
    pub c0: f64,
    pub k1: f64,
    pub k2: f64,
    pub grid_u: f64,
    pub grid_point: (f64, f64, f64),
    pub evaluated: usize,
    pub stable: usize,
}

/// Controlled purity of every stable grid kernel via the integral route,
/// followed by simplex refinement from the best point.
pub fn brute_force_controller_search(model: &SystemModel, family: &ControllerFamily) -> Result<SearchResult> {
    if !(family.c0.0 != 0.0 && family.c0.0.signum() == family.c0.1.signum()) {
        return Err(Error::InvalidParameter("c_0 range must not contain zero".into()));
    }
    let route = IntegralRoute::new(model)?;
    let purity = |v: &[f64]| -> Option<f64> {
        let c = family.kernel(v);
        let sys = closed_loop_system(model, &c).ok()?;
        if max_real_eigenvalue(&sys.m) >= -1e-9 {
            return None;
        }
        route.for_kernel(&c).ok().map(|s| s.purity()).filter(|u| u.is_finite())
    };

    let axes = family.axes();
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let values: Vec<Option<f64>> = points.par_iter().map(|p| purity(p)).collect();
    let stable = values.iter().filter(|v| v.is_some()).count();
    let (best, grid_u) = points
        .iter()
        .zip(&values)
        .filter_map(|(p, v)| v.map(|u| (p, u)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::EmptyStableSet)?;

    let step: Vec<f64> = axes.iter().map(|a| 0.5 * (a[1] - a[0])).collect();
    let refined = nelder_mead(
        |v| purity(v).unwrap_or(f64::INFINITY),
        best,
        &step,
        1e-13,
        3000,
    );
    let (x, u) = if refined.value < grid_u {
        (refined.x, refined.value)
    } else {
        (best.clone(), grid_u)
    };
    let (c0, k1, k2) = family.unpack(&x);
    Ok(SearchResult {
        u,
        c0,
        k1,
        k2,
        grid_u,
        grid_point: family.unpack(best),
        evaluated: points.len(),
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{synthesize_markovian, u_ctrl_closed};
    use crate::plant::{ab_params, purity_mu, MarkovianNoise, Oscillator};

    fn fixture() -> SystemModel {
        SystemModel::new(
            Oscillator::new(1.0, 0.0).unwrap(),
            MarkovianNoise::new(1.0, 1.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn search_recovers_closed_form() {
        let m = fixture();
        let (_, ctrl) = synthesize_markovian(&m).unwrap();
        let r = brute_force_controller_search(&m, &ControllerFamily::around(&ctrl, 11)).unwrap();
        let u = 0.5 * u_ctrl_closed(&ab_params(&m).unwrap(), purity_mu(&m.noise).unwrap());
        assert!(r.u >= u - 1e-6, "{} < {u}", r.u);
        assert!(r.u - u < 1e-8, "{} vs {u}", r.u);
        assert!((r.c0 - ctrl.c0).abs() < 1e-3 * ctrl.c0.abs());
        assert!((r.k1 - ctrl.c1.im).abs() < 1e-3);
        assert!((r.k2 - ctrl.c2.im).abs() < 1e-3);
    }

    #[test]
    fn zero_at_origin_is_penalized() {
        let m = fixture();
        let (s, ctrl) = synthesize_markovian(&m).unwrap();
        let fam = ControllerFamily::around(&ctrl, 11).without_zero();
        let r = brute_force_controller_search(&m, &fam).unwrap();
        assert!(r.u > s.controlled.purity() + 1e-4, "{}", r.u);
    }

    #[test]
    fn unstable_family_is_empty() {
        let m = fixture();
        let fam = ControllerFamily {
            c0: (-50.0, -20.0),
            k1: Some((0.0, 0.1)),
            k2: (0.1, 1.0),
            points: 3,
        };
        assert_eq!(brute_force_controller_search(&m, &fam), Err(Error::EmptyStableSet));
    }
}

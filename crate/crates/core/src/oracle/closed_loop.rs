//! Closed loop of oscillator and feedback kernel in the time domain.
//!
//! State (x, p, z) with z the controller state. The controller output
//! u = c·z + d·y acts as the force −u, and y = x + Z.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::realization::realize;
use super::riccati::{eigenvalues, lyapunov, max_real_eigenvalue};
use crate::conditioning::GaussianState;
use crate::error::{Error, Result};
use crate::plant::SystemModel;
use crate::ratfun::RationalFunction;

/// Linear SDE dX = M X dt + G dW with E[dW dWᵀ] = W dt.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub m: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl AugmentedSystem {
    /// Closed-loop poles in the Ω plane.
    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.m)
            .into_iter()
            .map(|l| Complex64::i() * l)
            .collect()
    }

    pub fn diffusion(&self) -> DMatrix<f64> {
        &self.g * &self.w * self.g.transpose()
    }
}

pub fn closed_loop_system(model: &SystemModel, c_kernel: &RationalFunction) -> Result<AugmentedSystem> {
    let ss = realize(c_kernel)?;
    let k = ss.order();
    let n = 2 + k;
    let (w, g) = (model.osc.omega_p, model.osc.gamma_p);
    let mut m = DMatrix::<f64>::zeros(n, n);
    m[(0, 1)] = 1.0;
    m[(1, 0)] = -(w * w + g * g) - ss.d;
    m[(1, 1)] = -2.0 * g;
    for j in 0..k {
        m[(1, 2 + j)] = -ss.c[j];
        m[(2 + j, 0)] = ss.b[j];
        for l in 0..k {
            m[(2 + j, 2 + l)] = ss.a[(j, l)];
        }
    }
    // noise columns (F, Z)
    let mut gm = DMatrix::<f64>::zeros(n, 2);
    gm[(1, 0)] = 1.0;
    gm[(1, 1)] = -ss.d;
    for j in 0..k {
        gm[(2 + j, 1)] = ss.b[j];
    }
    let nz = &model.noise;
    let wm = DMatrix::from_row_slice(2, 2, &[nz.s_ff, nz.s_zf, nz.s_zf, nz.s_zz]) * 0.5;
    Ok(AugmentedSystem { m, g: gm, w: wm })
}

/// Steady-state oscillator covariance of the closed loop from the
/// Lyapunov equation.
pub fn lyapunov_variance(sys: &AugmentedSystem) -> Result<GaussianState> {
    let x = lyapunov(&sys.m, &sys.diffusion())?;
    Ok(GaussianState {
        v_xx: x[(0, 0)],
        v_pp: x[(1, 1)],
        v_xp: 0.5 * (x[(0, 1)] + x[(1, 0)]),
    })
}

/// Controlled covariance for kernel C through the Lyapunov equation.
pub fn closed_loop_covariance(model: &SystemModel, c_kernel: &RationalFunction) -> Result<GaussianState> {
    lyapunov_variance(&closed_loop_system(model, c_kernel)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_total: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub burn_in: f64,
}

impl SimulationConfig {
    /// dt = 1e-3/max|pole|, 50 decay times of the slowest pole, half burn-in.
    pub fn for_system(sys: &AugmentedSystem, n_traj: usize, seed: u64) -> Result<Self> {
        let poles = sys.poles();
        let fastest = poles.iter().map(|p| p.norm()).fold(0.0f64, f64::max);
        let slowest = poles.iter().map(|p| -p.im).fold(f64::INFINITY, f64::min);
        if !(slowest > 0.0) {
            return Err(Error::Unstable {
                max_real: max_real_eigenvalue(&sys.m),
            });
        }
        let cfg = Self {
            dt: 1e-3 / fastest,
            t_total: 50.0 / slowest,
            n_traj,
            seed,
            burn_in: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_total > self.dt) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt < t_total (dt = {}, t_total = {})",
                self.dt, self.t_total
            )));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidParameter(format!("burn-in {} must lie in [0, 1)", self.burn_in)));
        }
        if self.n_traj < 1 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }
}

/// Ensemble estimate of (V_xx, V_pp, V_xp) with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalState {
    pub mean: [f64; 3],
    pub std_err: [f64; 3],
    pub n_traj: usize,
}

impl EmpiricalState {
    /// Largest |estimate − reference| in units of the standard error.
    pub fn max_z(&self, reference: &GaussianState) -> f64 {
        let r = [reference.v_xx, reference.v_pp, reference.v_xp];
        (0..3)
            .map(|i| (self.mean[i] - r[i]).abs() / self.std_err[i].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: [f64; 3],
    m2: [f64; 3],
}

impl Moments {
    fn single(v: [f64; 3]) -> Self {
        Self {
            n: 1.0,
            mean: v,
            m2: [0.0; 3],
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let mut out = Self {
            n,
            ..Default::default()
        };
        for i in 0..3 {
            let d = b.mean[i] - a.mean[i];
            out.mean[i] = a.mean[i] + d * b.n / n;
            out.m2[i] = a.m2[i] + b.m2[i] + d * d * a.n * b.n / n;
        }
        out
    }
}

/// One trajectory. Each step consumes `pairing` draws per noise channel and
/// uses their sum, so a run at dt with pairing 2 sees the same Brownian path
/// as a run at dt/2 with pairing 1.
fn run_trajectory(
    sys: &AugmentedSystem,
    noise: &DMatrix<f64>,
    cfg: &SimulationConfig,
    index: u64,
    pairing: usize,
) -> Result<[f64; 3]> {
    let n = sys.m.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let steps = cfg.steps();
    let start = (cfg.burn_in * steps as f64).ceil() as usize;
    let sq = (cfg.dt / pairing as f64).sqrt();
    let m: Vec<f64> = (0..n * n).map(|k| sys.m[(k / n, k % n)]).collect();
    let b: Vec<[f64; 2]> = (0..n).map(|i| [noise[(i, 0)], noise[(i, 1)]]).collect();
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut acc = [0.0f64; 3];
    let mut count = 0usize;
    for step in 0..steps {
        let (mut e0, mut e1) = (0.0, 0.0);
        for _ in 0..pairing {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            e0 += a * sq;
            e1 += b * sq;
        }
        for i in 0..n {
            let row = &m[i * n..(i + 1) * n];
            let drift: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
            next[i] = x[i] + drift * cfg.dt + b[i][0] * e0 + b[i][1] * e1;
        }
        std::mem::swap(&mut x, &mut next);
        if step + 1 >= start {
            acc[0] += x[0] * x[0];
            acc[1] += x[1] * x[1];
            acc[2] += x[0] * x[1];
            count += 1;
        }
        if step % 4096 == 0 && !(x[0].is_finite() && x[1].is_finite() && x[0].abs() < 1e150) {
            return Err(Error::SimulationDiverged {
                time: step as f64 * cfg.dt,
                poles: sys.poles(),
            });
        }
    }
    let c = count.max(1) as f64;
    Ok([acc[0] / c, acc[1] / c, acc[2] / c])
}

/// Euler–Maruyama ensemble of the closed loop. Trajectories start at rest,
/// discard the burn-in fraction and contribute one time average each.
pub fn simulate(sys: &AugmentedSystem, cfg: &SimulationConfig) -> Result<EmpiricalState> {
    simulate_paired(sys, cfg, 1)
}

fn simulate_paired(sys: &AugmentedSystem, cfg: &SimulationConfig, pairing: usize) -> Result<EmpiricalState> {
    cfg.validate()?;
    let worst = max_real_eigenvalue(&sys.m);
    if worst >= 0.0 {
        return Err(Error::Unstable { max_real: worst });
    }
    let chol = sys
        .w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidNoise("noise intensity matrix is not positive definite".into()))?;
    let noise = &sys.g * chol.l();
    let per_traj = (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|k| run_trajectory(sys, &noise, cfg, k, pairing))
        .collect::<Result<Vec<_>>>()?;
    // merged in trajectory order so the result does not depend on scheduling
    let moments = per_traj
        .into_iter()
        .map(Moments::single)
        .fold(Moments::default(), Moments::merge);
    let n = moments.n;
    let std_err = moments.m2.map(|m2| {
        let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
        (var / n).sqrt()
    });
    Ok(EmpiricalState {
        mean: moments.mean,
        std_err,
        n_traj: cfg.n_traj,
    })
}

pub fn simulate_closed_loop(
    model: &SystemModel,
    c_kernel: &RationalFunction,
    cfg: &SimulationConfig,
) -> Result<EmpiricalState> {
    simulate(&closed_loop_system(model, c_kernel)?, cfg)
}

/// Ensembles at dt and dt/2 driven by the same Brownian paths, so their
/// difference isolates the discretization error.
pub fn simulate_with_halved_step(
    sys: &AugmentedSystem,
    cfg: &SimulationConfig,
) -> Result<(EmpiricalState, EmpiricalState)> {
    let fine = SimulationConfig {
        dt: cfg.dt / 2.0,
        ..*cfg
    };
    Ok((simulate_paired(sys, cfg, 2)?, simulate_paired(sys, &fine, 1)?))
}

/// Oscillator-only realization, for open-loop checks.
pub fn open_loop_system(model: &SystemModel) -> Result<AugmentedSystem> {
    closed_loop_system(model, &RationalFunction::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::synthesize_markovian;
    use crate::plant::{MarkovianNoise, Oscillator};

    fn fixture() -> SystemModel {
        SystemModel::new(
            Oscillator::new(1.0, 0.0).unwrap(),
            MarkovianNoise::new(1.0, 1.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn damped_oscillator_lyapunov() {
        let (w, g, s) = (1.3, 0.2, 0.7);
        let m = SystemModel::new(
            Oscillator::new(w, g).unwrap(),
            MarkovianNoise::new(1.0 / s + 1.0, s, 0.0).unwrap(),
        )
        .unwrap();
        let v = lyapunov_variance(&open_loop_system(&m).unwrap()).unwrap();
        assert!((v.v_xx - s / (8.0 * g * (w * w + g * g))).abs() < 1e-12);
        assert!((v.v_pp - s / (8.0 * g)).abs() < 1e-12);
        assert!(v.v_xp.abs() < 1e-12);
    }

    #[test]
    fn optimal_loop_matches_closed_form() {
        let m = fixture();
        let (s, ctrl) = synthesize_markovian(&m).unwrap();
        let sys = closed_loop_system(&m, &s.c_kernel).unwrap();
        let v = lyapunov_variance(&sys).unwrap();
        assert!(v.max_rel_diff(&s.controlled) < 1e-8, "{v:?}");
        let poles = sys.poles();
        for p in ctrl.poles {
            assert!(poles.iter().any(|q| (q - p).norm() < 1e-8));
        }
    }

    #[test]
    fn unstable_kernel_rejected_before_running() {
        let m = fixture();
        let c = RationalFunction::from_zpk(Complex64::new(0.0, 1.0), vec![], vec![Complex64::new(0.0, 0.5)]);
        let cfg = SimulationConfig {
            dt: 1e-3,
            t_total: 1.0,
            n_traj: 1,
            seed: 1,
            burn_in: 0.5,
        };
        assert!(matches!(simulate_closed_loop(&m, &c, &cfg), Err(Error::Unstable { .. })));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let m = fixture();
        let (s, _) = synthesize_markovian(&m).unwrap();
        let sys = closed_loop_system(&m, &s.c_kernel).unwrap();
        let cfg = SimulationConfig {
            dt: 1e-2,
            t_total: 20.0,
            n_traj: 16,
            seed: 9,
            burn_in: 0.5,
        };
        let a = simulate(&sys, &cfg).unwrap();
        let b = simulate(&sys, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&sys, &SimulationConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn halved_step_shares_paths() {
        let m = fixture();
        let (s, _) = synthesize_markovian(&m).unwrap();
        let sys = closed_loop_system(&m, &s.c_kernel).unwrap();
        let cfg = SimulationConfig {
            dt: 1e-2,
            t_total: 40.0,
            n_traj: 32,
            seed: 5,
            burn_in: 0.5,
        };
        let (coarse, fine) = simulate_with_halved_step(&sys, &cfg).unwrap();
        for i in 0..2 {
            assert!((coarse.mean[i] - fine.mean[i]).abs() < 0.5 * coarse.std_err[i], "{coarse:?} {fine:?}");
        }
    }

    #[test]
    fn short_ensemble_is_near_lyapunov() {
        let m = fixture();
        let (s, _) = synthesize_markovian(&m).unwrap();
        let sys = closed_loop_system(&m, &s.c_kernel).unwrap();
        let cfg = SimulationConfig {
            dt: 5e-3,
            t_total: 100.0,
            n_traj: 64,
            seed: 3,
            burn_in: 0.2,
        };
        let e = simulate(&sys, &cfg).unwrap();
        assert!(e.max_z(&s.controlled) < 5.0, "{e:?}");
    }
}

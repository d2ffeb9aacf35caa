//! Cross-checks of every route to the conditional and controlled states on
//! a fixture set, with optional Monte-Carlo closure.

use num_complex::Complex64;
use serde_json::Value;

use qfc_core::conditioning::{conditional_covariance_general, conditional_covariance_markovian};
use qfc_core::control::{
    controlled_covariance, first_order_coefficients, metrics, synthesize_frequency, synthesize_markovian,
    u_ctrl_closed, IntegralRoute,
};
use qfc_core::oracle::{closed_loop_covariance, closed_loop_system, simulate_with_halved_step, SimulationConfig};
use qfc_core::plant::{ab_params, purity_mu, MarkovianNoise, Oscillator, SystemModel};

use crate::config::{FixtureSpec, LoadedConfig, SimulationSpec};
use crate::error::CliError;
use crate::output::{Report, Table};

pub const STATE_TOL: f64 = 1e-8;
pub const INTEGRAL_TOL: f64 = 1e-6;
pub const COEFFICIENT_TOL: f64 = 1e-8;
pub const EXPECTED_TOL: f64 = 1e-9;
pub const MC_Z_TOL: f64 = 3.0;
/// Step-halving change allowed, in standard errors.
pub const HALVING_TOL: f64 = 1.0;

pub fn builtin_fixtures() -> Vec<FixtureSpec> {
    let f = |name: &str, omega_p: f64, s_zz: f64, s_ff: f64, s_zf: f64, u: f64| FixtureSpec {
        name: name.into(),
        omega_p,
        gamma_p: 0.0,
        s_zz,
        s_ff,
        s_zf,
        n_eff: Some(u - 0.5),
        u_ctrl: Some(u),
    };
    vec![
        f("symmetric", 1.0, 1.0, 1.0, 0.0, 0.748_302_881_332_744_6),
        f("correlated", 1.0, 1.0, 2.0, 0.5, 0.957_106_781_186_547_7),
        f("free-mass", 0.0, 1.0, 2.0, 0.3, 1.444_726_049_591_664_7),
        f("stiff", 2.0, 0.5, 10.0, -0.4, 1.794_555_702_253_763),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub fixture: String,
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.residual <= self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn model(f: &FixtureSpec) -> Result<SystemModel, qfc_core::Error> {
    SystemModel::new(
        Oscillator::new(f.omega_p, f.gamma_p)?,
        MarkovianNoise::new(f.s_zz, f.s_ff, f.s_zf)?,
    )
}

fn fast_checks(f: &FixtureSpec) -> Result<Vec<(&'static str, f64, f64)>, qfc_core::Error> {
    let m = model(f)?;
    let mu = purity_mu(&m.noise)?;
    let ab = ab_params(&m)?;
    let closed = conditional_covariance_markovian(&ab, mu)?;
    let care = conditional_covariance_general(&m)?;
    let (synth, ctrl) = synthesize_markovian(&m)?;
    let u = 0.5 * u_ctrl_closed(&ab, mu);
    let (_, u_care) = controlled_covariance(&care);
    let freq = synthesize_frequency(&m)?;
    let u_int = IntegralRoute::new(&m)?.for_loop_transfer(&freq.k_ctrl)?.purity();
    let lyap = closed_loop_covariance(&m, &synth.c_kernel)?;
    let (c0, c1, c2) = first_order_coefficients(&freq.c_kernel)?;
    let mut out = vec![
        ("conditional state: closed form vs Riccati", closed.max_rel_diff(&care), STATE_TOL),
        ("conditional purity U_c = mu/2", rel(closed.purity(), 0.5 * mu), STATE_TOL),
        ("U_ctrl: closed form vs Riccati", rel(u_care, u), STATE_TOL),
        ("U_ctrl: integral route", rel(u_int, u), INTEGRAL_TOL),
        ("controlled state: Lyapunov of closed loop", lyap.max_rel_diff(&synth.controlled), STATE_TOL),
        (
            "controller coefficients: frequency synthesis",
            crel(c0, Complex64::new(ctrl.c0, 0.0)).max(crel(c1, ctrl.c1)).max(crel(c2, ctrl.c2)),
            COEFFICIENT_TOL,
        ),
    ];
    // metrics() rejects states that break the bound identity or N_eff ≥ η²/2
    let bound = match metrics(&ab, mu, &synth.controlled) {
        Ok(_) => 0.0,
        Err(_) => f64::INFINITY,
    };
    out.push(("bound identity and N_eff >= eta2/2", bound, 0.0));
    if let Some(e) = f.u_ctrl {
        out.push(("expected U_ctrl", rel(u, e), EXPECTED_TOL));
    }
    if let Some(e) = f.n_eff {
        out.push(("expected N_eff", rel(synth.controlled.n_eff(), e), EXPECTED_TOL));
    }
    Ok(out)
}

fn monte_carlo_checks(
    f: &FixtureSpec,
    sim: &SimulationSpec,
    seed: u64,
) -> Result<Vec<(&'static str, f64, f64)>, qfc_core::Error> {
    let m = model(f)?;
    let (synth, _) = synthesize_markovian(&m)?;
    let sys = closed_loop_system(&m, &synth.c_kernel)?;
    let mut cfg = SimulationConfig::for_system(&sys, sim.n_traj, seed)?;
    if let Some(dt) = sim.dt {
        cfg.dt = dt;
    }
    if let Some(t) = sim.t_total {
        cfg.t_total = t;
    }
    cfg.validate()?;
    let (coarse, fine) = simulate_with_halved_step(&sys, &cfg)?;
    let halving = (0..3)
        .map(|i| (coarse.mean[i] - fine.mean[i]).abs() / fine.std_err[i].max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(vec![
        ("Monte Carlo vs controlled state (|z|)", fine.max_z(&synth.controlled), MC_Z_TOL),
        ("Monte Carlo at dt vs controlled state (|z|)", coarse.max_z(&synth.controlled), MC_Z_TOL),
        ("Monte Carlo dt halving (SE)", halving, HALVING_TOL),
    ])
}

/// Runs the checks and returns the report plus the failing checks.
pub fn run_verify(cfg: &LoadedConfig, seed: u64, full: bool) -> Result<(Report, Vec<Check>), CliError> {
    let fixtures: Vec<FixtureSpec> = builtin_fixtures().into_iter().chain(cfg.config.fixture.clone()).collect();
    let sim = cfg.config.simulation;
    if full && sim.n_traj < 2 {
        return Err(CliError::Config("simulation.n_traj must be at least 2".into()));
    }
    let mut checks = Vec::new();
    for (k, f) in fixtures.iter().enumerate() {
        let mut push = |name: &'static str, residual: f64, tolerance: f64, error: Option<String>| {
            checks.push(Check {
                fixture: f.name.clone(),
                name,
                residual,
                tolerance,
                error,
            })
        };
        match fast_checks(f) {
            Ok(list) => list.into_iter().for_each(|(n, r, t)| push(n, r, t, None)),
            Err(e) => {
                push("model construction and synthesis", f64::NAN, 0.0, Some(e.to_string()));
                continue;
            }
        }
        if full && (k == 0 || sim.all_fixtures) {
            match monte_carlo_checks(f, &sim, seed) {
                Ok(list) => list.into_iter().for_each(|(n, r, t)| push(n, r, t, None)),
                Err(e) => push("Monte Carlo run", f64::NAN, 0.0, Some(e.to_string())),
            }
        }
    }

    let mut r = Report::new(if full { "verify-full" } else { "verify-fast" }, cfg.hash(), seed);
    r.field("fixtures", fixtures.len() as u64).field("checks", checks.len() as u64);
    let mut names: Vec<&'static str> = Vec::new();
    for c in &checks {
        if !names.contains(&c.name) {
            names.push(c.name);
        }
    }
    for n in names {
        let worst = checks
            .iter()
            .filter(|c| c.name == n && c.error.is_none())
            .map(|c| c.residual)
            .fold(0.0, f64::max);
        r.field(&format!("worst: {n}"), worst);
    }
    let failed: Vec<Check> = checks.iter().filter(|c| !c.passed()).cloned().collect();
    r.field("failed", failed.len() as u64);
    r.tables.push(Table {
        name: "checks".into(),
        columns: ["fixture", "check", "residual", "tolerance", "status", "error"]
            .map(String::from)
            .to_vec(),
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    Value::from(c.fixture.clone()),
                    Value::from(c.name),
                    Value::from(c.residual),
                    Value::from(c.tolerance),
                    Value::from(if c.passed() { "PASS" } else { "FAIL" }),
                    Value::from(c.error.clone().unwrap_or_default()),
                ]
            })
            .collect(),
    });
    Ok((r, failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_fixtures_pass() {
        let (_, failed) = run_verify(&LoadedConfig::empty(), 1, false).unwrap();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn wrong_expectation_is_named() {
        let cfg = LoadedConfig::parse(
            "[[fixture]]\nname = \"bad\"\nomega_p = 1.0\ns_zz = 1.0\ns_ff = 1.0\nn_eff = 0.3\n",
        )
        .unwrap();
        let (_, failed) = run_verify(&cfg, 1, false).unwrap();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].fixture, "bad");
        assert_eq!(failed[0].name, "expected N_eff");
    }

    #[test]
    fn unphysical_fixture_fails() {
        let cfg = LoadedConfig::parse(
            "[[fixture]]\nname = \"sub-heisenberg\"\nomega_p = 1.0\ns_zz = 0.1\ns_ff = 0.1\n",
        )
        .unwrap();
        let (_, failed) = run_verify(&cfg, 1, false).unwrap();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "model construction and synthesis");
        assert!(failed[0].error.as_deref().unwrap().contains("Heisenberg"), "{failed:?}");
    }
}

//! analyze, sweep, optimize and fig2.

use rayon::prelude::*;
use serde_json::Value;

use qfc_core::colddamp::{self, fig2_left_sweep, log_grid, n_opt, optimal_strength, FIG2_LEFT_THETAS, LOG10_X_RANGE};
use qfc_core::control::{analyze, Analysis};
use qfc_core::optics::{
    fig2_right_sweep, minimize_occupation, ClassicalBudget, SearchSpace, FIG2_RIGHT_LOSS,
};

use crate::config::{AxisSpec, LoadedConfig, Space, System};
use crate::error::CliError;
use crate::output::{complex, Report, Table};

/// η² < 1 beats the free-mass standard quantum limit.
pub fn sql_beaten(eta2: f64) -> bool {
    eta2 < 1.0
}

fn describe_system(r: &mut Report, system: &System) {
    match system {
        System::Markovian(_) => {
            r.field("system", "markovian");
        }
        System::Readout(cfg, _) => {
            r.field("system", "readout")
                .field("omega_q", cfg.omega_q)
                .field("phi", cfg.phi)
                .field("squeeze_db", cfg.squeeze_db)
                .field("squeeze_angle", cfg.squeeze_angle)
                .field("loss", cfg.loss)
                .field("zeta_x", cfg.zeta_x)
                .field("zeta_f", cfg.zeta_f);
        }
        System::Thermal { theta, strength, .. } => {
            r.field("system", "cold-damping")
                .field("theta", *theta)
                .field("strength", *strength);
        }
    }
    let m = system.model();
    r.field("omega_p", m.osc.omega_p)
        .field("gamma_p", m.osc.gamma_p)
        .field("s_zz", m.noise.s_zz)
        .field("s_ff", m.noise.s_ff)
        .field("s_zf", m.noise.s_zf);
}

fn describe_analysis(r: &mut Report, a: &Analysis) {
    let c = &a.controller;
    r.field("mu", a.mu)
        .field("a", a.ab.a)
        .field("b", a.ab.b)
        .field("a_over_b", a.ab.ratio())
        .field("v_c_xx", a.conditional.v_xx)
        .field("v_c_pp", a.conditional.v_pp)
        .field("v_c_xp", a.conditional.v_xp)
        .field("v_ctrl_xx", a.controlled.v_xx)
        .field("v_ctrl_pp", a.controlled.v_pp)
        .field("v_ctrl_xp", a.controlled.v_xp)
        .field("u_c", a.u_c)
        .field("u_ctrl", a.metrics.u_ctrl)
        .field("n_eff", a.metrics.n_eff)
        .field("q_eff", a.metrics.q_eff)
        .field("eta2", a.metrics.eta2)
        .field("omega_star", a.metrics.omega_star)
        .field("entropy", a.metrics.entropy)
        .field("squeeze_class", a.metrics.squeeze_class.label())
        .field("omega_1", complex(c.poles[0]))
        .field("omega_2", complex(c.poles[1]))
        .field("omega_3", complex(c.poles[2]))
        .field("omega_4", complex(c.zero))
        .field("c_0", c.c0)
        .field("c_1", complex(c.c1))
        .field("c_2", complex(c.c2))
        .field("semiclassical_n_eff", a.semiclassical)
        .field("free_mass_sql_beaten", sql_beaten(a.metrics.eta2));
    if !sql_beaten(a.metrics.eta2) {
        r.field("note", "free-mass SQL not beaten");
    }
}

pub fn run_analyze(cfg: &LoadedConfig, seed: u64) -> Result<Report, CliError> {
    let system = cfg.config.system()?;
    let a = analyze(system.model())?;
    let mut r = Report::new("analyze", cfg.hash(), seed);
    describe_system(&mut r, &system);
    describe_analysis(&mut r, &a);
    Ok(r)
}

fn axis_values(a: &AxisSpec) -> Result<Vec<f64>, CliError> {
    if a.points == 0 {
        return Err(CliError::Config(format!("sweep axis {} has no points", a.parameter)));
    }
    if !(a.from.is_finite() && a.to.is_finite()) {
        return Err(CliError::Config(format!("sweep axis {} has a non-finite bound", a.parameter)));
    }
    if a.log {
        if !(a.from > 0.0 && a.to > 0.0) {
            return Err(CliError::Config(format!(
                "log sweep axis {} needs positive bounds",
                a.parameter
            )));
        }
        return Ok(log_grid(a.from, a.to, a.points));
    }
    if a.points == 1 {
        return Ok(vec![a.from]);
    }
    Ok((0..a.points)
        .map(|k| a.from + (a.to - a.from) * k as f64 / (a.points - 1) as f64)
        .collect())
}

pub const SWEEP_COLUMNS: [&str; 6] = ["n_eff", "u_ctrl", "q_eff", "eta2", "mu", "a_over_b"];

/// Cartesian grid over the [sweep] axes, evaluated in parallel and
/// reported in row-major order. Points where the model is invalid are
/// kept as NaN rows and counted.
pub fn run_sweep(cfg: &LoadedConfig, seed: u64) -> Result<Report, CliError> {
    let spec = cfg
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section with at least one [[sweep.axis]]".into()))?;
    if spec.axis.is_empty() {
        return Err(CliError::Config("[sweep] has no axes".into()));
    }
    let axes: Vec<Vec<f64>> = spec.axis.iter().map(axis_values).collect::<Result<_, _>>()?;
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
    // A bad parameter path is a configuration error, not a physics one.
    let mut probe = cfg.clone();
    for (a, v) in spec.axis.iter().zip(&points[0]) {
        probe = probe.with_parameter(&a.parameter, *v)?;
    }
    probe.config.system().map(|_| ()).or_else(|e| match e {
        CliError::Config(_) => Err(e),
        _ => Ok(()),
    })?;

    let evaluate = |p: &Vec<f64>| -> Result<Vec<f64>, String> {
        let mut c = cfg.clone();
        for (a, v) in spec.axis.iter().zip(p) {
            c = c.with_parameter(&a.parameter, *v).map_err(|e| e.to_string())?;
        }
        let sys = c.config.system().map_err(|e| e.to_string())?;
        let a = analyze(sys.model()).map_err(|e| e.to_string())?;
        Ok(vec![
            a.metrics.n_eff,
            a.metrics.u_ctrl,
            a.metrics.q_eff,
            a.metrics.eta2,
            a.mu,
            a.ab.ratio(),
        ])
    };
    let results: Vec<Result<Vec<f64>, String>> = points.par_iter().map(evaluate).collect();

    let mut failed = 0usize;
    let mut rows = Vec::with_capacity(points.len());
    for (p, res) in points.iter().zip(results) {
        let values = match res {
            Ok(v) => v,
            Err(e) => {
                failed += 1;
                eprintln!("warning: sweep point {p:?}: {e}");
                vec![f64::NAN; SWEEP_COLUMNS.len()]
            }
        };
        rows.push(p.iter().chain(&values).map(|&x| Value::from(x)).collect());
    }
    let mut r = Report::new("sweep", cfg.hash(), seed);
    r.field("points", points.len() as u64).field("failed_points", failed as u64);
    r.tables.push(Table {
        name: "sweep".into(),
        columns: spec
            .axis
            .iter()
            .map(|a| a.parameter.clone())
            .chain(SWEEP_COLUMNS.iter().map(|s| s.to_string()))
            .collect(),
        rows,
    });
    Ok(r)
}

/// Cold damping: best strength at the configured temperature. Readout:
/// best (Ω_q, φ, λ) for the [optimize] budget.
pub fn run_optimize(cfg: &LoadedConfig, seed: u64) -> Result<Report, CliError> {
    let mut r = Report::new("optimize", cfg.hash(), seed);
    if cfg.config.thermal.is_some() {
        let theta = match cfg.config.system()? {
            System::Thermal { theta, .. } => theta,
            _ => unreachable!("thermal section yields a thermal system"),
        };
        let m = colddamp::minimize(theta)?;
        r.field("system", "cold-damping")
            .field("theta", theta)
            .field("strength", m.x)
            .field("omega_q_over_omega_p", m.omega_q_ratio())
            .field("n_eff", m.n_eff);
        let edge = (m.x.log10() - LOG10_X_RANGE.1).abs() < 1e-3;
        if theta <= 1.0 {
            r.field("n_opt_closed_form", n_opt(theta)?);
            if theta < 1.0 && theta > 0.0 {
                r.field("omega_q_over_omega_p_closed_form", optimal_strength(theta)?);
            }
        } else {
            r.field("note", "above critical temperature: infimum 1/√2 approached at infinite strength");
        }
        r.field("at_search_boundary", edge);
        return Ok(r);
    }
    let spec = cfg.config.optimize.as_ref().ok_or_else(|| {
        CliError::Config("optimize needs a [thermal] section or an [optimize] budget".into())
    })?;
    let budget = match (spec.eta_cl2, spec.zeta_f, spec.zeta_x) {
        (Some(e), None, None) => ClassicalBudget::symmetric(e)?,
        (None, Some(f), Some(x)) => ClassicalBudget::new(f, x)?,
        (None, None, None) => ClassicalBudget::symmetric(0.0)?,
        _ => {
            return Err(CliError::Config(
                "[optimize] takes either eta_cl2 or both zeta_f and zeta_x".into(),
            ))
        }
    };
    let space = match spec.space {
        Space::Full => SearchSpace::Full,
        Space::Phase => SearchSpace::PhaseQuadrature,
    };
    let o = minimize_occupation(&budget, spec.loss, spec.squeeze_db, space)?;
    r.field("system", "readout")
        .field("eta_cl2", budget.eta_cl2())
        .field("loss", spec.loss)
        .field("squeeze_db", spec.squeeze_db)
        .field("omega_q", o.config.omega_q)
        .field("phi", o.config.phi)
        .field("squeeze_angle", o.config.squeeze_angle)
        .field("zeta_x", o.config.zeta_x)
        .field("zeta_f", o.config.zeta_f)
        .field("mu", o.mu)
        .field("n_eff", o.n_eff)
        .field("converged", o.converged);
    Ok(r)
}

pub fn run_fig2_left(cfg: &LoadedConfig, seed: u64, points: usize) -> Result<Report, CliError> {
    let x = log_grid(10f64.powf(LOG10_X_RANGE.0), 10f64.powf(LOG10_X_RANGE.1), points.max(2));
    let sweep = fig2_left_sweep(&FIG2_LEFT_THETAS, &x)?;
    let mut r = Report::new("fig2-left", cfg.hash(), seed);
    for &theta in &FIG2_LEFT_THETAS {
        let m = colddamp::minimize(theta)?;
        r.field(&format!("min_n_eff_theta_{theta}"), m.n_eff);
        r.field(&format!("argmin_strength_theta_{theta}"), m.x);
    }
    let rows = (0..x.len())
        .map(|i| {
            std::iter::once(x[i])
                .chain(sweep.curves.iter().map(|c| c.n_eff[i]))
                .map(Value::from)
                .collect()
        })
        .collect();
    r.tables.push(Table {
        name: "n_eff_vs_strength".into(),
        columns: std::iter::once("strength".to_string())
            .chain(sweep.curves.iter().map(|c| format!("theta_{}", c.theta)))
            .collect(),
        rows,
    });
    Ok(r)
}

pub fn run_fig2_right(cfg: &LoadedConfig, seed: u64, points: usize) -> Result<Report, CliError> {
    let grid = log_grid(1e-2, 1e1, points.max(2));
    let f = fig2_right_sweep(&grid, FIG2_RIGHT_LOSS)?;
    let mut r = Report::new("fig2-right", cfg.hash(), seed);
    r.field("loss", FIG2_RIGHT_LOSS);
    let rows = (0..grid.len())
        .map(|i| {
            let (v, s) = (&f.vacuum[i], &f.squeezed[i]);
            [grid[i], v.n_eff, s.n_eff, v.n_eff / s.n_eff, v.config.omega_q, s.config.omega_q]
                .into_iter()
                .map(Value::from)
                .collect()
        })
        .collect();
    r.tables.push(Table {
        name: "min_n_eff_vs_classical_noise".into(),
        columns: ["eta_cl2", "n_eff_vacuum", "n_eff_squeezed", "ratio", "omega_q_vacuum", "omega_q_squeezed"]
            .map(String::from)
            .to_vec(),
        rows,
    });
    Ok(r)
}

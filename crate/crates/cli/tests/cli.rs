use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn qfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfc"))
        .args(args)
        .env_remove("QFC_WORKERS")
        .output()
        .expect("binary runs")
}

fn sample(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> String {
    let p = dir.path().join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn field(v: &Value, key: &str) -> f64 {
    v["fields"][key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(qfc(&["--help"]).status.code(), Some(0));
    assert_eq!(qfc(&["--version"]).status.code(), Some(0));
    assert_eq!(qfc(&["analyze", "--bogus"]).status.code(), Some(1));
    assert_eq!(qfc(&[]).status.code(), Some(1));
}

#[test]
fn analyze_reference_oscillator() {
    let o = qfc(&["analyze", "--config", &sample("oscillator.toml"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!((field(&v, "u_ctrl") - 0.748_302_881_332_744_6).abs() < 1e-12);
    assert!((field(&v, "n_eff") - 0.248_302_881_332_744_6).abs() < 1e-12);
    assert!((field(&v, "v_ctrl_xx") - 0.629_245_210_436_730_7).abs() < 1e-12);
    assert!((field(&v, "v_ctrl_pp") - 0.889_887_110_657_936_7).abs() < 1e-12);
    assert_eq!(v["fields"]["squeeze_class"], "position-squeezed");
    assert_eq!(v["fields"]["free_mass_sql_beaten"], true);
    let w4 = &v["fields"]["omega_4"];
    assert!((w4[1].as_f64().unwrap() + 2.099_386_836_127_176).abs() < 1e-9);
}

#[test]
fn csv_header_carries_hash_and_seed() {
    let o = qfc(&["analyze", "--config", &sample("oscillator.toml"), "--format", "csv", "--seed", "9"]);
    let text = stdout(&o);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# qfc analyze config_sha256="), "{first}");
    assert!(first.ends_with(" seed=9"), "{first}");
    assert!(text.contains("\nn_eff,2.48302881e-1\n"), "{text}");
}

#[test]
fn si_and_natural_units_agree() {
    let dir = tempfile::tempdir().unwrap();
    let hbar = 1.054_571_817e-34;
    let m = 1e-12;
    let si = write_config(
        &dir,
        &format!(
            "units = \"si\"\n[oscillator]\nomega_p = 2.0\nmass = {m:e}\n[noise]\ns_zz = {:e}\ns_ff = {:e}\ns_zf = {:e}\n",
            1.5 * hbar / m,
            3.0 * hbar * m,
            0.4 * hbar
        ),
    );
    let a = json(&qfc(&["analyze", "--config", &si, "--format", "json"]));
    let natural = dir.path().join("natural.toml");
    std::fs::write(
        &natural,
        "[oscillator]\nomega_p = 2.0\n[noise]\ns_zz = 1.5\ns_ff = 3.0\ns_zf = 0.4\n",
    )
    .unwrap();
    let b = json(&qfc(&["analyze", "--config", natural.to_str().unwrap(), "--format", "json"]));
    for key in ["mu", "n_eff", "u_ctrl", "eta2"] {
        assert!((field(&a, key) - field(&b, key)).abs() < 1e-12 * field(&b, key).abs(), "{key}");
    }
}

#[test]
fn configuration_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = qfc(&["analyze", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let bad = write_config(&dir, "[oscillator\nomega_p = 1");
    assert_eq!(qfc(&["analyze", "--config", &bad]).status.code(), Some(1));

    let two = write_config(
        &dir,
        "[oscillator]\nomega_p = 1.0\n[noise]\ns_zz = 1.0\ns_ff = 1.0\n[thermal]\ntheta = 0.5\nstrength = 1.0\n",
    );
    let o = qfc(&["analyze", "--config", &two]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("exactly one of"), "{}", stderr(&o));

    let unknown = write_config(&dir, "[oscillator]\nomega_p = 1.0\nomega = 2.0\n[noise]\ns_zz = 1.0\ns_ff = 1.0\n");
    assert_eq!(qfc(&["analyze", "--config", &unknown]).status.code(), Some(1));

    assert_eq!(qfc(&["sweep", "--config", &sample("oscillator.toml")]).status.code(), Some(1));
}

#[test]
fn unphysical_noise_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(&dir, "[oscillator]\nomega_p = 1.0\n[noise]\ns_zz = 0.5\ns_ff = 0.5\n");
    let o = qfc(&["analyze", "--config", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Heisenberg"), "{}", stderr(&o));
}

#[test]
fn verify_fast_passes() {
    let o = qfc(&["verify", "fast"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("failed"));
}

#[test]
fn corrupted_fixture_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        &dir,
        "[[fixture]]\nname = \"tampered\"\nomega_p = 1.0\ns_zz = 1.0\ns_ff = 1.0\nn_eff = 0.2483\nu_ctrl = 0.7483028813327446\n",
    );
    let o = qfc(&["verify", "fast", "--config", &c, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("tampered: expected N_eff"), "{}", stderr(&o));
    let text = stdout(&o);
    let failing: Vec<&str> = text.lines().filter(|l| l.contains("FAIL")).collect();
    assert_eq!(failing.len(), 1, "{failing:?}");
}

#[test]
fn verify_full_small_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(&dir, "[simulation]\nn_traj = 200\n");
    let o = qfc(&["verify", "full", "--config", &c, "--format", "json", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let v = json(&o);
    assert!(field(&v, "worst: Monte Carlo vs controlled state (|z|)") < 3.0);
    assert_eq!(field(&v, "failed"), 0.0);
}

#[test]
fn sweep_is_deterministic_across_workers() {
    let c = sample("sweep.toml");
    let a = qfc(&["sweep", "--config", &c, "--format", "csv", "--workers", "1"]);
    let b = qfc(&["sweep", "--config", &c, "--format", "csv", "--workers", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "noise.s_zz,noise.s_zf,n_eff,u_ctrl,q_eff,eta2,mu,a_over_b");
    assert_eq!(rows.len(), 16);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = qfc(&[
        "optimize",
        "--config",
        &sample("cold_damping.toml"),
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let found = field(&v, "n_eff");
    let closed = field(&v, "n_opt_closed_form");
    assert!((found - closed).abs() < 1e-8 * closed);
}

#[test]
fn optimize_readout_budget() {
    let o = qfc(&["optimize", "--config", &sample("readout.toml"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["fields"]["converged"], true);
    assert!(field(&v, "n_eff") > 0.0 && field(&v, "mu") >= 1.0);
}

#[test]
fn fig2_panels() {
    let o = qfc(&["fig2", "right", "--points", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let rows = v["tables"][0]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r[3].as_f64().unwrap() >= 1.0 - 1e-9, "squeezing never hurts: {r:?}");
    }
    let o = qfc(&["fig2", "left", "--points", "5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("strength,theta_0.1,theta_0.5,theta_1,theta_2,theta_10"), "{text}");
    assert!(text.contains("# min_n_eff_theta_0.1 = 2.21898448e-1"), "{text}");
}

//! TOML run configuration.
//!
//! Every physical quantity is either a bare number, read in the document's
//! default unit system, or a table `{ value = .., unit = "si" | "natural" }`.
//! Natural units are ħ = m = 1 with time in seconds when converting from SI,
//! so angular frequencies carry over unchanged.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qfc_core::colddamp::{cold_damping_model, critical_temperature, ThermalEnvironment, HBAR_SI};
use qfc_core::optics::{omega_q_from_power, to_markovian, ReadoutConfig};
use qfc_core::plant::{MarkovianNoise, Oscillator, SystemModel};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    #[default]
    Natural,
    Si,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Plain(f64),
    Tagged { value: f64, unit: UnitSystem },
}

impl Quantity {
    fn resolve(&self, default: UnitSystem) -> (f64, UnitSystem) {
        match *self {
            Quantity::Plain(v) => (v, default),
            Quantity::Tagged { value, unit } => (value, unit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec {
    pub omega_p: Quantity,
    pub gamma_p: Option<Quantity>,
    /// kg; needed to convert SI spectra.
    pub mass: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub s_zz: Quantity,
    pub s_ff: Quantity,
    #[serde(default = "zero")]
    pub s_zf: Quantity,
}

fn zero() -> Quantity {
    Quantity::Plain(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    pub carrier_omega: f64,
    pub circulating_power: f64,
    pub transmissivity: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    pub omega_q: Option<Quantity>,
    pub power: Option<PowerSpec>,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub squeeze_db: f64,
    #[serde(default)]
    pub squeeze_angle: f64,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub zeta_x: f64,
    #[serde(default)]
    pub zeta_f: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub theta: Option<f64>,
    /// Kelvin.
    pub temperature: Option<f64>,
    pub q_p: Option<f64>,
    pub omega_p: Option<Quantity>,
    /// x = Ω_q²/ω_p².
    pub strength: Option<f64>,
    pub omega_q: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Vec<AxisSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    #[default]
    Full,
    Phase,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    pub eta_cl2: Option<f64>,
    pub zeta_f: Option<f64>,
    pub zeta_x: Option<f64>,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub squeeze_db: f64,
    #[serde(default)]
    pub space: Space,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub name: String,
    pub omega_p: f64,
    #[serde(default)]
    pub gamma_p: f64,
    pub s_zz: f64,
    pub s_ff: f64,
    #[serde(default)]
    pub s_zf: f64,
    pub n_eff: Option<f64>,
    pub u_ctrl: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_trajectories")]
    pub n_traj: usize,
    /// Overrides the automatic step of 1e-3 over the fastest pole.
    pub dt: Option<f64>,
    pub t_total: Option<f64>,
    /// Run the ensemble on every fixture instead of the first only.
    #[serde(default)]
    pub all_fixtures: bool,
}

fn default_trajectories() -> usize {
    2000
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            n_traj: default_trajectories(),
            dt: None,
            t_total: None,
            all_fixtures: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: UnitSystem,
    pub oscillator: Option<OscillatorSpec>,
    pub noise: Option<NoiseSpec>,
    pub readout: Option<ReadoutSpec>,
    pub thermal: Option<ThermalSpec>,
    pub sweep: Option<SweepSpec>,
    pub optimize: Option<OptimizeSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub fixture: Vec<FixtureSpec>,
}

/// Parsed document plus the canonical text it hashes to.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub raw: toml::Value,
    pub config: RunConfig,
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_value(raw)
    }

    pub fn from_value(raw: toml::Value) -> Result<Self, CliError> {
        let config = RunConfig::deserialize(raw.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { raw, config })
    }

    pub fn empty() -> Self {
        Self {
            raw: toml::Value::Table(Default::default()),
            config: RunConfig::default(),
        }
    }

    /// SHA-256 of the canonical re-serialization, first 16 hex digits.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(&self.raw).unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with the dotted `path` set to `value`, keeping unit tags.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Self, CliError> {
        let mut raw = self.raw.clone();
        let parts: Vec<&str> = path.split('.').collect();
        set_path(&mut raw, &parts, value).map_err(|part| {
            CliError::Config(format!("sweep parameter {path}: {part} is not a table"))
        })?;
        Self::from_value(raw)
    }
}

fn set_path(node: &mut toml::Value, parts: &[&str], value: f64) -> Result<(), String> {
    let table = node.as_table_mut().ok_or_else(|| parts[0].to_string())?;
    if parts.len() == 1 {
        match table.get_mut(parts[0]) {
            Some(toml::Value::Table(t)) if t.contains_key("value") => {
                t.insert("value".into(), toml::Value::Float(value));
            }
            _ => {
                table.insert(parts[0].to_string(), toml::Value::Float(value));
            }
        }
        return Ok(());
    }
    let child = table
        .entry(parts[0].to_string())
        .or_insert_with(|| toml::Value::Table(Default::default()));
    set_path(child, &parts[1..], value)
}

/// The physical system a configuration describes.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Markovian(SystemModel),
    Readout(ReadoutConfig, SystemModel),
    Thermal { theta: f64, strength: f64, model: SystemModel },
}

impl System {
    pub fn model(&self) -> &SystemModel {
        match self {
            System::Markovian(m) | System::Readout(_, m) => m,
            System::Thermal { model, .. } => model,
        }
    }
}

fn physics(e: qfc_core::Error) -> CliError {
    CliError::Physics(e)
}

impl RunConfig {
    fn oscillator(&self) -> Result<(Oscillator, Option<f64>), CliError> {
        let spec = self
            .oscillator
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [oscillator] section".into()))?;
        let (w, _) = spec.omega_p.resolve(self.units);
        let g = spec.gamma_p.map(|q| q.resolve(self.units).0).unwrap_or(0.0);
        let mass = spec.mass.map(|q| q.resolve(UnitSystem::Si).0);
        Ok((Oscillator::new(w, g).map_err(physics)?, mass))
    }

    pub fn system(&self) -> Result<System, CliError> {
        let present = [self.noise.is_some(), self.readout.is_some(), self.thermal.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if present != 1 {
            return Err(CliError::Config(format!(
                "exactly one of [noise], [readout], [thermal] must be present (found {present})"
            )));
        }
        if let Some(n) = &self.noise {
            let (osc, mass) = self.oscillator()?;
            let (zz, uz) = n.s_zz.resolve(self.units);
            let (ff, uf) = n.s_ff.resolve(self.units);
            let (zf, ux) = n.s_zf.resolve(self.units);
            let si = [uz, uf, ux].contains(&UnitSystem::Si);
            let noise = if si {
                if [uz, uf, ux].iter().any(|u| *u != UnitSystem::Si) {
                    return Err(CliError::Config("noise spectra must share one unit system".into()));
                }
                let m = mass.ok_or_else(|| {
                    CliError::Config("SI noise spectra need oscillator.mass (kg)".into())
                })?;
                MarkovianNoise::new(zz * m / HBAR_SI, ff / (m * HBAR_SI), zf / HBAR_SI)
            } else {
                MarkovianNoise::new(zz, ff, zf)
            }
            .map_err(physics)?;
            return Ok(System::Markovian(SystemModel::new(osc, noise).map_err(physics)?));
        }
        if let Some(r) = &self.readout {
            let omega_q = match (&r.omega_q, &r.power) {
                (Some(q), None) => q.resolve(self.units).0,
                (None, Some(p)) => omega_q_from_power(p.carrier_omega, p.circulating_power, p.transmissivity, p.mass)
                    .map_err(physics)?,
                _ => {
                    return Err(CliError::Config(
                        "[readout] needs exactly one of omega_q or power".into(),
                    ))
                }
            };
            let cfg = ReadoutConfig {
                omega_q,
                phi: r.phi,
                squeeze_db: r.squeeze_db,
                squeeze_angle: r.squeeze_angle,
                loss: r.loss,
                zeta_x: r.zeta_x,
                zeta_f: r.zeta_f,
            };
            let osc = match &self.oscillator {
                Some(_) => self.oscillator()?.0,
                None => Oscillator::free_mass(),
            };
            let model = SystemModel::new(osc, to_markovian(&cfg).map_err(physics)?).map_err(physics)?;
            return Ok(System::Readout(cfg, model));
        }
        let t = self.thermal.as_ref().expect("checked above");
        let (theta, omega_p) = match (t.theta, t.temperature) {
            (Some(theta), None) => (theta, t.omega_p.map(|q| q.resolve(self.units).0)),
            (None, Some(temp)) => {
                let (q_p, w) = match (t.q_p, t.omega_p) {
                    (Some(q), Some(w)) => (q, w.resolve(UnitSystem::Si).0),
                    _ => {
                        return Err(CliError::Config(
                            "[thermal] temperature needs q_p and omega_p".into(),
                        ))
                    }
                };
                let env = ThermalEnvironment::new(temp, q_p, w).map_err(physics)?;
                (critical_temperature(&env).1, Some(w))
            }
            _ => {
                return Err(CliError::Config(
                    "[thermal] needs exactly one of theta or temperature".into(),
                ))
            }
        };
        let strength = match (t.strength, t.omega_q) {
            (Some(x), None) => x,
            (None, Some(q)) => {
                let w = omega_p.ok_or_else(|| {
                    CliError::Config("[thermal] omega_q needs omega_p to form Ω_q²/ω_p²".into())
                })?;
                (q.resolve(self.units).0 / w).powi(2)
            }
            _ => {
                return Err(CliError::Config(
                    "[thermal] needs exactly one of strength or omega_q".into(),
                ))
            }
        };
        let model = cold_damping_model(theta, strength).map_err(physics)?;
        Ok(System::Thermal {
            theta,
            strength,
            model,
        })
    }
}

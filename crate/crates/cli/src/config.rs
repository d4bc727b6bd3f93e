//! Flat TOML run configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qndsim_core::sme::{
    BathRealization, InitialState, OscillatorState, ScheduledJump, SimulationConfig,
};
use qndsim_core::{ModelConfig, Qubit};
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_TRAJECTORIES: usize = 100;
pub const DEFAULT_K_VALUES: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
/// Default sample interval, in units of `1/g`.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.05;

/// Everything a command needs: the simulation plus ensemble settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub config: SimulationConfig,
    pub n_trajectories: usize,
    pub k_values: Vec<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            config: SimulationConfig::default(),
            n_trajectories: DEFAULT_N_TRAJECTORIES,
            k_values: DEFAULT_K_VALUES.to_vec(),
        }
    }
}

/// On-disk form. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(rename = "n_T", skip_serializing_if = "Option::is_none")]
    n_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_bar: Option<f64>,
    /// Fock initial state instead of a thermal one.
    #[serde(skip_serializing_if = "Option::is_none")]
    fock: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubit: Option<Qubit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_schedule: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bath: Option<BathRealization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_values: Option<Vec<f64>>,
}

fn invalid(field: &str, reason: impl Into<String>) -> qndsim_core::Error {
    qndsim_core::Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Parses and validates a configuration document.
///
/// Omitted keys take their defaults: `η = 1`, `ω = 0`, `g = 1`,
/// `n_max = 25`, thermal `n̄ = 3` with the qubit excited, `dt = 10⁻³/g`
/// and `sample_every` giving samples every `0.05/g`.
pub fn parse_config(text: &str) -> Result<RunSettings> {
    let file: FileConfig = toml::from_str(text).context("malformed configuration")?;
    let model_defaults = ModelConfig::default();
    let defaults = SimulationConfig::default();
    let g = file.g.unwrap_or(model_defaults.g);
    let dt = file.dt.unwrap_or(1e-3 / g);
    let sample_every = file
        .sample_every
        .unwrap_or_else(|| ((DEFAULT_SAMPLE_INTERVAL / g / dt).round() as usize).max(1));
    let oscillator = match (file.n_bar, file.fock) {
        (Some(_), Some(_)) => {
            return Err(invalid("fock", "give either n_bar or fock, not both").into())
        }
        (_, Some(n)) => OscillatorState::Fock { n },
        (n_bar, None) => OscillatorState::Thermal {
            n_bar: n_bar.unwrap_or(3.0),
        },
    };
    let seed = match file.seed {
        Some(s) if s < 0 => {
            return Err(invalid("seed", format!("must be non-negative, got {s}")).into())
        }
        Some(s) => s as u64,
        None => defaults.seed,
    };
    let jump_schedule = file
        .jump_schedule
        .unwrap_or_default()
        .iter()
        .map(|s| s.parse::<ScheduledJump>())
        .collect::<qndsim_core::Result<Vec<_>>>()?;
    let config = SimulationConfig {
        model: ModelConfig {
            omega: file.omega.unwrap_or(model_defaults.omega),
            g,
            n_max: file.n_max.unwrap_or(model_defaults.n_max),
        },
        initial: InitialState {
            oscillator,
            qubit: file.qubit.unwrap_or(Qubit::Excited),
        },
        k: file.k.unwrap_or(defaults.k),
        eta: file.eta.unwrap_or(defaults.eta),
        gamma: file.gamma.unwrap_or(defaults.gamma),
        n_t: file.n_t.unwrap_or(defaults.n_t),
        dt,
        t_final: file.t_final.unwrap_or(defaults.t_final),
        sample_every,
        seed,
        jump_schedule,
        bath: file.bath.unwrap_or_default(),
    };
    let settings = RunSettings {
        config,
        n_trajectories: file.n_trajectories.unwrap_or(DEFAULT_N_TRAJECTORIES),
        k_values: file.k_values.unwrap_or_else(|| DEFAULT_K_VALUES.to_vec()),
    };
    settings.validate()?;
    Ok(settings)
}

pub fn parse_config_file(path: &Path) -> Result<RunSettings> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Writes every key explicitly, so the file does not depend on defaults.
pub fn serialize_config(settings: &RunSettings) -> Result<String> {
    let c = &settings.config;
    let (n_bar, fock) = match c.initial.oscillator {
        OscillatorState::Thermal { n_bar } => (Some(n_bar), None),
        OscillatorState::Fock { n } => (None, Some(n)),
    };
    let seed = i64::try_from(c.seed).map_err(|_| invalid("seed", "exceeds 2^63 - 1"))?;
    let file = FileConfig {
        omega: Some(c.model.omega),
        g: Some(c.model.g),
        k: Some(c.k),
        eta: Some(c.eta),
        gamma: Some(c.gamma),
        n_t: Some(c.n_t),
        n_bar,
        fock,
        qubit: Some(c.initial.qubit),
        n_max: Some(c.model.n_max),
        dt: Some(c.dt),
        t_final: Some(c.t_final),
        sample_every: Some(c.sample_every),
        seed: Some(seed),
        jump_schedule: Some(c.jump_schedule.iter().map(ToString::to_string).collect()),
        bath: Some(c.bath),
        n_trajectories: Some(settings.n_trajectories),
        k_values: Some(settings.k_values.clone()),
    };
    Ok(toml::to_string(&file)?)
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.config.seed > i64::MAX as u64 {
            bail!(invalid("seed", "exceeds 2^63 - 1"));
        }
        if self.n_trajectories == 0 {
            bail!(invalid("n_trajectories", "must be at least 1"));
        }
        if self.k_values.is_empty() {
            bail!(invalid("k_values", "must not be empty"));
        }
        if let Some(k) = self.k_values.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            bail!(invalid("k_values", format!("{k} is not positive")));
        }
        Ok(())
    }
}

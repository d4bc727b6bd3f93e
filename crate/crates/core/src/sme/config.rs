use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{fock_state, initial_joint_state, thermal_state, ModelConfig, Qubit};

/// Hard stability bound on `dt · max(k, g, γ(n_T+1))`.
pub const STABILITY_LIMIT: f64 = 1e-2;
/// Above this the configuration is accepted with a warning.
pub const STABILITY_WARN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpDirection {
    Up,
    Down,
}

impl FromStr for JumpDirection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "up" => Ok(JumpDirection::Up),
            "down" => Ok(JumpDirection::Down),
            other => Err(Error::config(
                "jump_schedule",
                format!("unknown direction `{other}`, expected up or down"),
            )),
        }
    }
}

impl fmt::Display for JumpDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JumpDirection::Up => "up",
            JumpDirection::Down => "down",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledJump {
    pub time: f64,
    pub direction: JumpDirection,
}

impl FromStr for ScheduledJump {
    type Err = Error;
    /// Parses `time:direction`, e.g. `25:up`.
    fn from_str(s: &str) -> Result<Self> {
        let (t, d) = s.split_once(':').ok_or_else(|| {
            Error::config(
                "jump_schedule",
                format!("entry `{s}` is not of the form time:direction"),
            )
        })?;
        let time = t
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::config("jump_schedule", format!("bad time in `{s}`")))?;
        Ok(Self {
            time,
            direction: d.parse()?,
        })
    }
}

impl fmt::Display for ScheduledJump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.time, self.direction)
    }
}

/// How the generator realizes the thermal bath when no jumps are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathRealization {
    /// Ensemble-averaged dissipators in the conditioned dynamics.
    #[default]
    Averaged,
    /// Discrete up/down jumps drawn as a Markov process on the true state.
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OscillatorState {
    Thermal { n_bar: f64 },
    Fock { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub oscillator: OscillatorState,
    pub qubit: Qubit,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            oscillator: OscillatorState::Thermal { n_bar: 3.0 },
            qubit: Qubit::Excited,
        }
    }
}

impl InitialState {
    /// Joint state and the truncation leakage of the oscillator part.
    pub fn build(&self, n_max: usize) -> Result<(DensityMatrix, f64)> {
        let (osc, leakage) = match self.oscillator {
            OscillatorState::Thermal { n_bar } => {
                let t = thermal_state(n_bar, n_max)?;
                (t.state, t.leakage)
            }
            OscillatorState::Fock { n } => {
                if n > n_max {
                    return Err(Error::config(
                        "fock",
                        format!("level {n} exceeds n_max {n_max}"),
                    ));
                }
                (fock_state(n, n_max)?, 0.0)
            }
        };
        Ok((initial_joint_state(&osc, self.qubit)?, leakage))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: ModelConfig,
    pub initial: InitialState,
    /// Measurement strength, in units of `g`.
    pub k: f64,
    /// Detection efficiency.
    pub eta: f64,
    /// Bath coupling rate.
    pub gamma: f64,
    /// Bath mean excitation.
    pub n_t: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Integration steps between recorded samples.
    pub sample_every: usize,
    pub seed: u64,
    #[serde(default)]
    pub jump_schedule: Vec<ScheduledJump>,
    #[serde(default)]
    pub bath: BathRealization,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            initial: InitialState::default(),
            k: 0.1,
            eta: 1.0,
            gamma: 0.0,
            n_t: 0.0,
            dt: 1e-3,
            t_final: 50.0,
            sample_every: 50,
            seed: 0,
            jump_schedule: Vec::new(),
            bath: BathRealization::Averaged,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let finite_nonneg = |v: f64, name: &str| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
            Ok(())
        };
        finite_nonneg(self.k, "k")?;
        finite_nonneg(self.gamma, "gamma")?;
        finite_nonneg(self.n_t, "n_T")?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::config(
                "eta",
                format!("must lie in [0, 1], got {}", self.eta),
            ));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::config("t_final", "must be positive"));
        }
        if self.sample_every == 0 {
            return Err(Error::config("sample_every", "must be at least 1"));
        }
        if self.n_steps() == 0 {
            return Err(Error::config("t_final", "shorter than one step"));
        }
        if let OscillatorState::Thermal { n_bar } = self.initial.oscillator {
            finite_nonneg(n_bar, "n_bar")?;
        }
        if let OscillatorState::Fock { n } = self.initial.oscillator {
            if n > self.model.n_max {
                return Err(Error::config("fock", format!("level {n} exceeds n_max")));
            }
        }
        let rate = self.k.max(self.model.g).max(self.gamma * (self.n_t + 1.0));
        let stiffness = self.dt * rate;
        if stiffness > STABILITY_LIMIT * (1.0 + 1e-9) {
            return Err(Error::config(
                "dt",
                format!("dt·max(k, g, γ(n_T+1)) = {stiffness:.3e} exceeds {STABILITY_LIMIT:.0e}"),
            ));
        }
        if stiffness > STABILITY_WARN * (1.0 + 1e-9) {
            log::warn!("dt·max(k, g, γ(n_T+1)) = {stiffness:.3e} is above {STABILITY_WARN:.0e}");
        }
        for jump in &self.jump_schedule {
            if !(0.0..=self.t_final).contains(&jump.time) {
                return Err(Error::config(
                    "jump_schedule",
                    format!("time {} outside [0, {}]", jump.time, self.t_final),
                ));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_every as f64 * self.dt
    }

    /// Number of recorded samples, including `t = 0`.
    pub fn n_samples(&self) -> usize {
        self.n_steps() / self.sample_every + 1
    }

    /// Short stable digest of the full configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Step index at which a scheduled jump fires.
    pub(crate) fn jump_step(&self, jump: &ScheduledJump) -> usize {
        (jump.time / self.dt).round() as usize
    }
}

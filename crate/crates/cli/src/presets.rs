//! Named experiments with fixed parameters.

use anyhow::{bail, Result};
use qndsim_core::sme::{BathRealization, OscillatorState, ScheduledJump, SimulationConfig};

use crate::config::RunSettings;
use crate::manifest::Command;

/// Truncation used by all presets. Conditioned runs at thermal `n̄ = 3`
/// occasionally push more than the leakage limit into `|25, e⟩`.
pub const PRESET_N_MAX: usize = 60;

pub const PRESET_NAMES: [&str; 7] = ["fig1", "fig2a", "fig2c", "fig2e", "fig3", "fig4", "fig5"];

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub command: Command,
    pub settings: RunSettings,
}

fn base(k: f64, t_final: f64) -> SimulationConfig {
    let dt = if k > 1.0 { 1e-4 } else { 1e-3 };
    let mut c = SimulationConfig {
        k,
        dt,
        t_final,
        sample_every: (0.05 / dt).round() as usize,
        ..Default::default()
    };
    c.model.n_max = PRESET_N_MAX;
    c.initial.oscillator = OscillatorState::Thermal { n_bar: 3.0 };
    c
}

fn single(config: SimulationConfig) -> RunSettings {
    RunSettings {
        config,
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let (name, command, settings) = match name {
        "fig1" => ("fig1", Command::Trajectory, single(base(0.1, 50.0))),
        "fig2a" => ("fig2a", Command::Trajectory, single(base(0.1, 100.0))),
        "fig2c" => ("fig2c", Command::Trajectory, single(base(1.0, 50.0))),
        "fig2e" => ("fig2e", Command::Trajectory, single(base(10.0, 50.0))),
        "fig3" => {
            let mut c = base(0.1, 60.0);
            c.sample_every = 100;
            (
                "fig3",
                Command::Sweep,
                RunSettings {
                    config: c,
                    n_trajectories: 200,
                    k_values: vec![0.1, 1.0, 10.0],
                },
            )
        }
        "fig4" => {
            let mut c = base(0.1, 200.0);
            c.gamma = 1e-3;
            c.n_t = 3.0;
            c.jump_schedule = vec![ScheduledJump {
                time: 25.0,
                direction: qndsim_core::sme::JumpDirection::Up,
            }];
            ("fig4", Command::Jumps, single(c))
        }
        "fig5" => {
            let mut c = base(1.0, 200.0);
            c.gamma = 1e-3;
            c.n_t = 3.0;
            c.bath = BathRealization::Sampled;
            ("fig5", Command::Jumps, single(c))
        }
        other => bail!(
            "unknown preset `{other}`; expected one of {}",
            PRESET_NAMES.join(", ")
        ),
    };
    Ok(Preset {
        name,
        command,
        settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.settings.validate().unwrap();
            assert!((p.settings.config.sample_interval() - 0.05).abs() < 1e-12 || name == "fig3");
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(preset("fig6").is_err());
    }
}

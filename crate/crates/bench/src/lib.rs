//! Shared fixtures for the benchmarks.

use qndsim_core::sme::{OscillatorState, SimulationConfig};

/// Thermal run with the qubit excited, sampled every `0.05/g`.
pub fn thermal_run(n_max: usize, n_bar: f64, k: f64, t_final: f64) -> SimulationConfig {
    let mut cfg = SimulationConfig {
        k,
        t_final,
        ..Default::default()
    };
    cfg.model.n_max = n_max;
    cfg.initial.oscillator = OscillatorState::Thermal { n_bar };
    cfg
}

//! Conditioned dynamics under continuous monitoring of `σ_ee`.

mod blocks;
mod config;
mod dense;
pub mod noise;
mod propagator;
mod record;
mod runner;
pub mod superop;

pub use blocks::{Block, BlockState, BLOCK_TOL};
pub use config::{
    BathRealization, InitialState, JumpDirection, OscillatorState, ScheduledJump, SimulationConfig,
    STABILITY_LIMIT, STABILITY_WARN,
};
pub use dense::DenseSystem;
pub use noise::{derive_seed, WienerIncrements};
pub use propagator::{BathTerms, Observables, StepPlan};
pub use record::TrajectoryRecord;
pub use runner::{
    run_filter, run_filter_with, run_generator, run_generator_with, run_unconditional,
    run_unconditional_with, Backend, ConditionalState, RunOptions, Trajectory, LEAKAGE_LIMIT,
    POSITIVITY_LIMIT,
};
pub use superop::{
    apply_jump, dissipator, drift, extract_innovation, info_gain, innovation, record_increment,
    step, synthesize_record,
};

pub(crate) use dense::DensePropagator;
pub(crate) use propagator::Propagator;

//! Trajectory runners: generator, filter and unconditioned evolution.

use crate::algebra::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::JointOperators;

use super::blocks::{BlockPropagator, BlockState};
use super::config::{BathRealization, JumpDirection, SimulationConfig};
use super::dense::{DensePropagator, DenseSystem};
use super::noise::{BathDraws, WienerIncrements};
use super::propagator::{BathTerms, Propagator, StepPlan};
use super::record::TrajectoryRecord;

/// Abort threshold on the orphan population `|n_max, e⟩`.
pub const LEAKAGE_LIMIT: f64 = 1e-3;
/// Abort threshold on the smallest eigenvalue at sample points.
pub const POSITIVITY_LIMIT: f64 = -1e-6;

/// Representation used for the state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    /// Block form when the initial state allows it, dense otherwise.
    #[default]
    Auto,
    Dense,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Keep the state at every sample point.
    pub keep_states: bool,
    /// Keep the per-step record (generator) or innovations (filter).
    pub keep_increments: bool,
    pub backend: Backend,
    /// Overrides the initial state of the configuration.
    pub initial: Option<DensityMatrix>,
    /// Overrides the seeded Wiener increments (generator only).
    pub noise: Option<Vec<f64>>,
}

/// State at one sample point.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionalState {
    Blocks(BlockState),
    Dense(DensityMatrix),
}

impl ConditionalState {
    pub fn to_dense(&self) -> DensityMatrix {
        match self {
            ConditionalState::Blocks(b) => b.to_dense(),
            ConditionalState::Dense(d) => d.clone(),
        }
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        match (self, other) {
            (ConditionalState::Blocks(a), ConditionalState::Blocks(b)) => Ok(a.trace_distance(b)),
            _ => crate::algebra::trace_distance(&self.to_dense(), &other.to_dense()),
        }
    }
}

/// Output of a runner.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    /// States at the sample points, if requested.
    pub states: Vec<ConditionalState>,
    /// Filter innovations per step, if requested.
    pub innovations: Vec<f64>,
}

enum Drive<'a> {
    Generate {
        noise: NoiseSource,
        bath: Option<BathDraws>,
        schedule: Vec<(usize, JumpDirection)>,
    },
    Filter {
        dy: &'a [f64],
    },
    Unconditional,
}

enum NoiseSource {
    Seeded(WienerIncrements),
    Path(Vec<f64>),
}

impl NoiseSource {
    fn increment(&mut self, step: usize) -> Result<f64> {
        match self {
            NoiseSource::Seeded(w) => Ok(w.next_increment()),
            NoiseSource::Path(p) => p.get(step).copied().ok_or_else(|| {
                Error::GridMismatch(format!(
                    "noise path has {} steps, need step {step}",
                    p.len()
                ))
            }),
        }
    }
}

fn check_record_strength(cfg: &SimulationConfig) -> Result<()> {
    if !(cfg.k > 0.0) {
        return Err(Error::config("k", "a measurement record requires k > 0"));
    }
    Ok(())
}

fn initial_state(cfg: &SimulationConfig, opts: &RunOptions) -> Result<DensityMatrix> {
    match &opts.initial {
        Some(rho) => {
            if rho.dim() != cfg.model.joint_dim() {
                return Err(Error::Dimension(format!(
                    "initial state has dimension {}, model needs {}",
                    rho.dim(),
                    cfg.model.joint_dim()
                )));
            }
            Ok(rho.clone())
        }
        None => Ok(cfg.initial.build(cfg.model.n_max)?.0),
    }
}

/// Integrates the conditioned dynamics and synthesizes the record from the
/// true state.
///
/// With a non-empty jump schedule the bath enters only through the
/// scheduled jumps. Otherwise `cfg.bath` selects averaged dissipators or a
/// sampled Markov jump process with probabilities `γ n_T ⟨aa†⟩ dt` (up) and
/// `γ(n_T+1) ⟨a†a⟩ dt` (down) per step.
pub fn run_generator(cfg: &SimulationConfig) -> Result<Trajectory> {
    run_generator_with(cfg, &RunOptions::default())
}

pub fn run_generator_with(cfg: &SimulationConfig, opts: &RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    check_record_strength(cfg)?;
    let (bath, sampled) = if !cfg.jump_schedule.is_empty() || cfg.gamma == 0.0 {
        (BathTerms::Off, false)
    } else {
        match cfg.bath {
            BathRealization::Averaged => (BathTerms::Averaged, false),
            BathRealization::Sampled => (BathTerms::NoJump, true),
        }
    };
    let mut schedule: Vec<(usize, JumpDirection)> = cfg
        .jump_schedule
        .iter()
        .map(|j| (cfg.jump_step(j), j.direction))
        .collect();
    schedule.sort_by_key(|&(s, _)| s);
    let noise = match &opts.noise {
        Some(path) => NoiseSource::Path(path.clone()),
        None => NoiseSource::Seeded(WienerIncrements::new(cfg.seed, cfg.dt)),
    };
    let drive = Drive::Generate {
        noise,
        bath: sampled.then(|| BathDraws::new(cfg.seed)),
        schedule,
    };
    let plan = plan_for(cfg, cfg.eta, bath);
    dispatch(cfg, plan, initial_state(cfg, opts)?, drive, opts)
}

/// Conditions a state estimate on an existing record.
///
/// Uses the per-step record when it is present and matches `cfg.dt`;
/// otherwise each sampled bin is spread evenly over the steps it spans.
/// The filter always includes the averaged bath and never the schedule.
pub fn run_filter(record: &TrajectoryRecord, cfg: &SimulationConfig) -> Result<Trajectory> {
    run_filter_with(record, cfg, &RunOptions::default())
}

pub fn run_filter_with(
    record: &TrajectoryRecord,
    cfg: &SimulationConfig,
    opts: &RunOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_record_strength(cfg)?;
    let dy = per_step_record(record, cfg)?;
    let bath = if cfg.gamma > 0.0 {
        BathTerms::Averaged
    } else {
        BathTerms::Off
    };
    let plan = plan_for(cfg, cfg.eta, bath);
    dispatch(
        cfg,
        plan,
        initial_state(cfg, opts)?,
        Drive::Filter { dy: &dy },
        opts,
    )
}

/// Ensemble-averaged evolution (the stochastic term dropped).
pub fn run_unconditional(cfg: &SimulationConfig) -> Result<Trajectory> {
    run_unconditional_with(cfg, &RunOptions::default())
}

pub fn run_unconditional_with(cfg: &SimulationConfig, opts: &RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    let bath = if cfg.gamma > 0.0 {
        BathTerms::Averaged
    } else {
        BathTerms::Off
    };
    let plan = plan_for(cfg, 0.0, bath);
    dispatch(
        cfg,
        plan,
        initial_state(cfg, opts)?,
        Drive::Unconditional,
        opts,
    )
}

fn plan_for(cfg: &SimulationConfig, eta: f64, bath: BathTerms) -> StepPlan {
    StepPlan {
        dt: cfg.dt,
        k: cfg.k,
        eta,
        gamma: cfg.gamma,
        n_t: cfg.n_t,
        bath,
    }
}

fn per_step_record(record: &TrajectoryRecord, cfg: &SimulationConfig) -> Result<Vec<f64>> {
    let n_steps = cfg.n_steps();
    if let Some(inc) = &record.increments {
        if (record.dt - cfg.dt).abs() <= 1e-12 * cfg.dt && inc.len() >= n_steps {
            return Ok(inc[..n_steps].to_vec());
        }
    }
    if record.len() < 2 {
        return Err(Error::GridMismatch(
            "record has fewer than two samples".into(),
        ));
    }
    let interval = record.times[1] - record.times[0];
    let ratio = interval / cfg.dt;
    let substeps = ratio.round();
    if substeps < 1.0 || (ratio - substeps).abs() > 1e-6 {
        return Err(Error::GridMismatch(format!(
            "record interval {interval} is not a multiple of dt = {}",
            cfg.dt
        )));
    }
    let substeps = substeps as usize;
    let bins_needed = n_steps.div_ceil(substeps);
    if record.len() - 1 < bins_needed {
        return Err(Error::GridMismatch(format!(
            "record covers {} bins, the run needs {bins_needed}",
            record.len() - 1
        )));
    }
    let mut out = Vec::with_capacity(n_steps);
    for bin in &record.dy[1..=bins_needed] {
        let share = bin / substeps as f64;
        out.extend(std::iter::repeat_n(share, substeps));
    }
    out.truncate(n_steps);
    Ok(out)
}

fn dispatch(
    cfg: &SimulationConfig,
    plan: StepPlan,
    rho0: DensityMatrix,
    drive: Drive<'_>,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let ops = JointOperators::new(&cfg.model)?;
    let blocks = match opts.backend {
        Backend::Auto => BlockState::from_dense(&rho0, cfg.model.n_max),
        Backend::Dense => None,
    };
    match blocks {
        Some(state) => {
            let prop = BlockPropagator::new(&cfg.model, &ops, plan);
            integrate(
                &prop,
                state,
                cfg,
                plan,
                drive,
                opts,
                ConditionalState::Blocks,
            )
        }
        None => {
            let prop = DensePropagator::new(DenseSystem::jaynes_cummings(&cfg.model, &ops), plan)?;
            integrate(&prop, rho0, cfg, plan, drive, opts, ConditionalState::Dense)
        }
    }
}

struct Sampler<'a, P: Propagator> {
    prop: &'a P,
    record: TrajectoryRecord,
    states: Vec<ConditionalState>,
    keep_states: bool,
    wrap: fn(P::State) -> ConditionalState,
}

impl<P: Propagator> Sampler<'_, P> {
    fn sample(&mut self, t: f64, dy: f64, state: &P::State) -> Result<()> {
        let obs = self.prop.observe(state);
        let min_eig = self.prop.min_eigenvalue(state);
        if !obs.purity.is_finite() || !obs.sigma_ee.is_finite() {
            return Err(Error::Divergence(format!("non-finite state at t = {t}")));
        }
        if min_eig < POSITIVITY_LIMIT {
            return Err(Error::Positivity {
                time: t,
                min_eigenvalue: min_eig,
            });
        }
        if obs.leakage > LEAKAGE_LIMIT {
            return Err(Error::Leakage {
                time: t,
                population: obs.leakage,
                limit: LEAKAGE_LIMIT,
            });
        }
        let r = &mut self.record;
        r.times.push(t);
        r.dy.push(dy);
        r.sigma_ee.push(obs.sigma_ee);
        r.p_m.push(obs.p_m);
        r.purity.push(obs.purity);
        r.mean_n.push(obs.mean_n);
        r.leakage.push(obs.leakage);
        if self.keep_states {
            self.states.push((self.wrap)(state.clone()));
        }
        Ok(())
    }
}

fn integrate<P: Propagator>(
    prop: &P,
    mut state: P::State,
    cfg: &SimulationConfig,
    plan: StepPlan,
    mut drive: Drive<'_>,
    opts: &RunOptions,
    wrap: fn(P::State) -> ConditionalState,
) -> Result<Trajectory> {
    let n_steps = cfg.n_steps();
    let every = cfg.sample_every;
    let record = TrajectoryRecord::with_capacity(
        cfg.n_samples(),
        cfg.seed,
        cfg.config_hash(),
        cfg.dt,
        every,
    );
    let mut sampler = Sampler {
        prop,
        record,
        states: Vec::new(),
        keep_states: opts.keep_states,
        wrap,
    };
    let mut increments = Vec::new();
    let mut innovations = Vec::new();
    let scale = 1.0 / (8.0 * cfg.k).sqrt();
    let mut next_jump = 0;

    let fire_jumps = |state: &mut P::State,
                      step: usize,
                      next: &mut usize,
                      schedule: &[(usize, JumpDirection)]| {
        while *next < schedule.len() && schedule[*next].0 == step {
            prop.jump(state, schedule[*next].1)?;
            *next += 1;
        }
        Ok::<(), Error>(())
    };

    if let Drive::Generate { schedule, .. } = &drive {
        fire_jumps(&mut state, 0, &mut next_jump, schedule)?;
    }
    sampler.sample(0.0, 0.0, &state)?;
    let mut bin = 0.0;
    for step in 1..=n_steps {
        match &mut drive {
            Drive::Generate {
                noise,
                bath,
                schedule,
            } => {
                let sigma = prop.sigma_ee(&state);
                let dw = noise.increment(step - 1)?;
                let dy = sigma * cfg.dt + dw * scale;
                bin += dy;
                if opts.keep_increments {
                    increments.push(dy);
                }
                prop.advance(&mut state, Some(plan.observed(dw, sigma)))?;
                if let Some(draws) = bath {
                    let u = draws.uniform();
                    let (aad, ada) = prop.jump_moments(&state);
                    let p_up = plan.up_rate() * aad * cfg.dt;
                    let p_down = plan.down_rate() * ada * cfg.dt;
                    if u < p_up {
                        prop.jump(&mut state, JumpDirection::Up)?;
                    } else if u < p_up + p_down {
                        prop.jump(&mut state, JumpDirection::Down)?;
                    }
                }
                fire_jumps(&mut state, step, &mut next_jump, schedule)?;
            }
            Drive::Filter { dy } => {
                let sigma = prop.sigma_ee(&state);
                let d = dy[step - 1];
                bin += d;
                let dw = (d - sigma * cfg.dt) / scale;
                if opts.keep_increments {
                    innovations.push(dw);
                }
                prop.advance(&mut state, Some(plan.observed(dw, sigma)))?;
            }
            Drive::Unconditional => prop.advance(&mut state, None)?,
        }
        if step % every == 0 {
            sampler.sample(step as f64 * cfg.dt, bin, &state)?;
            bin = 0.0;
        }
    }
    let mut record = sampler.record;
    if opts.keep_increments && !increments.is_empty() {
        record.increments = Some(increments);
    }
    Ok(Trajectory {
        record,
        states: sampler.states,
        innovations,
    })
}

//! Command implementations. Each writes its files into the output
//! directory and returns their names.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use qndsim_core::analysis::{
    collapse_metrics, fit_summary, for_each_trajectory, jump_detection, sweep_tau, Collapse,
    EnsembleAccumulator,
};
use qndsim_core::io::{
    fmt_f64, read_json, read_record_csv, read_states_csv, write_ensemble_csv, write_json,
    write_record_csv, write_states_csv, FitSummary, RecordSidecar,
};
use qndsim_core::sme::{
    run_filter_with, run_generator_with, run_unconditional, ConditionalState, RunOptions,
    SimulationConfig, Trajectory,
};
use serde::{Deserialize, Serialize};

use crate::manifest::{Command, FilterInputs, RunPlan};

/// Subspace weight that counts as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 0.95;
/// Time the dominant subspace must hold the threshold, in `1/g`.
pub const COLLAPSE_DWELL: f64 = 1.0;
/// Band and dwell of the jump detection, in units of quanta and `1/g`.
pub const DETECTION_BAND: f64 = 0.5;
pub const DETECTION_DWELL: f64 = 2.0;

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Outputs<'_> {
    fn path(&mut self, name: &str) -> std::path::PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes `<stem>.csv` and its `<stem>.json` sidecar.
    fn record(
        &mut self,
        stem: &str,
        kind: &str,
        cfg: &SimulationConfig,
        traj: &Trajectory,
        started: Instant,
    ) -> Result<()> {
        write_record_csv(&self.path(&format!("{stem}.csv")), &traj.record)?;
        let sidecar = RecordSidecar::new(kind, cfg, &traj.record, started.elapsed().as_secs_f64())?;
        write_json(&self.path(&format!("{stem}.json")), &sidecar)?;
        Ok(())
    }
}

pub fn execute(plan: &RunPlan, out: &Path) -> Result<Vec<String>> {
    plan.settings.validate()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = Outputs {
        dir: out,
        names: Vec::new(),
    };
    match plan.command {
        Command::Trajectory => trajectory(plan, &mut outputs)?,
        Command::Unconditional => unconditional(&plan.settings.config, &mut outputs)?,
        Command::Ensemble => ensemble(
            &plan.settings.config,
            plan.settings.n_trajectories,
            &mut outputs,
        )?,
        Command::Sweep => sweep(plan, &mut outputs)?,
        Command::Jumps => jumps(&plan.settings.config, &mut outputs)?,
        Command::Filter => {
            let inputs = plan.inputs.as_ref().context("filter needs --record")?;
            filter(&plan.settings.config, inputs, &mut outputs)?
        }
    }
    Ok(outputs.names)
}

fn trajectory(plan: &RunPlan, out: &mut Outputs) -> Result<()> {
    let cfg = &plan.settings.config;
    let started = Instant::now();
    let opts = RunOptions {
        keep_states: true,
        ..Default::default()
    };
    let traj = run_generator_with(cfg, &opts)?;
    out.record("trajectory", "generator", cfg, &traj, started)?;
    write_states_csv(&out.path("states.csv"), &traj.record.times, &traj.states)?;
    if plan.preset.as_deref() == Some("fig1") {
        unconditional(cfg, out)?;
    }
    Ok(())
}

fn unconditional(cfg: &SimulationConfig, out: &mut Outputs) -> Result<()> {
    let started = Instant::now();
    let traj = run_unconditional(cfg)?;
    out.record("unconditional", "unconditional", cfg, &traj, started)
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleReport {
    fit: FitSummary,
    collapse_threshold: f64,
    collapse_dwell: f64,
    collapsed: usize,
    /// Number of collapsed trajectories per winning subspace.
    winners: Vec<usize>,
    runtime_seconds: f64,
}

fn ensemble(cfg: &SimulationConfig, n: usize, out: &mut Outputs) -> Result<()> {
    let started = Instant::now();
    let mut acc: Option<EnsembleAccumulator> = None;
    let mut collapses: Vec<(u64, Option<Collapse>)> = Vec::with_capacity(n);
    for_each_trajectory(cfg, n, |_, r| {
        let a = acc.get_or_insert_with(|| EnsembleAccumulator::new(&r));
        a.push(&r)?;
        collapses.push((
            r.seed,
            collapse_metrics(&r, COLLAPSE_THRESHOLD, COLLAPSE_DWELL)?,
        ));
        Ok(())
    })?;
    let summary = acc.context("empty ensemble")?.finish()?;
    write_ensemble_csv(&out.path("ensemble.csv"), &summary)?;

    let mut w = BufWriter::new(File::create(out.path("collapse.csv"))?);
    writeln!(w, "index,seed,collapse_time,m")?;
    let mut winners = vec![0usize; cfg.model.n_max + 1];
    for (i, (seed, c)) in collapses.iter().enumerate() {
        match c {
            Some(c) => {
                winners[c.m] += 1;
                writeln!(w, "{i},{seed},{},{}", fmt_f64(c.time), c.m)?;
            }
            None => writeln!(w, "{i},{seed},,")?,
        }
    }
    w.flush()?;

    let fit = fit_summary(&summary).map_err(|e| e.to_string());
    let report = EnsembleReport {
        fit: FitSummary::new(
            cfg.k,
            n,
            summary.seeds.clone(),
            fit.as_ref().map_err(Clone::clone),
        ),
        collapse_threshold: COLLAPSE_THRESHOLD,
        collapse_dwell: COLLAPSE_DWELL,
        collapsed: winners.iter().sum(),
        winners,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out.path("ensemble.json"), &report)?;
    Ok(())
}

fn sweep(plan: &RunPlan, out: &mut Outputs) -> Result<()> {
    let s = &plan.settings;
    let points = sweep_tau(&s.k_values, &s.config, s.n_trajectories);
    let mut w = BufWriter::new(File::create(out.path("sweep.csv"))?);
    writeln!(w, "k,dt,tau,p0,residual,n_points,error")?;
    let mut fits = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        match &p.outcome {
            Ok((fit, summary)) => {
                writeln!(
                    w,
                    "{},{},{},{},{},{},",
                    fmt_f64(p.k),
                    fmt_f64(p.config.dt),
                    fmt_f64(fit.tau),
                    fmt_f64(fit.p0),
                    fmt_f64(fit.residual),
                    fit.n_points_used
                )?;
                write_ensemble_csv(&out.path(&format!("ensemble_k{i}.csv")), summary)?;
                fits.push(FitSummary::new(
                    p.k,
                    s.n_trajectories,
                    p.seeds.clone(),
                    Ok(fit),
                ));
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(w, "{},{},,,,,{msg}", fmt_f64(p.k), fmt_f64(p.config.dt))?;
                fits.push(FitSummary::new(
                    p.k,
                    s.n_trajectories,
                    p.seeds.clone(),
                    Err(e.to_string()),
                ));
            }
        }
    }
    w.flush()?;
    write_json(&out.path("sweep.json"), &fits)?;
    Ok(())
}

/// Jump-inference summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    /// First scheduled jump, if any.
    pub jump_time: Option<f64>,
    pub band: f64,
    pub dwell: f64,
    /// Detection lag of the filtered `⟨n⟩` relative to the truth.
    pub lag: Option<f64>,
    /// Largest `|⟨n⟩_filtered − ⟨n⟩_truth|` over the last quarter of the run.
    pub final_quarter_max_difference: f64,
}

impl JumpReport {
    pub fn new(cfg: &SimulationConfig, truth: &Trajectory, filtered: &Trajectory) -> Self {
        let t = &truth.record;
        let f = &filtered.record;
        let jump_time = cfg.jump_schedule.iter().map(|j| j.time).reduce(f64::min);
        let lag = jump_time.and_then(|jt| {
            jump_detection(
                &t.times,
                &f.mean_n,
                &t.mean_n,
                jt,
                DETECTION_DWELL,
                DETECTION_BAND,
            )
        });
        let start = t.times.partition_point(|&x| x < 0.75 * cfg.t_final - 1e-9);
        let final_quarter_max_difference = t.mean_n[start..]
            .iter()
            .zip(&f.mean_n[start..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Self {
            jump_time,
            band: DETECTION_BAND,
            dwell: DETECTION_DWELL,
            lag,
            final_quarter_max_difference,
        }
    }
}

fn jumps(cfg: &SimulationConfig, out: &mut Outputs) -> Result<()> {
    ensure!(
        !cfg.jump_schedule.is_empty() || cfg.gamma > 0.0,
        "jumps needs a jump_schedule or gamma > 0"
    );
    let started = Instant::now();
    let opts = RunOptions {
        keep_increments: true,
        ..Default::default()
    };
    let truth = run_generator_with(cfg, &opts)?;
    let stem = if cfg.jump_schedule.is_empty() {
        "truth"
    } else {
        "informed"
    };
    out.record(stem, "generator", cfg, &truth, started)?;
    let started = Instant::now();
    let filtered = run_filter_with(&truth.record, cfg, &RunOptions::default())?;
    out.record("filtered", "filter", cfg, &filtered, started)?;
    write_json(
        &out.path("jumps.json"),
        &JumpReport::new(cfg, &truth, &filtered),
    )?;
    Ok(())
}

/// Sidecar path of a record CSV.
pub fn sidecar_path(record: &Path) -> std::path::PathBuf {
    record.with_extension("json")
}

fn filter(cfg: &SimulationConfig, inputs: &FilterInputs, out: &mut Outputs) -> Result<()> {
    let sidecar_file = sidecar_path(&inputs.record);
    let sidecar: RecordSidecar = read_json(&sidecar_file)
        .with_context(|| format!("reading sidecar {}", sidecar_file.display()))?;
    if sidecar.config.k != cfg.k {
        bail!(
            "record was generated with k = {} but the configuration has k = {}; refusing to filter",
            sidecar.config.k,
            cfg.k
        );
    }
    let record = read_record_csv(&inputs.record, &sidecar, Some(sidecar.n_samples))
        .with_context(|| format!("reading record {}", inputs.record.display()))?;
    let started = Instant::now();
    let opts = RunOptions {
        keep_states: inputs.truth.is_some(),
        ..Default::default()
    };
    let filtered = run_filter_with(&record, cfg, &opts)?;
    out.record("filtered", "filter", cfg, &filtered, started)?;
    if let Some(truth_path) = &inputs.truth {
        let (times, truth) = read_states_csv(truth_path)
            .with_context(|| format!("reading truth {}", truth_path.display()))?;
        let mut w = BufWriter::new(File::create(out.path("divergence.csv"))?);
        writeln!(w, "t,trace_distance")?;
        ensure!(
            times.len() >= filtered.states.len(),
            "truth has {} samples, filter produced {}",
            times.len(),
            filtered.states.len()
        );
        for (((t, est), tr), truth_time) in filtered
            .record
            .times
            .iter()
            .zip(&filtered.states)
            .zip(&truth)
            .zip(&times)
        {
            ensure!(
                (truth_time - t).abs() < 1e-9,
                "truth sample at t = {truth_time} does not match t = {t}"
            );
            let d = est.trace_distance(&ConditionalState::Blocks(tr.clone()))?;
            writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(d))?;
        }
        w.flush()?;
    }
    Ok(())
}

//! Ensembles, purity fits, `τ(k)` sweeps and collapse/jump metrics.

mod reduced;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sme::{derive_seed, run_generator, SimulationConfig, TrajectoryRecord};

pub use reduced::{
    reduced_dynamics_oracle, reduced_dynamics_oracle_on_path, OracleRun, SubspaceBlock,
    SubspaceSystem,
};

/// Points with `1 − P` at or below this are excluded from the purity fit.
pub const SATURATION: f64 = 1e-3;
/// Minimum number of time points for a purity fit.
pub const MIN_FIT_POINTS: usize = 10;
/// Trajectories generated per parallel batch before they are folded into
/// the running statistics.
const BATCH: usize = 32;

/// Pointwise ensemble statistics. Standard deviations use the unbiased
/// `1/(M−1)` estimator and are zero for a single trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean_purity: Vec<f64>,
    pub std_purity: Vec<f64>,
    pub mean_sigma_ee: Vec<f64>,
    pub std_sigma_ee: Vec<f64>,
    pub mean_mean_n: Vec<f64>,
    pub std_mean_n: Vec<f64>,
    pub mean_p_m: Vec<Vec<f64>>,
    pub std_p_m: Vec<Vec<f64>>,
    pub n_trajectories: usize,
    pub seeds: Vec<u64>,
}

impl EnsembleSummary {
    /// Standard error of the mean purity.
    pub fn stderr_purity(&self, i: usize) -> f64 {
        self.std_purity[i] / (self.n_trajectories as f64).sqrt()
    }
}

/// Running mean and sum of squared deviations (Welford), one per series.
#[derive(Clone, Debug, Default)]
struct Moments {
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    fn push(&mut self, count: usize, values: impl Iterator<Item = f64>) {
        let c = count as f64;
        for ((mean, m2), x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let delta = x - *mean;
            *mean += delta / c;
            *m2 += delta * (x - *mean);
        }
    }

    fn std(&self, count: usize) -> Vec<f64> {
        if count < 2 {
            return vec![0.0; self.m2.len()];
        }
        self.m2
            .iter()
            .map(|s| (s.max(0.0) / (count - 1) as f64).sqrt())
            .collect()
    }
}

/// Folds records in a fixed order so results do not depend on scheduling.
#[derive(Clone, Debug)]
pub struct EnsembleAccumulator {
    times: Vec<f64>,
    levels: usize,
    purity: Moments,
    sigma: Moments,
    mean_n: Moments,
    p_m: Moments,
    seeds: Vec<u64>,
}

impl EnsembleAccumulator {
    pub fn new(first: &TrajectoryRecord) -> Self {
        let n = first.len();
        let levels = first.n_levels();
        Self {
            times: first.times.clone(),
            levels,
            purity: Moments::new(n),
            sigma: Moments::new(n),
            mean_n: Moments::new(n),
            p_m: Moments::new(n * levels),
            seeds: Vec::new(),
        }
    }

    pub fn push(&mut self, record: &TrajectoryRecord) -> Result<()> {
        let same_grid = record.times.len() == self.times.len()
            && record
                .times
                .iter()
                .zip(&self.times)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs().max(1.0));
        if !same_grid || record.n_levels() != self.levels {
            return Err(Error::GridMismatch(format!(
                "record with seed {} does not share the ensemble time grid",
                record.seed
            )));
        }
        self.seeds.push(record.seed);
        let c = self.seeds.len();
        self.purity.push(c, record.purity.iter().copied());
        self.sigma.push(c, record.sigma_ee.iter().copied());
        self.mean_n.push(c, record.mean_n.iter().copied());
        self.p_m.push(c, record.p_m.iter().flatten().copied());
        Ok(())
    }

    pub fn finish(self) -> Result<EnsembleSummary> {
        let count = self.seeds.len();
        if count == 0 {
            return Err(Error::Empty("no trajectories to aggregate".into()));
        }
        let split = |flat: Vec<f64>| {
            flat.chunks(self.levels.max(1))
                .map(<[f64]>::to_vec)
                .collect::<Vec<_>>()
        };
        Ok(EnsembleSummary {
            std_purity: self.purity.std(count),
            mean_purity: self.purity.mean,
            std_sigma_ee: self.sigma.std(count),
            mean_sigma_ee: self.sigma.mean,
            std_mean_n: self.mean_n.std(count),
            mean_mean_n: self.mean_n.mean,
            std_p_m: split(self.p_m.std(count)),
            mean_p_m: split(self.p_m.mean),
            times: self.times,
            n_trajectories: count,
            seeds: self.seeds,
        })
    }
}

/// Pointwise mean and standard deviation across records sharing one grid.
pub fn aggregate(records: &[TrajectoryRecord]) -> Result<EnsembleSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("no trajectories to aggregate".into()))?;
    let mut acc = EnsembleAccumulator::new(first);
    for r in records {
        acc.push(r)?;
    }
    acc.finish()
}

/// Seeds of an ensemble: trajectory `i` uses `derive_seed(cfg.seed, cfg.k, i)`.
pub fn ensemble_seeds(cfg: &SimulationConfig, n_trajectories: usize) -> Vec<u64> {
    (0..n_trajectories as u64)
        .map(|i| derive_seed(cfg.seed, cfg.k, i))
        .collect()
}

/// Runs generator trajectories in parallel on the current rayon pool and
/// hands them to `visit` in index order.
pub fn for_each_trajectory(
    cfg: &SimulationConfig,
    n_trajectories: usize,
    mut visit: impl FnMut(usize, TrajectoryRecord) -> Result<()>,
) -> Result<()> {
    if n_trajectories == 0 {
        return Err(Error::Empty(
            "ensemble needs at least one trajectory".into(),
        ));
    }
    cfg.validate()?;
    let seeds = ensemble_seeds(cfg, n_trajectories);
    for (batch_index, chunk) in seeds.chunks(BATCH).enumerate() {
        let records: Vec<Result<TrajectoryRecord>> = chunk
            .par_iter()
            .map(|&seed| {
                let c = SimulationConfig {
                    seed,
                    ..cfg.clone()
                };
                run_generator(&c).map(|t| t.record)
            })
            .collect();
        for (offset, r) in records.into_iter().enumerate() {
            visit(batch_index * BATCH + offset, r?)?;
        }
    }
    Ok(())
}

/// Generates all trajectories of an ensemble.
pub fn run_ensemble(
    cfg: &SimulationConfig,
    n_trajectories: usize,
) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::with_capacity(n_trajectories);
    for_each_trajectory(cfg, n_trajectories, |_, r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Generates an ensemble and folds it into summary statistics without
/// keeping the individual records.
pub fn summarize_ensemble(
    cfg: &SimulationConfig,
    n_trajectories: usize,
) -> Result<EnsembleSummary> {
    let mut acc: Option<EnsembleAccumulator> = None;
    for_each_trajectory(cfg, n_trajectories, |_, r| {
        acc.get_or_insert_with(|| EnsembleAccumulator::new(&r))
            .push(&r)
    })?;
    acc.expect("at least one trajectory").finish()
}

/// Result of fitting `P(t) = 1 − (1 − P₀) e^{−t/τ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityFit {
    pub p0: f64,
    pub tau: f64,
    /// RMS deviation of the model from the data over all points, in P.
    pub residual: f64,
    pub n_points_used: usize,
}

/// Fits the purification time with `P(0)` pinned to the first sample.
///
/// Least squares on `log(1 − P)` through the fixed intercept, using only
/// points with `1 − P > SATURATION`.
pub fn fit_purity(times: &[f64], purity: &[f64]) -> Result<PurityFit> {
    if times.len() != purity.len() {
        return Err(Error::GridMismatch(
            "times and purity differ in length".into(),
        ));
    }
    if times.len() < MIN_FIT_POINTS {
        return Err(Error::FitDegenerate(format!(
            "{} points, need at least {MIN_FIT_POINTS}",
            times.len()
        )));
    }
    let (t0, p0) = (times[0], purity[0]);
    if !(1.0 - p0 > SATURATION) {
        return Err(Error::FitDegenerate(format!(
            "initial purity {p0} is already saturated"
        )));
    }
    let y0 = (1.0 - p0).ln();
    let (mut num, mut den, mut used) = (0.0, 0.0, 0usize);
    for (&t, &p) in times.iter().zip(purity) {
        let gap = 1.0 - p;
        if gap > SATURATION {
            let s = t - t0;
            num += s * (y0 - gap.ln());
            den += s * s;
            used += 1;
        }
    }
    if used < 2 || den == 0.0 {
        return Err(Error::FitDegenerate(
            "all points after t = 0 are saturated".into(),
        ));
    }
    let rate = num / den;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::FitDegenerate(format!(
            "purity does not grow (rate {rate:.3e})"
        )));
    }
    let tau = 1.0 / rate;
    let sq: f64 = times
        .iter()
        .zip(purity)
        .map(|(&t, &p)| (p - (1.0 - (1.0 - p0) * (-(t - t0) / tau).exp())).powi(2))
        .sum();
    Ok(PurityFit {
        p0,
        tau,
        residual: (sq / times.len() as f64).sqrt(),
        n_points_used: used,
    })
}

/// Fits the mean purity of an ensemble summary.
pub fn fit_summary(summary: &EnsembleSummary) -> Result<PurityFit> {
    fit_purity(&summary.times, &summary.mean_purity)
}

/// One strength of a `τ(k)` sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub k: f64,
    /// Configuration actually run (adjusted `k`, `dt`, `sample_every`).
    pub config: SimulationConfig,
    pub seeds: Vec<u64>,
    pub outcome: Result<(PurityFit, EnsembleSummary)>,
}

/// Configuration used for strength `k` in a sweep.
///
/// The step is capped at `10⁻³ / max(k, g)` and `sample_every` rescaled so
/// the sample interval of `base` is kept.
pub fn sweep_config(base: &SimulationConfig, k: f64) -> SimulationConfig {
    let rate = k.max(base.model.g);
    let dt = base.dt.min(1e-3 / rate);
    let sample_every = ((base.sample_interval() / dt).round() as usize).max(1);
    SimulationConfig {
        k,
        dt,
        sample_every,
        ..base.clone()
    }
}

/// Runs `n_traj` trajectories per strength, aggregates and fits.
///
/// Seeds depend only on `(base.seed, k, index)`, so results do not depend
/// on the order of `k_values`. A failure at one `k` is reported in its
/// entry and the sweep continues.
pub fn sweep_tau(k_values: &[f64], base: &SimulationConfig, n_traj: usize) -> Vec<SweepPoint> {
    k_values
        .iter()
        .map(|&k| {
            let config = sweep_config(base, k);
            let seeds = ensemble_seeds(&config, n_traj);
            let outcome = if k > 0.0 && k.is_finite() {
                summarize_ensemble(&config, n_traj).and_then(|s| Ok((fit_summary(&s)?, s)))
            } else {
                Err(Error::config("k_values", format!("{k} is not positive")))
            };
            if let Err(e) = &outcome {
                log::warn!("sweep point k = {k} failed: {e}");
            }
            SweepPoint {
                k,
                config,
                seeds,
                outcome,
            }
        })
        .collect()
}

/// Sustained collapse into one subspace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub time: f64,
    pub m: usize,
}

/// First time at which one subspace holds at least `threshold` and keeps
/// doing so, always the same subspace, for `dwell` of simulated time.
pub fn collapse_metrics(
    record: &TrajectoryRecord,
    threshold: f64,
    dwell: f64,
) -> Result<Option<Collapse>> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::config(
            "threshold",
            format!("{threshold} is outside (0.5, 1)"),
        ));
    }
    let n = record.len();
    let dominant: Vec<(usize, f64)> = (0..n).map(|i| record.dominant_subspace(i)).collect();
    let eps = 1e-9 * dwell.max(1.0);
    let mut start: Option<usize> = None;
    for i in 0..n {
        let (m, p) = dominant[i];
        let holds = p >= threshold;
        match start {
            Some(s) if holds && dominant[s].0 == m => {}
            _ => start = holds.then_some(i),
        }
        if let Some(s) = start {
            if record.times[i] - record.times[s] >= dwell - eps {
                return Ok(Some(Collapse {
                    time: record.times[s],
                    m: dominant[s].0,
                }));
            }
        }
    }
    Ok(None)
}

/// Time from `jump_time` until `estimate` enters the band `reference ± band`
/// and stays there for `dwell`. `None` if that never happens in the record.
pub fn jump_detection(
    times: &[f64],
    estimate: &[f64],
    reference: &[f64],
    jump_time: f64,
    dwell: f64,
    band: f64,
) -> Option<f64> {
    let eps = 1e-9 * dwell.max(1.0);
    let mut start: Option<usize> = None;
    for i in 0..times.len().min(estimate.len()).min(reference.len()) {
        if times[i] < jump_time - eps {
            continue;
        }
        let inside = (estimate[i] - reference[i]).abs() <= band;
        if !inside {
            start = None;
            continue;
        }
        let s = *start.get_or_insert(i);
        if times[i] - times[s] >= dwell - eps {
            return Some((times[s] - jump_time).max(0.0));
        }
    }
    None
}

/// First sample time with `⟨σ_ee⟩` strictly below `level`.
pub fn first_crossing_below(record: &TrajectoryRecord, level: f64) -> Option<f64> {
    record
        .times
        .iter()
        .zip(&record.sigma_ee)
        .find(|(_, &s)| s < level)
        .map(|(&t, _)| t)
}

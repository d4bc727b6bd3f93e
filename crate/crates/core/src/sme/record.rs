use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled time series of one trajectory.
///
/// `dy[i]` is the record summed over the steps ending at `times[i]`
/// (zero at `t = 0`). `p_m[i][m]` covers `m = 0..=n_max`; the orphan
/// population is reported separately as `leakage`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub dy: Vec<f64>,
    pub sigma_ee: Vec<f64>,
    pub p_m: Vec<Vec<f64>>,
    pub purity: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub leakage: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub dt: f64,
    pub sample_every: usize,
    /// Per-step record, kept only on request and never serialized.
    #[serde(skip)]
    pub increments: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub(crate) fn with_capacity(
        n: usize,
        seed: u64,
        config_hash: String,
        dt: f64,
        sample_every: usize,
    ) -> Self {
        Self {
            times: Vec::with_capacity(n),
            dy: Vec::with_capacity(n),
            sigma_ee: Vec::with_capacity(n),
            p_m: Vec::with_capacity(n),
            purity: Vec::with_capacity(n),
            mean_n: Vec::with_capacity(n),
            leakage: Vec::with_capacity(n),
            seed,
            config_hash,
            dt,
            sample_every,
            increments: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        self.p_m.first().map_or(0, Vec::len)
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.sample_every as f64
    }

    /// Largest subspace probability at sample `i`, with its index.
    pub fn dominant_subspace(&self, i: usize) -> (usize, f64) {
        self.p_m[i]
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (m, p)| {
                if p > best.1 {
                    (m, p)
                } else {
                    best
                }
            })
    }

    /// Checks the structural invariants of a record.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        let lens = [
            self.dy.len(),
            self.sigma_ee.len(),
            self.p_m.len(),
            self.purity.len(),
            self.mean_n.len(),
            self.leakage.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Format(format!(
                "column lengths {lens:?} differ from {n} times"
            )));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("times are not strictly increasing".into()));
        }
        let levels = self.n_levels();
        for (i, (p, leak)) in self.p_m.iter().zip(&self.leakage).enumerate() {
            if p.len() != levels {
                return Err(Error::Format(format!(
                    "row {i} has {} subspaces, expected {levels}",
                    p.len()
                )));
            }
            if p.iter().any(|&x| !(-1e-9..=1.0 + 1e-9).contains(&x)) {
                return Err(Error::Format(format!(
                    "row {i} has a probability outside [0, 1]"
                )));
            }
            let total: f64 = p.iter().sum::<f64>() + leak;
            if (total - 1.0).abs() > 1e-8 {
                return Err(Error::Format(format!(
                    "row {i}: probabilities sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

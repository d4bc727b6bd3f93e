//! CSV and JSON persistence of records, states and ensemble summaries.
//!
//! Floating-point values are written as `{:.8e}` (nine significant digits)
//! so files are byte-stable for identical inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::C64;
use crate::analysis::{EnsembleSummary, PurityFit};
use crate::error::{Error, Result};
use crate::sme::{Block, BlockState, ConditionalState, SimulationConfig, TrajectoryRecord};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

/// Header of a trajectory CSV with `levels` subspace columns.
pub fn record_header(levels: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "dY_bin", "sigma_ee", "purity", "mean_n", "leakage"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..levels).map(|m| format!("p_{m}")));
    h
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

pub fn write_record_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(record_header(record.n_levels()))?;
    for i in 0..record.len() {
        let mut row = vec![
            fmt_f64(record.times[i]),
            fmt_f64(record.dy[i]),
            fmt_f64(record.sigma_ee[i]),
            fmt_f64(record.purity[i]),
            fmt_f64(record.mean_n[i]),
            fmt_f64(record.leakage[i]),
        ];
        row.extend(record.p_m[i].iter().map(|&p| fmt_f64(p)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_cell(value: &str, column: &str, row: usize) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| {
        Error::Format(format!(
            "column `{column}`, row {row}: `{value}` is not a number"
        ))
    })
}

/// Reads a trajectory CSV. Run metadata comes from the sidecar; when
/// `expected_rows` is given the row count must match it.
pub fn read_record_csv(
    path: &Path,
    sidecar: &RecordSidecar,
    expected_rows: Option<usize>,
) -> Result<TrajectoryRecord> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let levels = header.len().saturating_sub(6);
    let expected = record_header(levels);
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Format(format!(
                    "column {i}: expected `{want}`, found `{got}`"
                )));
            }
            None => return Err(Error::Format(format!("missing column `{want}`"))),
        }
    }
    if levels != sidecar.config.model.n_max + 1 {
        return Err(Error::Format(format!(
            "expected columns p_0..p_{}, found {levels} subspace columns",
            sidecar.config.model.n_max
        )));
    }
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        dy: Vec::new(),
        sigma_ee: Vec::new(),
        p_m: Vec::new(),
        purity: Vec::new(),
        mean_n: Vec::new(),
        leakage: Vec::new(),
        seed: sidecar.seed,
        config_hash: sidecar.config_hash.clone(),
        dt: sidecar.config.dt,
        sample_every: sidecar.config.sample_every,
        increments: None,
    };
    for (row_index, row) in r.records().enumerate() {
        let row = row?;
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "row {row_index} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let v: Vec<f64> = row
            .iter()
            .zip(&header)
            .map(|(cell, col)| parse_cell(cell, col, row_index))
            .collect::<Result<_>>()?;
        rec.times.push(v[0]);
        rec.dy.push(v[1]);
        rec.sigma_ee.push(v[2]);
        rec.purity.push(v[3]);
        rec.mean_n.push(v[4]);
        rec.leakage.push(v[5]);
        rec.p_m.push(v[6..].to_vec());
    }
    if let Some(n) = expected_rows {
        if rec.len() != n {
            return Err(Error::Format(format!(
                "expected {n} rows, found {}",
                rec.len()
            )));
        }
    }
    Ok(rec)
}

/// Metadata written next to every trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    /// `generator`, `filter` or `unconditional`.
    pub kind: String,
    pub config: SimulationConfig,
    pub seed: u64,
    pub config_hash: String,
    pub n_samples: usize,
    /// Largest orphan population over the run.
    pub max_leakage: f64,
    /// Thermal weight cut off by the truncation before renormalization.
    pub truncation_leakage: f64,
    pub runtime_seconds: f64,
}

impl RecordSidecar {
    pub fn new(
        kind: &str,
        config: &SimulationConfig,
        record: &TrajectoryRecord,
        runtime_seconds: f64,
    ) -> Result<Self> {
        let (_, truncation_leakage) = config.initial.build(config.model.n_max)?;
        Ok(Self {
            kind: kind.to_string(),
            config: config.clone(),
            seed: record.seed,
            config_hash: record.config_hash.clone(),
            n_samples: record.len(),
            max_leakage: record.leakage.iter().copied().fold(0.0, f64::max),
            truncation_leakage,
            runtime_seconds,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

/// Writes block states: `t` then `m{m}_pg, m{m}_pe, m{m}_re, m{m}_im` per
/// block. Dense states must be excitation-diagonal.
pub fn write_states_csv(path: &Path, times: &[f64], states: &[ConditionalState]) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::GridMismatch(format!(
            "{} times for {} states",
            times.len(),
            states.len()
        )));
    }
    let blocks: Vec<BlockState> = states
        .iter()
        .map(|s| match s {
            ConditionalState::Blocks(b) => Ok(b.clone()),
            ConditionalState::Dense(d) => {
                let n_max = d.dim() / 2 - 1;
                BlockState::from_dense(d, n_max).ok_or_else(|| {
                    Error::InvalidState("state has coherences between subspaces".into())
                })
            }
        })
        .collect::<Result<_>>()?;
    let n_blocks = blocks.first().map_or(0, |b| b.blocks.len());
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string()];
    for m in 0..n_blocks {
        for part in ["pg", "pe", "re", "im"] {
            header.push(format!("m{m}_{part}"));
        }
    }
    w.write_record(&header)?;
    for (t, b) in times.iter().zip(&blocks) {
        let mut row = vec![fmt_f64(*t)];
        for blk in &b.blocks {
            row.extend([blk.pg, blk.pe, blk.c.re, blk.c.im].map(fmt_f64));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_states_csv(path: &Path) -> Result<(Vec<f64>, Vec<BlockState>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") || (header.len() - 1) % 4 != 0 {
        return Err(Error::Format(
            "state file must have `t` followed by four columns per block".into(),
        ));
    }
    let n_blocks = (header.len() - 1) / 4;
    for m in 0..n_blocks {
        for (j, part) in ["pg", "pe", "re", "im"].iter().enumerate() {
            let want = format!("m{m}_{part}");
            if header[1 + 4 * m + j] != want {
                return Err(Error::Format(format!(
                    "expected column `{want}`, found `{}`",
                    header[1 + 4 * m + j]
                )));
            }
        }
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (row_index, row) in r.records().enumerate() {
        let row = row?;
        let v: Vec<f64> = row
            .iter()
            .zip(&header)
            .map(|(cell, col)| parse_cell(cell, col, row_index))
            .collect::<Result<_>>()?;
        times.push(v[0]);
        states.push(BlockState {
            blocks: v[1..]
                .chunks(4)
                .map(|c| Block {
                    pg: c[0],
                    pe: c[1],
                    c: C64::new(c[2], c[3]),
                })
                .collect(),
        });
    }
    Ok((times, states))
}

pub fn write_ensemble_csv(path: &Path, summary: &EnsembleSummary) -> Result<()> {
    let levels = summary.mean_p_m.first().map_or(0, Vec::len);
    let mut w = writer(path)?;
    let mut header: Vec<String> = [
        "t",
        "purity_mean",
        "purity_std",
        "sigma_ee_mean",
        "sigma_ee_std",
        "mean_n_mean",
        "mean_n_std",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in 0..levels {
        header.push(format!("p_{m}_mean"));
        header.push(format!("p_{m}_std"));
    }
    w.write_record(&header)?;
    for i in 0..summary.times.len() {
        let mut row: Vec<String> = [
            summary.times[i],
            summary.mean_purity[i],
            summary.std_purity[i],
            summary.mean_sigma_ee[i],
            summary.std_sigma_ee[i],
            summary.mean_mean_n[i],
            summary.std_mean_n[i],
        ]
        .map(fmt_f64)
        .to_vec();
        for (mean, std) in summary.mean_p_m[i].iter().zip(&summary.std_p_m[i]) {
            row.push(fmt_f64(*mean));
            row.push(fmt_f64(*std));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fit summary of one ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub k: f64,
    pub tau: Option<f64>,
    pub p0: Option<f64>,
    pub residual: Option<f64>,
    pub n_trajectories: usize,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl FitSummary {
    pub fn new(
        k: f64,
        n_trajectories: usize,
        seeds: Vec<u64>,
        fit: std::result::Result<&PurityFit, String>,
    ) -> Self {
        match fit {
            Ok(f) => Self {
                k,
                tau: Some(f.tau),
                p0: Some(f.p0),
                residual: Some(f.residual),
                n_trajectories,
                seeds,
                error: None,
            },
            Err(e) => Self {
                k,
                tau: None,
                p0: None,
                residual: None,
                n_trajectories,
                seeds,
                error: Some(e),
            },
        }
    }
}

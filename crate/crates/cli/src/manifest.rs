use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Trajectory,
    Unconditional,
    Ensemble,
    Sweep,
    Jumps,
    Filter,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Trajectory => "trajectory",
            Command::Unconditional => "unconditional",
            Command::Ensemble => "ensemble",
            Command::Sweep => "sweep",
            Command::Jumps => "jumps",
            Command::Filter => "filter",
        })
    }
}

/// Files read by the `filter` command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterInputs {
    pub record: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<PathBuf>,
}

/// What to run, independent of when and where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub preset: Option<String>,
    pub settings: RunSettings,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inputs: Option<FilterInputs>,
}

/// Written as `manifest.json` in every output directory. Replaying it
/// reproduces the CSV outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub plan: RunPlan,
    pub output_dir: PathBuf,
    pub created_at: DateTime<Utc>,
    pub tool_version: String,
    /// Output files relative to `output_dir`.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn command(&self) -> Command {
        self.plan.command
    }
}

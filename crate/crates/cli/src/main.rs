use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use qndsim_cli::{
    parse_config_file, preset, replay, run, workers_from_env, Command, FilterInputs, RunPlan,
    RunSettings,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Action {
    Trajectory,
    Unconditional,
    Ensemble,
    Sweep,
    Jumps,
    Filter,
    /// Re-run the plan stored in a manifest.
    Replay,
}

/// Stochastic master equation runs of a monitored qubit–oscillator system.
///
/// The worker count is read from QNDSIM_WORKERS.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    action: Action,
    /// Flat TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Named experiment (fig1, fig2a, fig2c, fig2e, fig3, fig4, fig5).
    #[arg(long)]
    preset: Option<String>,
    /// Record CSV for `filter`; its sidecar JSON must sit next to it.
    #[arg(long)]
    record: Option<PathBuf>,
    /// State CSV of the true trajectory, for `filter`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Manifest for `replay`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn command_of(action: Action) -> Option<Command> {
    Some(match action {
        Action::Trajectory => Command::Trajectory,
        Action::Unconditional => Command::Unconditional,
        Action::Ensemble => Command::Ensemble,
        Action::Sweep => Command::Sweep,
        Action::Jumps => Command::Jumps,
        Action::Filter => Command::Filter,
        Action::Replay => return None,
    })
}

fn plan(cli: &Cli, command: Command) -> Result<RunPlan> {
    let (mut settings, preset_name) = match (&cli.preset, &cli.config) {
        (Some(_), Some(_)) => bail!("--preset and --config are mutually exclusive"),
        (Some(name), None) => {
            let p = preset(name)?;
            if p.command != command {
                bail!("preset {} runs `{}`, not `{command}`", p.name, p.command);
            }
            (p.settings, Some(p.name.to_string()))
        }
        (None, Some(path)) => (parse_config_file(path)?, None),
        (None, None) => (RunSettings::default(), None),
    };
    if let Some(seed) = cli.seed {
        settings.config.seed = seed;
    }
    settings.validate()?;
    let inputs = match (command, &cli.record) {
        (Command::Filter, Some(record)) => Some(FilterInputs {
            record: record.clone(),
            truth: cli.truth.clone(),
        }),
        (Command::Filter, None) => bail!("filter needs --record"),
        (_, None) if cli.truth.is_none() => None,
        _ => bail!("--record and --truth apply to filter only"),
    };
    Ok(RunPlan {
        command,
        preset: preset_name,
        settings,
        inputs,
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = workers_from_env()?;
    let manifest = match command_of(cli.action) {
        Some(command) => run(&plan(&cli, command)?, &cli.out, workers)?,
        None => {
            let path = cli.manifest.as_ref().context("replay needs --manifest")?;
            replay(path, &cli.out, workers)?
        }
    };
    log::info!(
        "{} finished: {} files in {}",
        manifest.command(),
        manifest.outputs.len(),
        cli.out.display()
    );
    Ok(())
}

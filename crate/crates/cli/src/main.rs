//! `anisorb`: offline runs, online sweeps, run comparisons and bundle
//! inspection.

mod compare;
mod offline;
mod online;

use std::path::PathBuf;
use std::process::ExitCode;

use anisorb::config::RunConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] anisorb::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 configuration, 3 non-convergence, 4 I/O, 1 anything else.
    fn exit_code(&self) -> u8 {
        use anisorb::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Io { .. } | Self::Json(_) => 4,
            Self::Core(e) => match e {
                E::Config(_)
                | E::InvalidDomain(_)
                | E::UnknownFamily(_)
                | E::DimensionMismatch { .. }
                | E::TrainingTooSmall { .. }
                | E::ZeroIncrement { .. }
                | E::OutsideDomain { .. } => 2,
                E::NonConvergence(_) => 3,
                E::Io(_) | E::Format(_) | E::WouldOverwrite(_) => 4,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

#[derive(Debug, Parser)]
#[command(name = "anisorb", version, about = "Locally adaptive reduced-basis runs with learned parameter metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the offline greedy and write the bundle and CSV reports.
    Offline(RunArgs),
    /// Evaluate a bundle at query parameters.
    Online(online::OnlineArgs),
    /// Compare two runs (directories of finished runs, config files or presets).
    Compare(compare::CompareArgs),
    /// Print bundle metadata as JSON.
    Inspect {
        bundle: PathBuf,
    },
}

/// Configuration flags shared by commands that run the offline stage.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Config file, or the name of a preset (test1 .. test4).
    #[arg(long)]
    pub config: Option<String>,
    /// Override one key, e.g. `--set greedy.tol=1e-3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (overrides `out.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice (overrides `greedy.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            None => RunConfig::new(),
            Some(c) => load_config(c)?,
        };
        for kv in &self.set {
            cfg.set_pair(kv)?;
        }
        if let Some(seed) = self.seed {
            cfg.set("greedy.seed", &seed.to_string())?;
        }
        if let Some(out) = &self.out {
            cfg.set("out.dir", &out.to_string_lossy())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A config file path, or a preset name when no such file exists.
pub fn load_config(spec: &str) -> CliResult<RunConfig> {
    let path = PathBuf::from(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut cfg = RunConfig::new();
        cfg.apply_text(&text)?;
        return Ok(cfg);
    }
    if anisorb::config::PRESETS.contains(&spec) {
        return Ok(RunConfig::preset(spec)?);
    }
    Err(CliError::Usage(format!("`{spec}` is neither a config file nor a preset")))
}

fn inspect(path: &std::path::Path) -> CliResult<()> {
    let b = anisorb::store::load_bundle(path)?;
    let map = |m: &std::collections::BTreeMap<String, String>| {
        serde_json::Value::Object(m.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect())
    };
    let last = b.history.last();
    let v = serde_json::json!({
        "format": anisorb::store::FORMAT_TAG,
        "version": anisorb::store::FORMAT_VERSION,
        "dim": b.domain.dim(),
        "lower": b.domain.lower(),
        "upper": b.domain.upper(),
        "n_local": b.n_local,
        "tol": b.tol,
        "samples": b.len(),
        "snapshots": b.snapshots.is_some(),
        "affine": b.affine.as_ref().map(|a| a.kind.name()),
        "field_nodes": b.field.nodes().len(),
        "field_interpolation": b.field.mode().name(),
        "history_rows": b.history.len(),
        "final_max_err": last.map(|r| r.max_err),
        "problem": map(&b.problem),
        "meta": map(&b.meta),
    });
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Offline(args) => offline::run(&args),
        Command::Online(args) => online::run(&args),
        Command::Compare(args) => compare::run(&args),
        Command::Inspect { bundle } => inspect(&bundle),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

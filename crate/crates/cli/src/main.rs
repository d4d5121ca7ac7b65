mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Kind, RunConfig};
use experiments::Outcome;

/// Semiclassical spectra of non-selfadjoint magnetic Schrödinger operators.
#[derive(Debug, Parser)]
#[command(name = "nsa-spec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite; the config only supplies seed and output directory.
    Verify {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

fn kebab(kind: Kind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    command: &str,
    outcome: &Outcome,
    seconds: f64,
) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for table in &outcome.tables {
        let path = dir.join(&table.file);
        let csv_err = |source| OutputError::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(&table.header).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| OutputError::Io {
            path: path.clone(),
            source,
        })?;
    }
    let report = json!({
        "command": command,
        "config": cfg,
        "results": outcome.results,
        "checks": outcome.checks,
        "passed": outcome.passed(),
        "timings": { "total_seconds": seconds },
    });
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&path, text + "\n").map_err(|source| OutputError::Io { path, source })
}

fn prepare(config: Option<&Path>, kind: Kind, common: &Common) -> Result<RunConfig, config::ConfigError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::parse(&format!("kind = \"{}\"", kebab(kind)))?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.resolve()
}

fn execute(cli: Cli) -> Result<bool, String> {
    let (command, config, common, force_verify) = match &cli.command {
        Command::Run { config, common } => ("run", Some(config.as_path()), common, false),
        Command::Verify { config, common } => ("verify", config.as_deref(), common, true),
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let cfg = prepare(config, Kind::VerifyAll, common).map_err(|e| e.to_string())?;
    let label = if force_verify { Kind::VerifyAll } else { cfg.kind };
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(kebab(label)));

    let start = Instant::now();
    let outcome = if force_verify {
        experiments::verify_all_run(cfg.seed())
    } else {
        experiments::run(&cfg)
    };
    let seconds = start.elapsed().as_secs_f64();

    for c in &outcome.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("[{tag}] {}", c.name);
        } else {
            println!("[{tag}] {}: {}", c.name, c.detail);
        }
    }
    write_outputs(&out, &cfg, command, &outcome, seconds).map_err(|e| e.to_string())?;
    println!("wrote {}", out.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

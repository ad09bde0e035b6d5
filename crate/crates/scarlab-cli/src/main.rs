//! `scarlab <subcommand> [--config run.json] [--out table.csv] [--seed N] [--threads N]`
//!
//! Writes the CSV table to `--out` (default `<subcommand>.csv`) and a metadata sidecar next
//! to it with the extension replaced by `meta.json`. Errors go to stderr as one JSON object.

mod commands;
mod config;
mod error;
mod table;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{Params, RunConfig, Subcommand};
use error::CliError;
use table::ResultTable;

#[derive(Parser, Debug)]
#[command(name = "scarlab", version, about = "Scar-phase steady states: sweeps, scans and verification")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SCARLAB_THREADS")]
    threads: Option<usize>,
}

fn version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("SCARLAB_GIT_REV"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let cfg = RunConfig::parse(&text)?;
            if cfg.subcommand != cli.subcommand {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    cfg.subcommand.name(),
                    cli.subcommand.name()
                )));
            }
            cfg
        }
        None => RunConfig::defaults(cli.subcommand),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cfg.threads == 0 {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(cfg)
}

fn dispatch(cfg: &RunConfig) -> Result<(ResultTable, usize), CliError> {
    let t = match &cfg.params {
        Params::RqcExact(p) => commands::rqc_exact(p)?,
        Params::RqcMeanfield(p) => commands::rqc_meanfield(p)?,
        Params::RqcDmrg(p) => commands::rqc_dmrg(p, cfg.seed)?,
        Params::RqcRg(p) => commands::rqc_rg(p)?,
        Params::EftDiagram(p) => commands::eft_diagram(p)?,
        Params::EftRpa(p) => commands::eft_rpa(p)?,
        Params::EftCorrection(p) => commands::eft_correction(p)?,
        Params::XySteady(p) => commands::xy_steady(p, cfg.seed)?,
        Params::XySpectrum(p) => commands::xy_spectrum(p)?,
        Params::XyTrajectory(p) => commands::xy_trajectory(p, cfg.seed)?,
        Params::XyGibbs(p) => commands::xy_gibbs(p)?,
        Params::PxpVerify(p) => commands::pxp_verify(p)?,
        Params::Validate(_) => return Ok(validate::run()),
    };
    Ok((t, 0))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let (table, failed) = pool.install(|| dispatch(&cfg))?;
    table.check_finite()?;
    let wall = start.elapsed().as_secs_f64();

    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| format!("{}.csv", cfg.subcommand.name())));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(&out, table.to_csv()).map_err(io_err(&out))?;
    let mut meta = json!({
        "version": version(),
        "subcommand": cfg.subcommand.name(),
        "config": cfg.echo(),
        "columns": table.columns,
        "rows": table.rows.len(),
        "wall_time_s": wall,
    });
    if !table.extra.is_empty() {
        meta["extra"] = serde_json::Value::Object(table.extra.clone());
    }
    let meta_path = out.with_extension("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))?;

    if failed > 0 {
        return Err(CliError::ValidationFailed { failed, total: table.rows.len() });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

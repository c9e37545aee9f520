//! `phcond`: simulate and reconstruct photon-number conditioned states from
//! phase-randomized homodyne records.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phcond_core::config::RunConfig;
use phcond_core::exec::Execution;
use phcond_core::pipeline::{self, RecordSource};
use phcond_core::{Error, ErrorKind};
use serde_json::json;

const OUT_ENV: &str = "HOMODYNE_OUT";
const DEFAULT_OUT: &str = "phcond-out";

#[derive(Parser)]
#[command(
    name = "phcond",
    version,
    about = "Photon-number conditioned homodyne tomography"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (also settable through HOMODYNE_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the configured schedule into a record file.
    Simulate,
    /// Reconstruct every configured conditioning from stored or fresh records.
    Reconstruct {
        /// Record file written by `simulate`; samples the model when omitted.
        #[arg(long, value_name = "PATH")]
        records: Option<PathBuf>,
    },
    /// Fidelity between two stored reconstructions.
    Compare {
        /// density.json file or a reconstruction directory.
        a: PathBuf,
        b: PathBuf,
    },
    /// Convergence curves and Wigner-panel reconstructions as CSV/JSON.
    Figures,
    /// Quick internal consistency checks.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Statistics => 4,
        ErrorKind::Io => 1,
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| {
            std::env::var_os(OUT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn print(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json prints")
    );
}

fn write_report(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    let exec = Execution::with_threads(cli.common.threads)?;
    match cli.command {
        Command::Simulate => {
            let cfg = load_config(&cli.common)?;
            let out = output_dir(&cli.common, &cfg);
            let summary = pipeline::simulate(&cfg, &out, exec)?;
            print(&json!(summary));
            Ok(0)
        }
        Command::Reconstruct { records } => {
            let cfg = load_config(&cli.common)?;
            let out = output_dir(&cli.common, &cfg);
            let source = records.map_or(RecordSource::Model, RecordSource::File);
            let run = pipeline::reconstruct(&cfg, &source, exec)?;
            let summary = pipeline::write_reconstruction(&run, &cfg, &out, exec)?;
            let mut report: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&summary)?)?;
            report["summary"] = json!(summary);
            print(&report);
            match run.first_error() {
                Some(e) => {
                    eprintln!("error: {e}");
                    Ok(exit_code(e))
                }
                None => Ok(0),
            }
        }
        Command::Compare { a, b } => {
            let report = json!(pipeline::compare(&a, &b)?);
            if let Some(dir) = cli
                .common
                .out
                .clone()
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            {
                write_report(&dir, "compare.json", &report)?;
            }
            print(&report);
            Ok(0)
        }
        Command::Figures => {
            let cfg = load_config(&cli.common)?;
            let out = output_dir(&cli.common, &cfg);
            let run = pipeline::figures(&cfg, &out, exec)?;
            let failed: Vec<String> = run
                .outcomes
                .iter()
                .filter_map(|(l, r)| r.as_ref().err().map(|e| format!("{l}: {e}")))
                .collect();
            print(&json!({
                "config_hash": run.config_hash,
                "out": out,
                "comparisons": run.comparisons,
                "failed": failed,
            }));
            Ok(0)
        }
        Command::Selftest => {
            let checks = pipeline::selftest(exec)?;
            let ok = checks.iter().all(|c| c.passed);
            print(&json!({ "passed": ok, "checks": checks }));
            Ok(if ok { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

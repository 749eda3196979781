//! Command-line runner: loads a scenario config, executes the requested
//! analyses on a fixed-size worker pool and writes result tables plus a
//! manifest. Outputs depend only on the config and seed.

pub mod analyses;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use isac_core::SeededRng;
use serde_json::json;

use crate::analyses::Analysis;
use crate::config::{Config, FieldError, Overrides, Scale};
use crate::output::{FileRecord, Format, Manifest, StageRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "isac", version, about = "Sensing-communication tradeoff analyses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one analysis (re-region, cd-boundary, crb-rate, elmmse, zzb) or `all`.
    Run(RunArgs),
    /// Parse and check a config without running any solver.
    Validate(ValidateArgs),
    /// Print the available analyses.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub analysis: String,
    /// Config file (TOML, or JSON by extension); same as --config.
    pub config_file: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Override the user angle (degrees) with a single pair.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_c: Option<f64>,
    /// Override the target angle (degrees) with a single pair.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub config_file: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
}

/// Parse `args` (including the program name) and execute; returns the exit
/// code. Machine-readable status goes to stdout on success and to stderr
/// on failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::List => {
            for name in analyses::names() {
                println!("{name}");
            }
            EXIT_OK
        }
    }
}

fn print_json(to_stderr: bool, value: serde_json::Value) {
    let text = serde_json::to_string_pretty(&value).expect("status serialises");
    if to_stderr {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
}

fn invalid_config(errors: &[FieldError]) -> i32 {
    print_json(true, json!({ "status": "error", "kind": "invalid_config", "errors": errors }));
    EXIT_INVALID_CONFIG
}

fn validate(args: ValidateArgs) -> i32 {
    let path = args.config.or(args.config_file);
    let overrides = Overrides { scale: args.scale, ..Overrides::default() };
    match config::load(path.as_deref(), &overrides) {
        Ok(cfg) => {
            print_json(false, json!({ "status": "ok", "scale": cfg.scale.to_string(), "config_sha256": cfg.sha256() }));
            EXIT_OK
        }
        Err(errors) => invalid_config(&errors),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// What happened to one stage.
enum StageStatus {
    Ok,
    Flagged(Vec<String>),
    Failed(isac_core::Error),
}

fn run(args: RunArgs) -> i32 {
    let path = args.config.or(args.config_file);
    let overrides = Overrides {
        seed: args.seed,
        output_dir: args.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
        scale: args.scale,
        theta_c_deg: args.theta_c,
        theta_s_deg: args.theta_s,
    };
    let cfg = match config::load(path.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(errors) => return invalid_config(&errors),
    };
    let stages: Vec<Box<dyn Analysis>> = if args.analysis == "all" {
        analyses::registry()
    } else {
        match analyses::find(&args.analysis) {
            Some(a) => vec![a],
            None => {
                return invalid_config(&[FieldError {
                    field: "analysis".into(),
                    message: format!("unknown analysis {:?}, expected one of {:?} or \"all\"", args.analysis, analyses::names()),
                }])
            }
        }
    };
    let workers = args.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return invalid_config(&[FieldError { field: "workers".into(), message: "must be at least 1".into() }]);
    }
    match execute(&cfg, &stages, workers, args.format) {
        Ok(statuses) => report(&cfg, statuses),
        Err(e) => {
            print_json(true, json!({ "status": "error", "kind": "io", "message": e.to_string() }));
            EXIT_FAILURE
        }
    }
}

fn execute(
    cfg: &Config,
    stages: &[Box<dyn Analysis>],
    workers: usize,
    format: Format,
) -> std::io::Result<Vec<(&'static str, StageStatus)>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(std::io::Error::other)?;
    let out_dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(out_dir)?;
    let config_sha256 = cfg.sha256();
    // Each stage draws from its own named stream, so running a subset gives
    // the same numbers as `all`.
    let root = SeededRng::new(cfg.seed, 0);

    let mut records = Vec::new();
    let mut files: Vec<FileRecord> = Vec::new();
    let mut statuses = Vec::new();
    for stage in stages {
        let started = Instant::now();
        let result = pool.install(|| stage.run(cfg, root.fork(stage.name())));
        let mut record = StageRecord {
            name: stage.name().to_string(),
            wall_time_s: 0.0,
            files: Vec::new(),
            flagged: Vec::new(),
            error: None,
        };
        let status = match result {
            Ok(out) => {
                for table in &out.tables {
                    let bytes = output::render(table, format, &config_sha256)?;
                    let file = format!("{}.{}", table.name, format.extension());
                    files.push(output::write_file(out_dir, &file, &bytes)?);
                    record.files.push(file);
                }
                record.flagged = out.flagged.clone();
                if out.flagged.is_empty() {
                    StageStatus::Ok
                } else {
                    StageStatus::Flagged(out.flagged)
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                StageStatus::Failed(e)
            }
        };
        record.wall_time_s = started.elapsed().as_secs_f64();
        records.push(record);
        statuses.push((stage.name(), status));
    }

    let manifest = Manifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        seed: cfg.seed,
        scale: cfg.scale.to_string(),
        workers,
        stages: records,
        files,
    };
    let mut doc = serde_json::to_value(&manifest).map_err(std::io::Error::other)?;
    doc["config"] = serde_json::to_value(cfg).map_err(std::io::Error::other)?;
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    std::fs::write(out_dir.join("manifest.json"), bytes)?;
    Ok(statuses)
}

fn report(cfg: &Config, statuses: Vec<(&'static str, StageStatus)>) -> i32 {
    let mut failed = Vec::new();
    let mut flagged = Vec::new();
    let mut diverged = false;
    for (name, status) in statuses {
        match status {
            StageStatus::Ok => {}
            StageStatus::Flagged(notes) => flagged.push(json!({ "stage": name, "notes": notes })),
            StageStatus::Failed(e) => {
                diverged |= matches!(e, isac_core::Error::Diverged(_));
                failed.push(json!({ "stage": name, "message": e.to_string() }));
            }
        }
    }
    let manifest = Path::new(&cfg.output_dir).join("manifest.json");
    let manifest = manifest.to_string_lossy();
    if !failed.is_empty() {
        let kind = if diverged { "not_converged" } else { "solver_error" };
        print_json(true, json!({ "status": "error", "kind": kind, "failed": failed, "flagged": flagged, "manifest": manifest }));
        return if diverged { EXIT_NOT_CONVERGED } else { EXIT_FAILURE };
    }
    if !flagged.is_empty() {
        print_json(true, json!({ "status": "error", "kind": "not_converged", "flagged": flagged, "manifest": manifest }));
        return EXIT_NOT_CONVERGED;
    }
    print_json(false, json!({ "status": "ok", "manifest": manifest }));
    EXIT_OK
}

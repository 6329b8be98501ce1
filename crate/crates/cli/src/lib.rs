//! `pmfuse` command-line driver: manifest handling and pipeline stages.

pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use manifest::{Manifest, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<pmfuse_core::Error> for CliError {
    fn from(e: pmfuse_core::Error) -> Self {
        use pmfuse_core::Error as E;
        match e {
            E::Config(_) | E::Io { .. } => CliError::Validation(e.to_string()),
            E::Unsupported(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pmfuse", version, about = "Fuse mobile and fixed PM2.5 measurements into gridded maps")]
pub struct Cli {
    /// Run manifest (`key = value` lines).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fail on the first malformed input row.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Replace a seed, e.g. `forest=7` or `seed.cv_folds=3`. Repeatable.
    #[arg(long = "seed-override", global = true, value_name = "K=V")]
    pub seed_override: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the synthetic scenario into `<out>/scenario`.
    Synth,
    /// QC the inputs and write canonical copies.
    Ingest,
    /// Fit and compare the sensor correction models.
    Calibrate,
    /// Run the distance × interval resolution sweep.
    Sweep,
    /// Train and compare mapping models; predict mapped cells.
    Fuse,
    /// Build map products, statistics and the bias report.
    Map,
    /// Every stage in order; `synth` runs when `synth.enabled = true`.
    All,
}

/// Load and validate the run configuration named on the command line.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .manifest
        .as_ref()
        .ok_or_else(|| CliError::Validation("--manifest is required".into()))?;
    let mut m = Manifest::load(path)?;
    for o in &cli.seed_override {
        m.override_seed(o)?;
    }
    RunConfig::from_manifest(m, cli.out.as_deref(), cli.strict)
}

/// Execute one command against a validated configuration.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let result = match cmd {
        Command::Synth => stages::synth(cfg),
        Command::Ingest => stages::ingest(cfg),
        Command::Calibrate => stages::calibrate_stage(cfg),
        Command::Sweep => stages::sweep(cfg),
        Command::Fuse => stages::fuse(cfg),
        Command::Map => stages::map(cfg),
        Command::All => (|| {
            if cfg.synth.is_some() {
                stages::synth(cfg)?;
            }
            stages::ingest(cfg)?;
            stages::calibrate_stage(cfg)?;
            stages::sweep(cfg)?;
            stages::fuse(cfg)?;
            stages::map(cfg)
        })(),
    };
    // The run manifest reflects whatever was written, even after a failure.
    let listed = stages::write_run_manifest(&cfg.out_dir);
    result.and(listed)
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = std::panic::catch_unwind(|| -> Result<(), CliError> {
        let cfg = load_config(&cli)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
        pool.install(|| execute(cli.command, &cfg))
    });
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("pmfuse: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("pmfuse: internal error: a stage panicked");
            3
        }
    }
}

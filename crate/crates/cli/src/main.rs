//! `nevlab`: verification, classification, rendering and probe runs driven
//! by a JSON config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outputs;
use crate::config::{RunConfig, SubcommandName};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Numerical(_) => 3,
            Failure::Config(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "bad config: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    VerificationFailed,
    Unresolved,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::VerificationFailed => 2,
            Status::Unresolved => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nevlab", version, about = "Numerical laboratory for Nevanlinna functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pole, residue and preimage asymptotics with pass/fail checks.
    VerifyAsymptotics(Common),
    /// Classify the orbits of the asymptotic values.
    Classify(Common),
    /// Escape-time image of the dynamical plane.
    Render(Common),
    /// Birkhoff, escape and Ω-accumulation probes.
    Probe(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to the config's `out` or the current one.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "N", env = "NEVLAB_THREADS")]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let (name, common) = match &cli.command {
        Command::VerifyAsymptotics(c) => (SubcommandName::VerifyAsymptotics, c),
        Command::Classify(c) => (SubcommandName::Classify, c),
        Command::Render(c) => (SubcommandName::Render, c),
        Command::Probe(c) => (SubcommandName::Probe, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if cfg.subcommand != name {
        return Err(Failure::Config(format!("config is for `{:?}`, not `{name:?}`", cfg.subcommand)));
    }
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
    }
    // The output directory is not part of the embedded config, so reports
    // written to different places stay byte-identical.
    let dir = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let out = Outputs::new(&dir)?;
    match name {
        SubcommandName::VerifyAsymptotics => commands::verify_asymptotics(&cfg, &out),
        SubcommandName::Classify => commands::classify(&cfg, &out),
        SubcommandName::Render => commands::render(&cfg, &out),
        SubcommandName::Probe => commands::probe(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(failure) => {
            eprintln!("nevlab: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

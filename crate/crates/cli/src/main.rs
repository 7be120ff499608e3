//! `switchcert`: certify, synthesize and simulate stabilizing switching
//! signals for a problem file.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use switchcert::io::{self, csv, pipeline, Command, ProblemFile, Status};
use switchcert::signal::SwitchingSignal;

#[derive(Parser)]
#[command(
    name = "switchcert",
    version,
    about = "Stabilizing switching signals for switched linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Search for a certificate
    Analyze(RunArgs),
    /// Search and build the switching signal
    Synthesize(RunArgs),
    /// Simulate a given signal (requires --signal)
    Simulate(RunArgs),
    /// Search, synthesize and simulate
    Full(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem file (TOML)
    problem: PathBuf,
    /// Largest power m tried for a combination
    #[arg(long)]
    m_max: Option<u32>,
    /// Maximum number of interior vertices per path
    #[arg(long)]
    max_interior: Option<usize>,
    /// Signal length in steps
    #[arg(long)]
    horizon: Option<u64>,
    /// Number of random initial states
    #[arg(long)]
    trials: Option<usize>,
    /// Seed for the initial states
    #[arg(long)]
    seed: Option<u64>,
    /// Accept Schur-stable subsystems and try i = j combinations
    #[arg(long)]
    allow_stable: bool,
    /// Working decay rate; defaults to the largest feasible one
    #[arg(long)]
    lambda: Option<f64>,
    /// Block list (index,dwell) for simulate
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Directory for CSV artifacts
    #[arg(long)]
    emit_csv: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn apply(&self, problem: &mut ProblemFile) {
        let o = &mut problem.options;
        if let Some(v) = self.m_max {
            o.m_max = v;
        }
        if let Some(v) = self.max_interior {
            o.max_interior = Some(v);
        }
        if let Some(v) = self.horizon {
            o.horizon = v;
        }
        if let Some(v) = self.trials {
            o.trials = v;
        }
        if let Some(v) = self.seed {
            o.seed = v;
        }
        if self.allow_stable {
            o.allow_stable = true;
        }
        if let Some(v) = self.lambda {
            o.lambda = Some(v);
        }
    }
}

fn load_problem(path: &Path) -> Result<ProblemFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    io::parse_problem(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_signal(path: &Path) -> Result<SwitchingSignal> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let blocks = csv::read_blocks(file).with_context(|| format!("reading {}", path.display()))?;
    Ok(SwitchingSignal::from_blocks(blocks)?)
}

fn run(command: Command, args: &RunArgs) -> Result<Status> {
    let mut problem = load_problem(&args.problem)?;
    args.apply(&mut problem);
    if let Some(l) = args.lambda {
        anyhow::ensure!(
            l.is_finite() && l > 0.0,
            "--lambda must be positive, got {l}"
        );
    }
    let signal = args.signal.as_deref().map(load_signal).transpose()?;
    let out = io::run_pipeline(&problem, command, signal)?;

    let rendered = io::render_report(&out.report);
    match &args.output {
        Some(path) => {
            fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{rendered}"),
    }
    if let Some(dir) = &args.emit_csv {
        pipeline::write_artifacts(dir, &out)
            .with_context(|| format!("writing CSV to {}", dir.display()))?;
    }
    Ok(out.status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Status::InputError.code() as u8
            } else {
                0
            });
        }
    };
    let (command, args) = match &cli.command {
        Commands::Analyze(a) => (Command::Analyze, a),
        Commands::Synthesize(a) => (Command::Synthesize, a),
        Commands::Simulate(a) => (Command::Simulate, a),
        Commands::Full(a) => (Command::Full, a),
    };
    match run(command, args) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::InputError.code() as u8)
        }
    }
}

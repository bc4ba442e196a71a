use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqz_lab::{run, Command, ExperimentConfig, LabError};

#[derive(Parser)]
#[command(name = "eqz", version, about = "Weighted Bergman kernels, equilibrium envelopes and random zeros on P1")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Equilibrium envelope, residuals and solver cross-check
    Envelope(Common),
    /// Bergman kernel checks per degree
    Bergman(Common),
    /// Zeros of random sections
    SampleZeros(Common),
    /// Sup and L1 convergence of the Fubini-Study weights
    Convergence(Common),
    /// Equidistribution of zeros towards the equilibrium form
    Equidistribution(Common),
    /// Tail of the discrepancy between zeros and the Fubini-Study current
    Deviation(Common),
    /// Onsets along independent sequences of sections
    Sequence(Common),
    /// Twisted bundle checks on a region
    Twisted(Common),
    /// Normalizing constants of the multi-projective measure
    MpConstant(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gram cache directory (overrides the config)
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
}

impl Cmd {
    fn split(&self) -> (Command, &Common) {
        match self {
            Cmd::Envelope(c) => (Command::Envelope, c),
            Cmd::Bergman(c) => (Command::Bergman, c),
            Cmd::SampleZeros(c) => (Command::SampleZeros, c),
            Cmd::Convergence(c) => (Command::Convergence, c),
            Cmd::Equidistribution(c) => (Command::Equidistribution, c),
            Cmd::Deviation(c) => (Command::Deviation, c),
            Cmd::Sequence(c) => (Command::Sequence, c),
            Cmd::Twisted(c) => (Command::Twisted, c),
            Cmd::MpConstant(c) => (Command::MpConstant, c),
        }
    }
}

fn execute(command: Command, args: &Common) -> Result<i32, LabError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = &args.cache {
        cfg.cache_dir = Some(c.clone());
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let report = pool.build()?.install(|| run(command, &cfg))?;
    for path in report.write(&out)? {
        println!("wrote {}", path.display());
    }
    for line in report.claim_lines() {
        println!("{line}");
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

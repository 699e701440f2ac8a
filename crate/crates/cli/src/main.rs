use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lstar::experiment::{self, ExperimentConfig, ExperimentKind, OutputFormat};
use lstar::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "lstar", version, about = "Low-rank recovery and l*-CMSV experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve seeded recovery problems and check the error bounds.
    Recover(Common),
    /// Estimate l*-constrained singular values of random operators.
    Cmsv(Common),
    /// Concentration sweep over m, tau or n2.
    Montecarlo(Common),
    /// Noise-level ledger of both bound families on tiny instances.
    Bounds(Common),
    /// Calibrate lambda and mu from the distribution of ||A*(w)||.
    NoiseCal(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write only one format (default: both).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Numerical(_) => EXIT_NONCONVERGED,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Recover(a) => (ExperimentKind::Recover, a),
        Command::Cmsv(a) => (ExperimentKind::Cmsv, a),
        Command::Montecarlo(a) => (ExperimentKind::Montecarlo, a),
        Command::Bounds(a) => (ExperimentKind::Bounds, a),
        Command::NoiseCal(a) => (ExperimentKind::NoiseCalibration, a),
    };
    match run(kind, &args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lstar: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(kind: ExperimentKind, args: &Common) -> lstar::Result<u8> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Io(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.kind.name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    let format = match args.format {
        None => OutputFormat::Both,
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let output = pool.install(|| experiment::run(&cfg, format))?;

    let dir = PathBuf::from(&cfg.output_path);
    experiment::write_output(&dir, &output)?;
    for f in &output.files {
        eprintln!("wrote {}", dir.join(&f.name).display());
    }
    if output.nonconverged > 0 {
        eprintln!("lstar: {} trial(s) did not converge", output.nonconverged);
        return Ok(EXIT_NONCONVERGED);
    }
    Ok(0)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hardygap::harness::{self, cache, config::ExperimentConfig, suites, Suite};

/// Numerical laboratory for square functions, off-diagonal estimates and
/// molecular decompositions of gapped self-adjoint operators.
#[derive(Parser)]
#[command(name = "hardygap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random test fields.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Quadrature grid ratio for square functions.
    #[arg(long = "grid-ratio", global = true)]
    grid_ratio: Option<f64>,

    /// Run the selected suites concurrently.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured space; emit its JSON document and doubling fit.
    Space,
    /// Build and decompose the operator; cache the eigendata sidecar.
    Op,
    /// Vertical identity and lower-bound suite.
    Identity,
    /// Generalized Gaussian estimate suite.
    Gge,
    /// Spectral-gap decay suite.
    Decay,
    /// Reproducing formula, atoms and tail-estimate suite.
    Molecules,
    /// Hardy-norm quotient suite.
    Main,
    /// Gap sweep over shifted operators.
    Sweep,
}

fn load_config(cli: &Cli) -> hardygap::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => match cli.command {
            Command::Identity => ExperimentConfig::canonical_for(Suite::Identity),
            Command::Gge => ExperimentConfig::canonical_for(Suite::Gge),
            Command::Decay => ExperimentConfig::canonical_for(Suite::Decay),
            Command::Molecules => ExperimentConfig::canonical_for(Suite::Molecules),
            Command::Main => ExperimentConfig::canonical_for(Suite::MainTheorem),
            Command::Sweep => ExperimentConfig::canonical_for(Suite::GapSweep),
            Command::Space | Command::Op => ExperimentConfig::default(),
        },
    };
    if let Some(out) = &cli.out {
        cfg.run.out = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(ratio) = cli.grid_ratio {
        if ratio.is_nan() || ratio <= 1.0 {
            return Err(hardygap::Error::BadGridRatio(ratio));
        }
        cfg.quadrature.ratio = ratio;
    }
    if cli.parallel {
        cfg.run.parallel = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> hardygap::Result<bool> {
    let mut cfg = load_config(cli)?;
    let out = PathBuf::from(&cfg.run.out);

    let suite = match cli.command {
        Command::Space => {
            std::fs::create_dir_all(&out)?;
            let doc = suites::space_document(&cfg)?;
            let path = out.join("space.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            println!("wrote {}", path.display());
            return Ok(true);
        }
        Command::Op => {
            std::fs::create_dir_all(&out)?;
            let space = cfg.build_space()?;
            let cache_dir = out.join("cache");
            let (op, cached) = cache::load_or_compute(&cfg, &space, &cache_dir)?;
            let doc = suites::operator_document(&op, cached);
            let path = out.join("operator.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            println!("wrote {}", path.display());
            println!("eigendata sidecar: {}", cache::cache_path(&cache_dir, &cfg).display());
            let _ = op;
            return Ok(true);
        }
        Command::Identity => Suite::Identity,
        Command::Gge => Suite::Gge,
        Command::Decay => Suite::Decay,
        Command::Molecules => Suite::Molecules,
        Command::Main => Suite::MainTheorem,
        Command::Sweep => Suite::GapSweep,
    };

    cfg.run.suites = vec![suite.name().to_string()];
    let (bundle, pass) = harness::run_and_emit(&cfg, &out)?;
    for s in &bundle.suites {
        println!("[{}] {}", if s.pass { "PASS" } else { "FAIL" }, s.name);
    }
    println!("report: {}", out.join("summary.json").display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

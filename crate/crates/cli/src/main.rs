use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvxnn_cli::config::{ConfigError, ExperimentConfig, ModelKind};
use cvxnn_cli::experiment::{run_enumerate, run_gauge, run_pipeline, Pipeline, RunError};

#[derive(Parser)]
#[command(name = "cvxnn", version, about = "Convex training of two-layer ReLU networks and linear CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides `out` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overrides `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the SGD trials (0 = one per core)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the activation patterns of the dataset
    Enumerate(Common),
    /// Solve the convex program, certify it and reconstruct the network
    Solve(Common),
    /// Run the SGD trials only
    Sgd(Common),
    /// Convex optimum against SGD trials
    Compare(Common),
    /// Nuclear-norm program for a linear CNN, against factored gradient descent
    CnnNuclear(Common),
    /// DFT-domain lasso for a circular linear CNN, against gradient descent
    CnnCircular(Common),
    /// Gauge of the labels by the small-β path against the polar support
    Gauge(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn with_model(mut cfg: ExperimentConfig, kind: ModelKind) -> Result<ExperimentConfig, ConfigError> {
    if cfg.model.kind != ModelKind::Relu && cfg.model.kind != kind {
        return Err(ConfigError::Invalid(format!(
            "model kind {:?} does not match this command",
            cfg.model.kind
        )));
    }
    cfg.model.kind = kind;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: &Command) -> Result<bool, RunError> {
    let (common, stage) = match command {
        Command::Enumerate(c) => (c, None),
        Command::Solve(c) => (c, Some(Pipeline::Solve)),
        Command::Sgd(c) => (c, Some(Pipeline::Sgd)),
        Command::Compare(c) | Command::CnnNuclear(c) | Command::CnnCircular(c) => (c, Some(Pipeline::Compare)),
        Command::Gauge(c) => (c, None),
    };
    let mut cfg = load(common)?;
    match command {
        Command::CnnNuclear(_) => cfg = with_model(cfg, ModelKind::LinearCnn)?,
        Command::CnnCircular(_) => cfg = with_model(cfg, ModelKind::CircularCnn)?,
        _ => {}
    }
    match (command, stage) {
        (Command::Enumerate(_), _) => {
            let r = run_enumerate(&cfg)?;
            println!("{} patterns ({}) for n = {}, d = {}", r.pattern_count, r.pattern_source, r.n, r.d);
            Ok(true)
        }
        (Command::Gauge(_), _) => {
            let r = run_gauge(&cfg)?;
            println!(
                "gauge {:.6e}, polar support {:.6e}, relative difference {:.2e}",
                r.gauge, r.polar_support, r.relative_difference
            );
            Ok(true)
        }
        (_, Some(pipeline)) => {
            let r = run_pipeline(&cfg, pipeline)?;
            if let Some(c) = &r.convex {
                let gap = c.certified_gap.map_or("n/a".to_string(), |g| format!("{g:.2e}"));
                println!(
                    "convex optimum {:.10e}, certified gap {gap}, m* = {}, converged {}",
                    c.optimum, c.m_star, c.converged
                );
            }
            for t in &r.sgd {
                println!("trial {} (seed {}): final objective {:.10e}", t.trial, t.seed, t.final_objective);
            }
            Ok(r.converged())
        }
        (_, None) => unreachable!("every pipeline command has a stage"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: the convex solver did not reach its tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

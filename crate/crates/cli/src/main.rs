//! Command-line front end: train a run, evaluate a checkpoint, or validate
//! a config. Exit codes: 0 success, 2 config error, 3 training divergence,
//! 4 action-space cap refusal, 1 anything else.

use clap::{Parser, Subcommand, ValueEnum};
use risfed_core::checkpoint::Checkpoint;
use risfed_core::config::{self, Algorithm, RawConfig};
use risfed_core::harness;
use risfed_core::CoreError;
use std::path::{Path, PathBuf};

/// Overrides the output directory for `run` when `--out` is absent.
const OUT_DIR_VAR: &str = "RISFED_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "risfed",
    version,
    about = "Simulator and training harness for surface-assisted multi-robot downlink"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write metrics, checkpoint, and summary.
    Run {
        /// Config file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Algorithm override.
        #[arg(long, value_enum)]
        algo: Option<AlgoArg>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Episode-count override.
        #[arg(long)]
        episodes: Option<u32>,
        /// Output directory; falls back to $RISFED_OUT_DIR, then the
        /// config's run.out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy-evaluate checkpointed weights under a config; prints JSON.
    Eval {
        /// Checkpoint produced by `run`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config file (TOML); must match the checkpoint's algorithm and
        /// fleet.
        #[arg(long)]
        config: PathBuf,
        /// Optional path for a per-slot evaluation metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, printing what it resolves to.
    ValidateConfig {
        /// Config file (TOML).
        path: PathBuf,
    },
}

/// CLI algorithm names; the two baseline variants carry shorter aliases
/// than their config tags.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Fdrl,
    Central,
    Oma,
    Qoe,
}

impl AlgoArg {
    fn to_algorithm(self) -> Algorithm {
        match self {
            AlgoArg::Fdrl => Algorithm::Fdrl,
            AlgoArg::Central => Algorithm::Central,
            AlgoArg::Oma => Algorithm::OmaFdrl,
            AlgoArg::Qoe => Algorithm::QoeFdrl,
        }
    }
}

fn load_with_overrides(
    path: &Path,
    algo: Option<AlgoArg>,
    seed: Option<u64>,
    episodes: Option<u32>,
) -> Result<RawConfig, CoreError> {
    let mut raw = config::load_raw(path)?;
    if let Some(a) = algo {
        raw.run.algorithm = a.to_algorithm();
    }
    if let Some(s) = seed {
        raw.run.seed = s;
    }
    if let Some(e) = episodes {
        raw.run.episodes = e;
    }
    Ok(raw)
}

fn run_command(
    config_path: &Path,
    algo: Option<AlgoArg>,
    seed: Option<u64>,
    episodes: Option<u32>,
    out: Option<PathBuf>,
) -> Result<(), CoreError> {
    // Overrides apply before resolution: the seed feeds placement
    // generation, so it must be final by then.
    let cfg = load_with_overrides(config_path, algo, seed, episodes)?.resolve()?;
    let out_dir = out
        .or_else(|| std::env::var_os(OUT_DIR_VAR).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| {
            CoreError::invalid_config(
                "run.out_dir",
                format!("no output directory: pass --out, set ${OUT_DIR_VAR}, or set run.out_dir"),
            )
        })?;
    let summary = harness::run(&cfg, &out_dir)?;
    println!(
        "run complete: algorithm={} seed={} episodes={}",
        summary.algorithm, summary.seed, summary.episodes
    );
    println!(
        "  eval objective mean {:.6} over {} greedy episodes",
        summary.eval.objective_mean, summary.eval.episodes
    );
    println!("  artifacts in {}", out_dir.display());
    Ok(())
}

fn eval_command(
    checkpoint: &Path,
    config_path: &Path,
    out: Option<PathBuf>,
) -> Result<(), CoreError> {
    let cfg = config::load_config(config_path)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let report = harness::evaluate_checkpoint(&cfg, &ckpt, out.as_deref())?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CoreError::Domain(format!("report serialization: {e}")))?;
    println!("{json}");
    Ok(())
}

fn validate_command(path: &Path) -> Result<(), CoreError> {
    let cfg = config::load_config(path)?;
    println!("config ok: {}", path.display());
    println!(
        "  algorithm {} | {} robots | {} episodes | seed {}",
        cfg.algorithm.tag(),
        cfg.num_robots,
        cfg.episodes,
        cfg.seed
    );
    println!(
        "  map {}x{} cells | t_max {}",
        cfg.map.cells_x(),
        cfg.map.cells_y(),
        cfg.t_max
    );
    println!(
        "  surface actions {} | robot actions {} | joint {}",
        risfed_core::mdp::global_action_count(&cfg.ris),
        risfed_core::mdp::local_action_count(&cfg.power),
        harness::joint_action_count(cfg.num_robots, &cfg.power, &cfg.ris)
    );
    println!(
        "  noise power {:.3e} W | SIC threshold {:.3e} W{}",
        cfg.noise_power_w(),
        cfg.power.rho_min_w,
        if cfg.rho_min_defaulted {
            " (defaulted to noise power)"
        } else {
            ""
        }
    );
    Ok(())
}

fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::InvalidConfig { .. } | CoreError::Parse(_) => 2,
        CoreError::Divergence(_) => 3,
        CoreError::ActionSpaceCap { .. } => 4,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            algo,
            seed,
            episodes,
            out,
        } => run_command(&config, algo, seed, episodes, out),
        Command::Eval {
            checkpoint,
            config,
            out,
        } => eval_command(&checkpoint, &config, out),
        Command::ValidateConfig { path } => validate_command(&path),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

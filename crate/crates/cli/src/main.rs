//! `got`: run, replicate and analyze Game-of-Thrones bandit experiments.
//!
//! Subcommands:
//! ```text
//!   run <cfg>            one game, CSV series into --out
//!   batch <cfg>          replicated batch, aggregated CSV series
//!   assign <matrix>      exact assignment solution of a means matrix
//!   analyze-chain <cfg>  exact stationary analysis over a list of
//!                        exploration rates
//!   bounds <cfg>         closed-form exploration error bounds per epoch
//! ```
//!
//! The GOT_THREADS environment variable caps worker threads for batches.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use got_core::assignment::AssignmentResult;
use got_core::bounds::{exploration_bound, BoundParams};
use got_core::chain;
use got_core::experiment::{self, fmt_float, ChainReportRow, OutputKind};

#[derive(Parser)]
#[command(
    name = "got",
    version,
    about = "Fully distributed multi-player bandit simulation and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one game with the config's own seed and emit its series
    Run {
        cfg: PathBuf,
        /// Override the game seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV files
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the downsampling stride (turns per emitted row)
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Run a replicated batch and emit mean/stderr series
    Batch {
        cfg: PathBuf,
        /// Override the batch seed base
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the replication count
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Solve the assignment problem on a matrix file ("N M" header row)
    Assign { matrix: PathBuf },
    /// Exact chain analysis: stationary mass of the optimal state, mixing
    /// time and the exploration-rate threshold, per epsilon
    AnalyzeChain {
        cfg: PathBuf,
        /// Optional CSV destination
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exploration error bounds per epoch
    Bounds {
        cfg: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config for `analyze-chain`: utilities inline or from a matrix file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeChainConfig {
    #[serde(default)]
    utilities: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    utilities_file: Option<PathBuf>,
    epsilons: Vec<f64>,
    c: f64,
}

/// Config for `bounds`: objectives inline or derived from a means file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    players: usize,
    arms: usize,
    c1: f64,
    #[serde(default)]
    delta: f64,
    sigma_max: f64,
    b_max: f64,
    #[serde(default)]
    j1: Option<f64>,
    #[serde(default)]
    j2: Option<f64>,
    #[serde(default)]
    means_file: Option<PathBuf>,
    epochs: Vec<u32>,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn workers_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var("GOT_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| anyhow!("GOT_THREADS must be a positive integer, got {v:?}"))?;
            if n == 0 {
                bail!("GOT_THREADS must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn dispatch() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let workers = workers_from_env()?;
    match cli.command {
        Command::Run { cfg, seed, out, stride } => {
            let mut config = experiment::load_experiment_config(&cfg)?;
            if let Some(seed) = seed {
                config.game.seed = seed;
            }
            if let Some(stride) = stride {
                config.downsample_stride = stride;
            }
            let result = experiment::run_single(&config, workers)?;
            write_batch_outputs(&result, &out)?;
            report_batch(&result);
            Ok(())
        }
        Command::Batch { cfg, seed, out, replications, stride } => {
            let mut config = experiment::load_experiment_config(&cfg)?;
            if let Some(seed) = seed {
                config.seed_base = seed;
            }
            if let Some(replications) = replications {
                config.replications = replications;
            }
            if let Some(stride) = stride {
                config.downsample_stride = stride;
            }
            let result = experiment::run_batch(&config, workers)?;
            write_batch_outputs(&result, &out)?;
            report_batch(&result);
            Ok(())
        }
        Command::Assign { matrix } => {
            let means = experiment::parse_matrix_file(&matrix)?;
            let result = AssignmentResult::analyze(&means)?;
            print_assignment(&result);
            Ok(())
        }
        Command::AnalyzeChain { cfg, out } => analyze_chain(&cfg, out.as_deref()),
        Command::Bounds { cfg, out } => bounds(&cfg, out.as_deref()),
    }
}

fn write_batch_outputs(
    result: &experiment::BatchResult,
    out: &Path,
) -> anyhow::Result<()> {
    for series in &result.series {
        let path = out.join(format!("{}.csv", series.kind.file_stem()));
        experiment::emit_csv(series, &path)?;
        println!("wrote {}", path.display());
    }
    if let Some(report) = &result.chain_report {
        let path = out.join(format!("{}.csv", OutputKind::ChainReport.file_stem()));
        experiment::emit_chain_csv(report, &path)?;
        println!("wrote {}", path.display());
    }
    let path = out.join("summary.csv");
    experiment::emit_summaries_csv(&result.summaries, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn report_batch(result: &experiment::BatchResult) {
    let n = result.summaries.len() as f64;
    let mean_regret: f64 = result.summaries.iter().map(|s| s.final_regret).sum::<f64>() / n;
    let mean_ratio: f64 = result.summaries.iter().map(|s| s.final_ratio).sum::<f64>() / n;
    println!(
        "{} replication(s): mean final regret {mean_regret:.3}, mean final utility ratio {mean_ratio:.4}",
        result.summaries.len()
    );
}

fn print_assignment(result: &AssignmentResult) {
    let allocation = result
        .allocation
        .iter()
        .map(|a| (a + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ");
    println!("allocation (1-based arms per player): {allocation}");
    println!("J1     = {}", result.j1);
    println!("J2     = {}", result.j2);
    println!("margin = {}  ((J1 - J2) / 2N)", result.margin);
}

fn analyze_chain(cfg: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(cfg)
        .with_context(|| format!("reading {}", cfg.display()))?;
    let config: AnalyzeChainConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", cfg.display()))?;
    let (utilities, source) = match (&config.utilities, &config.utilities_file) {
        (Some(u), None) => (u.clone(), "inline".to_string()),
        (None, Some(path)) => (
            experiment::parse_matrix_file(path)?,
            path.display().to_string(),
        ),
        _ => bail!("config must set exactly one of utilities / utilities_file"),
    };
    if config.epsilons.is_empty() {
        bail!("epsilons list is empty");
    }
    let threshold = chain::epsilon_threshold(&utilities, config.c)?;
    println!(
        "utilities: {source} ({} players x {} arms), c = {}",
        utilities.len(),
        utilities[0].len(),
        config.c
    );
    println!("epsilon,pi_zstar,mixing_time,threshold");
    let mut rows = Vec::new();
    for &epsilon in &config.epsilons {
        let model = chain::build_chain(&utilities, epsilon, config.c)?;
        let (_, pi_zstar) = chain::pi_optimal(&model)?;
        let mixing_time = model.mixing_time(0.125)?;
        println!("{epsilon},{pi_zstar:.9},{mixing_time},{threshold:.9}");
        rows.push(ChainReportRow { epsilon, pi_zstar, mixing_time, threshold });
    }
    if let Some(out) = out {
        experiment::emit_chain_csv(&rows, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn bounds(cfg: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(cfg)
        .with_context(|| format!("reading {}", cfg.display()))?;
    let config: BoundsConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", cfg.display()))?;
    let (j1, j2) = match (&config.means_file, config.j1, config.j2) {
        (Some(path), None, None) => {
            let means = experiment::parse_matrix_file(path)?;
            let result = AssignmentResult::analyze(&means)?;
            (result.j1, result.j2)
        }
        (None, Some(j1), Some(j2)) => (j1, j2),
        _ => bail!("config must set either means_file or both j1 and j2"),
    };
    if config.epochs.is_empty() {
        bail!("epochs list is empty");
    }
    let params = BoundParams {
        players: config.players,
        arms: config.arms,
        c1: config.c1,
        delta: config.delta,
        sigma_max: config.sigma_max,
        b_max: config.b_max,
        j1,
        j2,
    };
    println!("k,w,p_ek,p_union,p_ek_raw,p_union_raw");
    let mut csv = String::from("k,w,p_ek,p_union,p_ek_raw,p_union_raw\n");
    for &k in &config.epochs {
        let b = exploration_bound(&params, k)?;
        println!(
            "{k},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            b.w, b.p_ek, b.p_union, b.p_ek_raw, b.p_union_raw
        );
        csv.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            fmt_float(b.w),
            fmt_float(b.p_ek),
            fmt_float(b.p_union),
            fmt_float(b.p_ek_raw),
            fmt_float(b.p_union_raw)
        ));
    }
    if let Some(out) = out {
        std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

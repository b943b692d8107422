//! Experiment orchestration: config files, seed batches, aggregation and
//! bit-stable CSV emission.
//!
//! A batch runs `replications` independent games with seeds
//! seed_base, seed_base + 1, ... and folds the sampled curves into mean
//! and standard-error series. Workers only affect wall-clock time: results
//! are collected in replication order, so output bytes are a pure function
//! of (config, seed_base).

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::chain;
use crate::engine::{self, GameConfig, RegretBaseline};
use crate::error::{Error, Result};
use crate::reward::RewardKind;
use crate::rng::{RngFactory, StreamDomain};
use crate::trace::Phase;
use rand::Rng;

/// Series kinds a batch can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Cumulative regret against t * J1.
    RegretCurve,
    /// Cumulative sum of utilities per turn, normalized by J1.
    UtilityRatio,
    /// Cumulative occupancy of the optimal all-content state over
    /// trial-and-error turns.
    Occupancy,
    /// Exact chain analysis of the game's expected means (small instances).
    ChainReport,
}

impl OutputKind {
    pub fn file_stem(&self) -> &'static str {
        match self {
            OutputKind::RegretCurve => "regret_curve",
            OutputKind::UtilityRatio => "utility_ratio",
            OutputKind::Occupancy => "occupancy",
            OutputKind::ChainReport => "chain_report",
        }
    }
}

/// Per-replication means randomization: entries drawn uniformly from
/// [low, high] (requires a Gaussian reward spec as the template).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansRange {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    #[serde(default = "default_replications")]
    pub replications: u32,
    pub seed_base: u64,
    pub outputs: Vec<OutputKind>,
    #[serde(default = "default_stride")]
    pub downsample_stride: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomize_means: Option<MeansRange>,
    #[serde(default)]
    pub regret_baseline: RegretBaseline,
}

fn default_replications() -> u32 {
    1
}

fn default_stride() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.downsample_stride == 0 {
            return Err(Error::InvalidConfig("downsample_stride must be >= 1".into()));
        }
        if let Some(range) = &self.randomize_means {
            if !(range.low > 0.0 && range.high > range.low && range.high.is_finite()) {
                return Err(Error::InvalidConfig(
                    "randomize_means needs 0 < low < high".into(),
                ));
            }
            if !matches!(self.game.reward.kind, RewardKind::IidGaussian { .. }) {
                return Err(Error::InvalidConfig(
                    "randomize_means requires a Gaussian reward spec".into(),
                ));
            }
            if self.outputs.contains(&OutputKind::ChainReport) {
                return Err(Error::InvalidConfig(
                    "chain_report is undefined with randomized means".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One row of an emitted series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub turn: u64,
    pub epoch: u32,
    pub phase: Phase,
    pub mean: f64,
    pub stderr: f64,
    pub n_seeds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub kind: OutputKind,
    pub rows: Vec<SeriesRow>,
}

/// Headline numbers of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub j1: f64,
    pub allocation: Vec<usize>,
    pub final_regret: f64,
    pub final_ratio: f64,
    pub exploit_accuracy: Option<f64>,
    pub exploit_accuracy_from_epoch3: Option<f64>,
    pub got_occupancy: Option<f64>,
}

/// One row of the exact chain report.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReportRow {
    pub epsilon: f64,
    pub pi_zstar: f64,
    pub mixing_time: u64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub series: Vec<Series>,
    pub summaries: Vec<SeedSummary>,
    pub chain_report: Option<Vec<ChainReportRow>>,
}

struct SeedOutcome {
    summary: SeedSummary,
    labels: Vec<(u32, Phase)>,
    curves: Vec<(OutputKind, Vec<f64>)>,
}

/// 1-based sample turns: stride, 2*stride, ..., capped at the horizon;
/// exactly ceil(horizon / stride) rows, the last always at the horizon.
pub fn sample_turns(horizon: u64, stride: u64) -> Vec<u64> {
    assert!(stride >= 1 && horizon >= 1);
    let rows = horizon.div_ceil(stride);
    (1..=rows).map(|i| (i * stride).min(horizon)).collect()
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let mut game = config.game.clone();
    game.seed = seed;
    if let Some(range) = &config.randomize_means {
        let mut rng = RngFactory::new(seed).stream(StreamDomain::MeansInit, 0);
        if let RewardKind::IidGaussian { means, .. } = &mut game.reward.kind {
            for row in means.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.random_range(range.low..=range.high);
                }
            }
        }
    }
    let expected = game.reward.expected_means();
    let (allocation, j1) = assignment::optimal_assignment(&expected)?;
    let trace = engine::run_game(&game)?;
    let samples = sample_turns(game.horizon, config.downsample_stride);
    let labels: Vec<(u32, Phase)> = samples
        .iter()
        .map(|&t| trace.epoch_phase_at(t - 1))
        .collect();

    let mut curves = Vec::new();
    for kind in &config.outputs {
        let values = match kind {
            OutputKind::RegretCurve => match config.regret_baseline {
                RegretBaseline::Expected => trace.regret_at_turns(j1, &samples),
                RegretBaseline::Resampled => {
                    let factory = RngFactory::new(seed);
                    let full = engine::resampled_regret_curve(
                        &trace,
                        &game.reward,
                        &allocation,
                        &factory,
                    )?;
                    samples.iter().map(|&t| full[(t - 1) as usize]).collect()
                }
            },
            OutputKind::UtilityRatio => trace.utility_ratio_at_turns(j1, &samples),
            OutputKind::Occupancy => trace.got_occupancy_at_turns(&allocation, &samples),
            OutputKind::ChainReport => continue,
        };
        curves.push((*kind, values));
    }

    let summary = SeedSummary {
        seed,
        j1,
        final_regret: *trace.regret_at_turns(j1, &[game.horizon]).first().unwrap(),
        final_ratio: *trace
            .utility_ratio_at_turns(j1, &[game.horizon])
            .first()
            .unwrap(),
        exploit_accuracy: trace.exploitation_accuracy(&allocation),
        exploit_accuracy_from_epoch3: trace.exploitation_accuracy_from_epoch(&allocation, 3),
        got_occupancy: trace.got_occupancy(&allocation),
        allocation,
    };
    Ok(SeedOutcome { summary, labels, curves })
}

fn chain_report(config: &ExperimentConfig) -> Result<Vec<ChainReportRow>> {
    let game = &config.game;
    let utilities = game.reward.expected_means();
    let c = game.resolved_c();
    let model = chain::build_chain(&utilities, game.epsilon, c)?;
    let (_, pi_zstar) = chain::pi_optimal(&model)?;
    let mixing = model.mixing_time(0.125)?;
    let threshold = chain::epsilon_threshold(&utilities, c)?;
    Ok(vec![ChainReportRow {
        epsilon: game.epsilon,
        pi_zstar,
        mixing_time: mixing,
        threshold,
    }])
}

/// Runs the batch. `workers` caps the worker threads (None uses the rayon
/// default); any replication failure aborts the whole batch.
pub fn run_batch(config: &ExperimentConfig, workers: Option<usize>) -> Result<BatchResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let seeds: Vec<u64> = (0..config.replications)
        .map(|i| config.seed_base.wrapping_add(i as u64))
        .collect();
    let outcomes: Result<Vec<SeedOutcome>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(config, seed))
            .collect()
    });
    let outcomes = outcomes?;

    let n_seeds = outcomes.len() as u32;
    let labels = &outcomes[0].labels;
    let samples = sample_turns(config.game.horizon, config.downsample_stride);
    let mut series = Vec::new();
    for kind in config
        .outputs
        .iter()
        .filter(|k| **k != OutputKind::ChainReport)
    {
        let per_seed: Vec<&Vec<f64>> = outcomes
            .iter()
            .map(|o| {
                &o.curves
                    .iter()
                    .find(|(k, _)| k == kind)
                    .expect("every seed computed every requested curve")
                    .1
            })
            .collect();
        let rows: Vec<SeriesRow> = (0..samples.len())
            .map(|s| {
                let values: Vec<f64> = per_seed.iter().map(|curve| curve[s]).collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let stderr = if values.len() > 1 {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                        / (values.len() - 1) as f64;
                    (var / values.len() as f64).sqrt()
                } else {
                    0.0
                };
                SeriesRow {
                    turn: samples[s],
                    epoch: labels[s].0,
                    phase: labels[s].1,
                    mean,
                    stderr,
                    n_seeds,
                }
            })
            .collect();
        series.push(Series { kind: *kind, rows });
    }

    let chain_report = if config.outputs.contains(&OutputKind::ChainReport) {
        Some(chain_report(config)?)
    } else {
        None
    };

    Ok(BatchResult {
        series,
        summaries: outcomes.into_iter().map(|o| o.summary).collect(),
        chain_report,
    })
}

/// Runs the configured game once with its own seed (a batch of one).
pub fn run_single(config: &ExperimentConfig, workers: Option<usize>) -> Result<BatchResult> {
    let single = ExperimentConfig {
        replications: 1,
        seed_base: config.game.seed,
        ..config.clone()
    };
    run_batch(&single, workers)
}

/// Floats rendered with 17 significant digits, enough to round-trip f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a series as CSV: `turn,epoch,phase,mean_value,stderr,n_seeds`,
/// LF line endings, floats round-trippable.
pub fn emit_csv(series: &Series, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (series.rows.len() + 1));
    out.push_str("turn,epoch,phase,mean_value,stderr,n_seeds\n");
    for row in &series.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.turn,
            row.epoch,
            row.phase,
            fmt_float(row.mean),
            fmt_float(row.stderr),
            row.n_seeds
        ));
    }
    write_file(path, out.as_bytes())
}

/// Writes per-seed summaries: allocation arms are printed 1-based,
/// dash-separated; absent fractions are empty fields.
pub fn emit_summaries_csv(summaries: &[SeedSummary], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "seed,j1,allocation,final_regret,final_ratio,exploit_accuracy,\
         exploit_accuracy_from_epoch3,got_occupancy\n",
    );
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    for s in summaries {
        let allocation = s
            .allocation
            .iter()
            .map(|a| (a + 1).to_string())
            .collect::<Vec<_>>()
            .join("-");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.seed,
            fmt_float(s.j1),
            allocation,
            fmt_float(s.final_regret),
            fmt_float(s.final_ratio),
            opt(s.exploit_accuracy),
            opt(s.exploit_accuracy_from_epoch3),
            opt(s.got_occupancy),
        ));
    }
    write_file(path, out.as_bytes())
}

/// Writes an exact chain report: `epsilon,pi_zstar,mixing_time,threshold`.
pub fn emit_chain_csv(rows: &[ChainReportRow], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("epsilon,pi_zstar,mixing_time,threshold\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(r.epsilon),
            fmt_float(r.pi_zstar),
            r.mixing_time,
            fmt_float(r.threshold)
        ));
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(path, e))?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn config_to_json(config: &ExperimentConfig) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}

/// Parses a matrix file: first line "N M", then N whitespace-separated
/// rows of M reals.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut tokens = text.split_whitespace();
    let mut next_num = |what: &str| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("matrix file ended before {what}")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let n = next_num("row count")? as usize;
    let m = next_num("column count")? as usize;
    if n == 0 || m == 0 {
        return Err(Error::Parse("matrix dimensions must be positive".into()));
    }
    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        let mut row = Vec::with_capacity(m);
        for c in 0..m {
            row.push(next_num(&format!("entry ({r}, {c})"))?);
        }
        rows.push(row);
    }
    if tokens.next().is_some() {
        return Err(Error::Parse("trailing data after matrix entries".into()));
    }
    Ok(rows)
}

pub fn parse_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

//! The synchronized turn loop.
//!
//! Epochs run back to back until the horizon is exhausted; the horizon is
//! never revealed to the agents. Epoch k consists of an exploration phase
//! of ceil(c1 * k^delta) turns, a trial-and-error phase of
//! ceil(c2 * k^delta) turns and an exploitation phase of ceil(c3 * 2^k)
//! turns. Each turn the engine collects all actions, resolves collisions,
//! samples rewards and hands every agent exactly her own
//! (reward, indicator) pair and nothing else.

use serde::{Deserialize, Serialize};

use crate::agent::{AgentParams, BaselineSource, CollisionSignal, GotAgent, DEFAULT_ESTIMATE_FLOOR};
use crate::error::{Error, Result};
use crate::reward::{sample_rewards_into, RewardKind, RewardProcessState, RewardRng, RewardSpec};
use crate::rng::{RngFactory, Stream, StreamDomain};
use crate::trace::{RunTrace, TraceDetail};
use rand_distr::Distribution;

pub use crate::trace::{Phase, PhaseSegment};

/// Epoch scheduling mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Doubling epochs: the standard schedule.
    Epochs,
    /// One exploration phase of c1 turns, one trial-and-error phase of c2
    /// turns, then exploitation until the horizon.
    SingleEpoch,
}

/// The content-escape exponent: either fixed, or derived from the phase
/// length so that a trial-and-error phase sees about two escapes in total
/// (eps^c = 2 / (c2 * N)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CExponent {
    Auto,
    Fixed(f64),
}

impl Serialize for CExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CExponent::Auto => s.serialize_str("auto"),
            CExponent::Fixed(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for CExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::String(s) if s == "auto" => Ok(CExponent::Auto),
            serde_json::Value::Number(x) => x
                .as_f64()
                .map(CExponent::Fixed)
                .ok_or_else(|| D::Error::custom("c_exponent must be a real number")),
            other => Err(D::Error::custom(format!(
                "c_exponent must be \"auto\" or a number, got {other}"
            ))),
        }
    }
}

/// How the regret baseline term is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegretBaseline {
    /// t * J1; no Monte-Carlo noise from the oracle side.
    #[default]
    Expected,
    /// Resample the optimal profile's utilities every turn.
    Resampled,
}

/// All parameters of one game run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    #[serde(alias = "n")]
    pub players: usize,
    #[serde(alias = "m")]
    pub arms: usize,
    #[serde(alias = "t")]
    pub horizon: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(default = "default_c_exponent")]
    pub c_exponent: CExponent,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_reuse")]
    pub reuse_samples: bool,
    /// How trial-and-error baselines are seeded from the reference epoch.
    #[serde(default)]
    pub baseline_source: BaselineSource,
    pub reward: RewardSpec,
}

fn default_c_exponent() -> CExponent {
    CExponent::Auto
}

fn default_mode() -> Mode {
    Mode::Epochs
}

fn default_reuse() -> bool {
    true
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.players == 0 {
            return Err(Error::InvalidConfig("need at least one player".into()));
        }
        if self.arms < self.players {
            return Err(Error::NotEnoughArms {
                players: self.players,
                arms: self.arms,
            });
        }
        if self.arms > u8::MAX as usize {
            return Err(Error::InvalidConfig("at most 255 arms are supported".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::InvalidConfig("delta must be >= 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig("epsilon must lie in (0, 1)".into()));
        }
        let c = self.resolved_c();
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "escape exponent resolves to {c}; it must be positive \
                 (auto requires c2 * players > 2)"
            )));
        }
        self.reward.validate()?;
        if self.reward.players() != self.players || self.reward.arms() != self.arms {
            return Err(Error::InvalidConfig(format!(
                "reward spec is {}x{}, game is {}x{}",
                self.reward.players(),
                self.reward.arms(),
                self.players,
                self.arms
            )));
        }
        Ok(())
    }

    /// The escape exponent in effect: fixed, or
    /// log(2 / (c2 N)) / log(epsilon) when auto.
    pub fn resolved_c(&self) -> f64 {
        match self.c_exponent {
            CExponent::Fixed(c) => c,
            CExponent::Auto => {
                (2.0 / (self.c2 * self.players as f64)).ln() / self.epsilon.ln()
            }
        }
    }
}

/// Phase lengths of epoch `k`:
/// (ceil(c1 k^delta), ceil(c2 k^delta), ceil(c3 2^k)), saturating.
pub fn phase_lengths(k: u32, config: &GameConfig) -> (u64, u64, u64) {
    let poly = (k as f64).powf(config.delta);
    let to_len = |x: f64| {
        if x >= u64::MAX as f64 {
            u64::MAX
        } else {
            x.ceil() as u64
        }
    };
    (
        to_len(config.c1 * poly),
        to_len(config.c2 * poly),
        to_len(config.c3 * 2f64.powi(k.min(1 << 16) as i32)),
    )
}

/// The engine's view of one player. Observation methods receive exactly
/// the player's own action, realized reward and no-collision indicator,
/// so a policy cannot read anything global.
pub trait Policy {
    fn explore_action(&mut self, rng: &mut Stream) -> usize;
    fn got_action(&mut self, rng: &mut Stream) -> usize;
    fn exploitation_action(&mut self, epoch: u32) -> usize;
    fn reset_for_got_phase(&mut self, epoch: u32, rng: &mut Stream);
    fn end_got_phase(&mut self, epoch: u32);
    fn observe_exploration(&mut self, arm: usize, reward: f64, no_collision: bool);
    fn observe_got(&mut self, arm: usize, reward: f64, no_collision: bool, rng: &mut Stream);
    fn observe_exploitation(&mut self, arm: usize, reward: f64, no_collision: bool);
    /// Mood introspection for instrumentation only.
    fn is_content(&self) -> bool;
}

impl Policy for GotAgent {
    fn explore_action(&mut self, rng: &mut Stream) -> usize {
        GotAgent::explore_action(self, rng)
    }
    fn got_action(&mut self, rng: &mut Stream) -> usize {
        GotAgent::got_action(self, rng)
    }
    fn exploitation_action(&mut self, epoch: u32) -> usize {
        let arm = GotAgent::exploitation_action(self, epoch);
        self.note_exploitation_action(epoch, arm);
        arm
    }
    fn reset_for_got_phase(&mut self, epoch: u32, rng: &mut Stream) {
        GotAgent::reset_for_got_phase(self, epoch, rng)
    }
    fn end_got_phase(&mut self, epoch: u32) {
        GotAgent::end_got_phase(self, epoch)
    }
    fn observe_exploration(&mut self, arm: usize, reward: f64, no_collision: bool) {
        GotAgent::observe_exploration(self, arm, reward, no_collision)
    }
    fn observe_got(&mut self, arm: usize, reward: f64, no_collision: bool, rng: &mut Stream) {
        GotAgent::observe_got(self, arm, reward, no_collision, rng)
    }
    fn observe_exploitation(&mut self, arm: usize, reward: f64, no_collision: bool) {
        GotAgent::observe_exploitation(self, arm, reward, no_collision)
    }
    fn is_content(&self) -> bool {
        GotAgent::is_content(self)
    }
}

fn build_agents(config: &GameConfig) -> Result<Vec<GotAgent>> {
    let signal = if config.reward.indicator_observable() {
        CollisionSignal::Explicit
    } else {
        CollisionSignal::ZeroReward
    };
    (0..config.players)
        .map(|_| {
            GotAgent::new(AgentParams {
                arms: config.arms,
                epsilon: config.epsilon,
                c: config.resolved_c(),
                floor: DEFAULT_ESTIMATE_FLOOR,
                signal,
                reuse_samples: config.reuse_samples,
                baseline_source: config.baseline_source,
            })
        })
        .collect()
}

/// Runs one game with the standard agents, recording a compact trace.
pub fn run_game(config: &GameConfig) -> Result<RunTrace> {
    let agents = build_agents(config)?;
    run_game_with_policies(config, agents, TraceDetail::Compact)
}

/// Runs one game recording per-player utilities as well.
pub fn run_game_detailed(config: &GameConfig) -> Result<RunTrace> {
    let agents = build_agents(config)?;
    run_game_with_policies(config, agents, TraceDetail::PerPlayer)
}

/// Runs one game with caller-supplied policies (used by instrumentation
/// tests; the trace is a pure function of (config, seed, policies)).
pub fn run_game_with_policies<P: Policy>(
    config: &GameConfig,
    mut policies: Vec<P>,
    detail: TraceDetail,
) -> Result<RunTrace> {
    config.validate()?;
    if policies.len() != config.players {
        return Err(Error::InvalidConfig(format!(
            "{} policies supplied for {} players",
            policies.len(),
            config.players
        )));
    }
    let n = config.players;
    let factory = RngFactory::new(config.seed);
    let mut agent_rngs: Vec<Stream> = (0..n)
        .map(|i| factory.stream(StreamDomain::Agent, i as u64))
        .collect();
    let mut reward_rng = RewardRng::new(&factory, n, config.arms);
    let mut reward_state = RewardProcessState::new(&config.reward);
    let mut trace = RunTrace::builder(n, config.arms, detail, config.horizon);

    let mut actions = vec![0usize; n];
    let mut utilities = vec![0.0; n];
    let mut no_collision = vec![false; n];
    let mut occupancy = vec![0u8; config.arms];
    let mut exploit_actions = vec![0usize; n];

    let horizon = config.horizon;
    let mut turn: u64 = 0;
    let mut epoch: u32 = 1;
    'run: loop {
        let lengths = match config.mode {
            Mode::Epochs => phase_lengths(epoch, config),
            Mode::SingleEpoch => {
                (config.c1.ceil() as u64, config.c2.ceil() as u64, horizon)
            }
        };
        for (phase, scheduled) in [
            (Phase::Exploration, lengths.0),
            (Phase::Got, lengths.1),
            (Phase::Exploitation, lengths.2),
        ] {
            if turn == horizon {
                break 'run;
            }
            let len = scheduled.min(horizon - turn);
            if len == 0 {
                continue;
            }
            match phase {
                Phase::Exploration => {}
                Phase::Got => {
                    for (p, rng) in policies.iter_mut().zip(&mut agent_rngs) {
                        p.reset_for_got_phase(epoch, rng);
                    }
                }
                Phase::Exploitation => {
                    for (p, slot) in policies.iter_mut().zip(&mut exploit_actions) {
                        *slot = p.exploitation_action(epoch);
                    }
                }
            }
            trace.push_segment(epoch, phase, len);
            for _ in 0..len {
                for (i, p) in policies.iter_mut().enumerate() {
                    actions[i] = match phase {
                        Phase::Exploration => p.explore_action(&mut agent_rngs[i]),
                        Phase::Got => p.got_action(&mut agent_rngs[i]),
                        Phase::Exploitation => exploit_actions[i],
                    };
                }
                sample_rewards_into(
                    &config.reward,
                    &mut reward_state,
                    &actions,
                    &mut reward_rng,
                    &mut utilities,
                    &mut no_collision,
                    &mut occupancy,
                );
                for (i, p) in policies.iter_mut().enumerate() {
                    match phase {
                        Phase::Exploration => {
                            p.observe_exploration(actions[i], utilities[i], no_collision[i])
                        }
                        Phase::Got => p.observe_got(
                            actions[i],
                            utilities[i],
                            no_collision[i],
                            &mut agent_rngs[i],
                        ),
                        Phase::Exploitation => {
                            p.observe_exploitation(actions[i], utilities[i], no_collision[i])
                        }
                    }
                }
                let all_content =
                    phase == Phase::Got && policies.iter().all(|p| p.is_content());
                trace.push_turn(&actions, &utilities, all_content);
                turn += 1;
            }
            if phase == Phase::Got {
                for p in policies.iter_mut() {
                    p.end_got_phase(epoch);
                }
            }
        }
        if config.mode == Mode::SingleEpoch {
            break;
        }
        epoch += 1;
    }
    Ok(trace.finish())
}

/// Cumulative regret with the baseline term resampled each turn instead of
/// taken in expectation. Only defined for i.i.d. reward kinds; a rested
/// chain has no per-turn distribution independent of the pull history.
pub fn resampled_regret_curve(
    trace: &RunTrace,
    spec: &RewardSpec,
    a_star: &[usize],
    factory: &RngFactory,
) -> Result<Vec<f64>> {
    let sigma = match &spec.kind {
        RewardKind::IidGaussian { variance, .. } => variance.sqrt(),
        RewardKind::IidCustomTable { .. } => 0.0,
        RewardKind::Markovian { .. } => {
            return Err(Error::InvalidConfig(
                "resampled regret baseline requires i.i.d. rewards".into(),
            ))
        }
    };
    let mut rng = factory.stream(StreamDomain::Environment, 0);
    let mut out = Vec::with_capacity(trace.turns() as usize);
    let mut acc = 0.0;
    for t in 0..trace.turns() {
        let baseline: f64 = match &spec.kind {
            RewardKind::IidGaussian { means, .. } => a_star
                .iter()
                .enumerate()
                .map(|(n, &arm)| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    means[n][arm] + sigma * z
                })
                .sum(),
            RewardKind::IidCustomTable { tables } => a_star
                .iter()
                .enumerate()
                .map(|(n, &arm)| tables[n][arm].sample_with(&mut rng))
                .sum(),
            RewardKind::Markovian { .. } => unreachable!(),
        };
        acc += baseline - trace.total_utility_at(t);
        out.push(acc);
    }
    Ok(out)
}

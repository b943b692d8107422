//! One player's fully distributed policy.
//!
//! An agent sees only her own action, her realized reward and (when the
//! reward process makes it observable) her collision indicator. She keeps
//! running mean estimates per arm from collision-free exploration samples,
//! and during the trial-and-error phase runs the content/discontent
//! dynamics over those estimates:
//!
//! - A content player repeats her baseline arm, deviating with probability
//!   eps^c spread uniformly over the other arms; a discontent player picks
//!   uniformly at random.
//! - A content player on her baseline with positive utility stays content.
//!   Otherwise she becomes content on the played arm with probability
//!   (u / u_max) * eps^(u_max - u), else discontent, so collisions (u = 0)
//!   force discontent.
//!
//! The utility fed to the mood update is the agent's own frozen estimate
//! of the played arm (zero on collision), never the raw reward: the induced
//! game must be time-invariant within a phase. Per-arm content counts are
//! kept per phase; exploitation plays the argmax of the counts summed over
//! the last floor(k/2) + 1 phases.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use rand::Rng;

/// Estimates used inside the mood update are clamped below by this floor;
/// unobserved arms default to it. Keeps the acceptance probability well
/// defined when finite samples produce zero or negative estimates.
pub const DEFAULT_ESTIMATE_FLOOR: f64 = 1e-6;

/// Personal mood of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mood {
    Content,
    Discontent,
}

/// How the agent learns whether she collided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollisionSignal {
    /// Continuous rewards: a reward of exactly zero means collision, and
    /// the explicit indicator must be ignored.
    ZeroReward,
    /// Discrete/Markovian rewards: the indicator is delivered explicitly.
    Explicit,
}

/// Where the baseline of trial-and-error phase k comes from (epoch
/// k - floor(k/2) - 1 in either case; uniform random for k = 1, 2).
///
/// The single-sample rule takes the reference phase's last played action;
/// a phase that ends mid-cascade then seeds a bad baseline, and with few
/// expected escapes per phase a badly seeded phase can stay wrong
/// throughout. The exploitation rule takes the majority-voted arm the
/// player exploited in the reference epoch instead, which suppresses that
/// failure mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    /// Last action played in the reference trial-and-error phase.
    #[default]
    GotLast,
    /// Arm exploited in the reference epoch.
    Exploitation,
}

#[derive(Debug, Clone)]
pub struct AgentParams {
    pub arms: usize,
    pub epsilon: f64,
    pub c: f64,
    pub floor: f64,
    pub signal: CollisionSignal,
    /// Feed trial-and-error and exploitation samples back into the mean
    /// estimates (estimates stay frozen within each phase regardless).
    pub reuse_samples: bool,
    pub baseline_source: BaselineSource,
}

#[derive(Debug, Clone)]
struct PhaseCounts {
    epoch: u32,
    counts: Vec<u64>,
}

/// Field-for-field dump of an agent, for debugging and instrumentation.
#[derive(Debug, Clone, Serialize)]
pub struct AgentSnapshot {
    pub mood: Mood,
    pub baseline: usize,
    pub visit_count: Vec<u64>,
    pub reward_sum: Vec<f64>,
    pub estimates: Vec<Option<f64>>,
    pub frozen_utilities: Vec<f64>,
    pub frozen_u_max: f64,
    pub phase_freq: Vec<(u32, Vec<u64>)>,
}

#[derive(Debug, Clone)]
pub struct GotAgent {
    params: AgentParams,
    mood: Mood,
    baseline: usize,
    visit_count: Vec<u64>,
    reward_sum: Vec<f64>,
    /// Estimates snapshot (clamped) for the phase in progress.
    frozen: Vec<f64>,
    frozen_max: f64,
    /// Content counts of the last floor(k/2) + 1 phases.
    window: VecDeque<PhaseCounts>,
    /// Last action played in each finished trial-and-error phase, 1-based
    /// by epoch; entry 0 unused.
    last_phase_action: Vec<Option<usize>>,
    current_phase_action: Option<usize>,
    /// Arm exploited in each epoch, recorded when exploitation starts.
    exploit_history: Vec<Option<usize>>,
}

impl GotAgent {
    pub fn new(params: AgentParams) -> Result<Self> {
        if params.arms == 0 {
            return Err(Error::InvalidConfig("agent needs at least one arm".into()));
        }
        if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
            return Err(Error::InvalidConfig("epsilon must lie in (0, 1)".into()));
        }
        if !params.c.is_finite() || params.c <= 0.0 {
            return Err(Error::InvalidConfig("c must be positive".into()));
        }
        if !params.floor.is_finite() || params.floor <= 0.0 {
            return Err(Error::InvalidConfig("estimate floor must be positive".into()));
        }
        let arms = params.arms;
        let floor = params.floor;
        Ok(Self {
            params,
            mood: Mood::Content,
            baseline: 0,
            visit_count: vec![0; arms],
            reward_sum: vec![0.0; arms],
            frozen: vec![floor; arms],
            frozen_max: floor,
            window: VecDeque::new(),
            last_phase_action: vec![None],
            current_phase_action: None,
            exploit_history: vec![None],
        })
    }

    pub fn mood(&self) -> Mood {
        self.mood
    }

    pub fn is_content(&self) -> bool {
        self.mood == Mood::Content
    }

    pub fn baseline(&self) -> usize {
        self.baseline
    }

    /// Running mean of arm `i`, if it was ever observed collision-free.
    pub fn estimate(&self, i: usize) -> Option<f64> {
        (self.visit_count[i] > 0).then(|| self.reward_sum[i] / self.visit_count[i] as f64)
    }

    pub fn snapshot(&self) -> AgentSnapshot {
        AgentSnapshot {
            mood: self.mood,
            baseline: self.baseline,
            visit_count: self.visit_count.clone(),
            reward_sum: self.reward_sum.clone(),
            estimates: (0..self.params.arms).map(|i| self.estimate(i)).collect(),
            frozen_utilities: self.frozen.clone(),
            frozen_u_max: self.frozen_max,
            phase_freq: self
                .window
                .iter()
                .map(|p| (p.epoch, p.counts.clone()))
                .collect(),
        }
    }

    fn collided(&self, reward: f64, no_collision: bool) -> bool {
        match self.params.signal {
            CollisionSignal::ZeroReward => reward == 0.0,
            CollisionSignal::Explicit => !no_collision,
        }
    }

    // ---- exploration phase ------------------------------------------------

    /// Uniform arm choice.
    pub fn explore_action(&self, rng: &mut Stream) -> usize {
        rng.random_range(0..self.params.arms)
    }

    /// Accumulates a collision-free sample into the running mean. Counters
    /// persist across epochs: estimation uses every sample ever taken.
    pub fn update_estimate(&mut self, arm: usize, reward: f64, collided: bool) {
        if collided {
            return;
        }
        self.visit_count[arm] += 1;
        self.reward_sum[arm] += reward;
    }

    pub fn observe_exploration(&mut self, arm: usize, reward: f64, no_collision: bool) {
        let collided = self.collided(reward, no_collision);
        self.update_estimate(arm, reward, collided);
    }

    // ---- trial-and-error (GoT) phase ---------------------------------------

    /// Starts epoch `k`'s phase: content mood, the baseline seeded from
    /// epoch k - floor(k/2) - 1 (uniform random for k = 1, 2), a fresh
    /// count vector, and a refreshed estimate snapshot.
    pub fn reset_for_got_phase(&mut self, k: u32, rng: &mut Stream) {
        self.mood = Mood::Content;
        self.baseline = if k <= 2 {
            rng.random_range(0..self.params.arms)
        } else {
            let reference = (k - k / 2 - 1) as usize;
            let seeded = match self.params.baseline_source {
                BaselineSource::GotLast => self.last_phase_action.get(reference),
                BaselineSource::Exploitation => self.exploit_history.get(reference),
            };
            seeded
                .copied()
                .flatten()
                .unwrap_or_else(|| rng.random_range(0..self.params.arms))
        };
        self.refresh_frozen();
        self.current_phase_action = None;
        self.window.push_back(PhaseCounts {
            epoch: k,
            counts: vec![0; self.params.arms],
        });
        let window_start = k - k / 2;
        while self.window.front().is_some_and(|p| p.epoch < window_start) {
            self.window.pop_front();
        }
    }

    fn refresh_frozen(&mut self) {
        let floor = self.params.floor;
        for i in 0..self.params.arms {
            self.frozen[i] = self.estimate(i).map_or(floor, |e| e.max(floor));
        }
        self.frozen_max = self.frozen.iter().fold(floor, |a, &b| a.max(b));
    }

    /// One action of the dynamics: content players hold the baseline with
    /// probability 1 - eps^c, discontent players explore uniformly.
    pub fn got_action(&self, rng: &mut Stream) -> usize {
        let m = self.params.arms;
        match self.mood {
            Mood::Discontent => rng.random_range(0..m),
            Mood::Content => {
                if m == 1 {
                    return self.baseline;
                }
                let escape = self.params.epsilon.powf(self.params.c);
                if rng.random::<f64>() < 1.0 - escape {
                    self.baseline
                } else {
                    // Uniform over the other m - 1 arms.
                    let pick = rng.random_range(0..m - 1);
                    if pick >= self.baseline {
                        pick + 1
                    } else {
                        pick
                    }
                }
            }
        }
    }

    /// Content/discontent action probabilities, exposed for exact tests.
    pub fn got_action_probabilities(&self) -> Vec<f64> {
        let m = self.params.arms;
        match self.mood {
            Mood::Discontent => vec![1.0 / m as f64; m],
            Mood::Content => {
                if m == 1 {
                    return vec![1.0];
                }
                let escape = self.params.epsilon.powf(self.params.c);
                (0..m)
                    .map(|i| {
                        if i == self.baseline {
                            1.0 - escape
                        } else {
                            escape / (m - 1) as f64
                        }
                    })
                    .collect()
            }
        }
    }

    /// Probability that the mood update accepts contentment at utility `u`.
    pub fn acceptance_probability(&self, utility: f64) -> f64 {
        if utility <= 0.0 {
            return 0.0;
        }
        let u_max = self.frozen_max;
        ((utility / u_max) * self.params.epsilon.powf(u_max - utility)).clamp(0.0, 1.0)
    }

    /// Mood/baseline transition. `utility` is the phase utility: the frozen
    /// estimate of the played arm if collision-free, else exactly zero.
    pub fn got_update(&mut self, arm: usize, utility: f64, collided: bool, rng: &mut Stream) {
        debug_assert!(collided == (utility == 0.0));
        if self.mood == Mood::Content && arm == self.baseline && utility > 0.0 {
            return;
        }
        let accept = self.acceptance_probability(utility);
        self.baseline = arm;
        self.mood = if rng.random::<f64>() < accept {
            Mood::Content
        } else {
            Mood::Discontent
        };
    }

    /// Counts the played arm iff the post-update mood is content.
    pub fn record_content(&mut self, arm: usize) {
        if self.mood == Mood::Content {
            if let Some(phase) = self.window.back_mut() {
                phase.counts[arm] += 1;
            }
        }
    }

    pub fn observe_got(&mut self, arm: usize, reward: f64, no_collision: bool, rng: &mut Stream) {
        let collided = self.collided(reward, no_collision);
        let utility = if collided { 0.0 } else { self.frozen[arm] };
        self.got_update(arm, utility, collided, rng);
        self.record_content(arm);
        self.current_phase_action = Some(arm);
        if self.params.reuse_samples {
            self.update_estimate(arm, reward, collided);
        }
    }

    /// Ends epoch `k`'s phase, committing the last action played in it.
    pub fn end_got_phase(&mut self, k: u32) {
        let k = k as usize;
        if self.last_phase_action.len() <= k {
            self.last_phase_action.resize(k + 1, None);
        }
        self.last_phase_action[k] = self.current_phase_action;
    }

    // ---- exploitation phase -------------------------------------------------

    /// Argmax over arms of the content counts summed over the phases
    /// k - floor(k/2) .. k. Ties break toward the lowest arm index;
    /// all-zero counts fall back to the baseline.
    pub fn exploitation_action(&self, k: u32) -> usize {
        let window_start = k - k / 2;
        let mut sums = vec![0u64; self.params.arms];
        for phase in &self.window {
            if phase.epoch >= window_start && phase.epoch <= k {
                for (s, &c) in sums.iter_mut().zip(&phase.counts) {
                    *s += c;
                }
            }
        }
        let (best_arm, best) = sums
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("at least one arm");
        if *best == 0 {
            self.baseline
        } else {
            best_arm
        }
    }

    pub fn observe_exploitation(&mut self, arm: usize, reward: f64, no_collision: bool) {
        if self.params.reuse_samples {
            let collided = self.collided(reward, no_collision);
            self.update_estimate(arm, reward, collided);
        }
    }

    /// Records the arm exploited in epoch `k` (feeds the exploitation
    /// baseline seeding).
    pub fn note_exploitation_action(&mut self, k: u32, arm: usize) {
        let k = k as usize;
        if self.exploit_history.len() <= k {
            self.exploit_history.resize(k + 1, None);
        }
        self.exploit_history[k] = Some(arm);
    }
}

//! Per-turn run records and the derived performance curves.
//!
//! A trace stores, for every turn, the joint action profile, the realized
//! total utility, and (during trial-and-error phases) whether every player
//! ended the turn content. Phase boundaries are kept as segments, so phase
//! labels partition the turns. Per-player utilities are optional: batch
//! runs over millions of turns keep the compact form.

use serde::{Deserialize, Serialize};

/// Phase labels within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploration,
    Got,
    Exploitation,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Phase::Exploration => "explore",
            Phase::Got => "got",
            Phase::Exploitation => "exploit",
        };
        f.write_str(s)
    }
}

/// Whether a run records per-player utilities or only their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDetail {
    Compact,
    PerPlayer,
}

/// A contiguous block of turns belonging to one phase of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSegment {
    pub epoch: u32,
    pub phase: Phase,
    /// First turn of the segment, 0-based.
    pub start: u64,
    pub len: u64,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    players: usize,
    arms: usize,
    segments: Vec<PhaseSegment>,
    /// Flattened joint profiles, `players` entries per turn, 0-based arms.
    profiles: Vec<u8>,
    /// Sum of realized utilities per turn.
    total_utility: Vec<f64>,
    /// Realized utility per (turn, player); only in detailed traces.
    per_player_utility: Option<Vec<f64>>,
    /// Bit t set iff turn t was a trial-and-error turn that ended with all
    /// players content.
    all_content: Vec<u64>,
}

impl RunTrace {
    pub(crate) fn builder(players: usize, arms: usize, detail: TraceDetail, horizon: u64) -> TraceBuilder {
        TraceBuilder::new(players, arms, detail, horizon)
    }

    /// Assembles a trace from recorded parts (used by tests and tools).
    pub fn from_parts(
        players: usize,
        arms: usize,
        segments: Vec<PhaseSegment>,
        profiles: Vec<u8>,
        total_utility: Vec<f64>,
        per_player_utility: Option<Vec<f64>>,
    ) -> Self {
        let turns = total_utility.len();
        assert_eq!(profiles.len(), players * turns);
        if let Some(pp) = &per_player_utility {
            assert_eq!(pp.len(), players * turns);
        }
        assert_eq!(segments.iter().map(|s| s.len).sum::<u64>(), turns as u64);
        Self {
            players,
            arms,
            segments,
            profiles,
            total_utility,
            per_player_utility,
            all_content: vec![0; turns.div_ceil(64)],
        }
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn turns(&self) -> u64 {
        self.total_utility.len() as u64
    }

    pub fn segments(&self) -> &[PhaseSegment] {
        &self.segments
    }

    /// Joint profile of 0-based turn `t`.
    pub fn profile(&self, t: u64) -> &[u8] {
        let i = t as usize * self.players;
        &self.profiles[i..i + self.players]
    }

    pub fn total_utility_at(&self, t: u64) -> f64 {
        self.total_utility[t as usize]
    }

    pub fn player_utility(&self, t: u64, n: usize) -> Option<f64> {
        self.per_player_utility
            .as_ref()
            .map(|pp| pp[t as usize * self.players + n])
    }

    pub fn collided(&self, t: u64, n: usize) -> bool {
        let profile = self.profile(t);
        let arm = profile[n];
        profile.iter().filter(|&&a| a == arm).count() > 1
    }

    pub fn all_content(&self, t: u64) -> bool {
        self.all_content[(t / 64) as usize] >> (t % 64) & 1 == 1
    }

    /// (epoch, phase) of 0-based turn `t`.
    pub fn epoch_phase_at(&self, t: u64) -> (u32, Phase) {
        let idx = self
            .segments
            .partition_point(|s| s.start + s.len <= t);
        let seg = &self.segments[idx];
        debug_assert!(t >= seg.start && t < seg.start + seg.len);
        (seg.epoch, seg.phase)
    }

    /// Cumulative regret against the expected optimal baseline: value at
    /// turn t (1-based) is t * j1 - sum of realized total utilities.
    pub fn regret_curve(&self, j1: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_utility.len());
        let mut acc = 0.0;
        for (t, &u) in self.total_utility.iter().enumerate() {
            acc += u;
            out.push((t + 1) as f64 * j1 - acc);
        }
        out
    }

    /// Regret sampled at the given ascending 1-based turn numbers.
    pub fn regret_at_turns(&self, j1: f64, turns: &[u64]) -> Vec<f64> {
        self.sample_cumulative(turns, |t, acc| t as f64 * j1 - acc)
    }

    /// Average fraction of the optimal value realized per turn:
    /// (1/t) * sum of total utilities / j1.
    pub fn utility_ratio_curve(&self, j1: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_utility.len());
        let mut acc = 0.0;
        for (t, &u) in self.total_utility.iter().enumerate() {
            acc += u;
            out.push(acc / ((t + 1) as f64 * j1));
        }
        out
    }

    pub fn utility_ratio_at_turns(&self, j1: f64, turns: &[u64]) -> Vec<f64> {
        self.sample_cumulative(turns, |t, acc| acc / (t as f64 * j1))
    }

    fn sample_cumulative(&self, turns: &[u64], f: impl Fn(u64, f64) -> f64) -> Vec<f64> {
        debug_assert!(turns.windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::with_capacity(turns.len());
        let mut acc = 0.0;
        let mut next = turns.iter().peekable();
        for (t, &u) in self.total_utility.iter().enumerate() {
            acc += u;
            let turn = (t + 1) as u64;
            while next.peek() == Some(&&turn) {
                out.push(f(turn, acc));
                next.next();
            }
        }
        assert!(next.peek().is_none(), "sample turn beyond trace length");
        out
    }

    /// Fraction of exploitation turns whose joint profile equals `a_star`.
    /// `None` when the trace has no exploitation turns.
    pub fn exploitation_accuracy(&self, a_star: &[usize]) -> Option<f64> {
        self.exploitation_accuracy_from_epoch(a_star, 1)
    }

    /// Same, restricted to epochs >= `min_epoch`.
    pub fn exploitation_accuracy_from_epoch(&self, a_star: &[usize], min_epoch: u32) -> Option<f64> {
        let mut total = 0u64;
        let mut hits = 0u64;
        for seg in &self.segments {
            if seg.phase != Phase::Exploitation || seg.epoch < min_epoch {
                continue;
            }
            total += seg.len;
            for t in seg.start..seg.start + seg.len {
                if self.profile_matches(t, a_star) {
                    hits += 1;
                }
            }
        }
        (total > 0).then(|| hits as f64 / total as f64)
    }

    fn profile_matches(&self, t: u64, a_star: &[usize]) -> bool {
        self.profile(t)
            .iter()
            .zip(a_star)
            .all(|(&a, &b)| a as usize == b)
    }

    /// Fraction of trial-and-error turns spent in the optimal all-content
    /// state [a_star, C^N]. `None` when the trace has no such turns.
    pub fn got_occupancy(&self, a_star: &[usize]) -> Option<f64> {
        let mut total = 0u64;
        let mut hits = 0u64;
        for seg in &self.segments {
            if seg.phase != Phase::Got {
                continue;
            }
            total += seg.len;
            for t in seg.start..seg.start + seg.len {
                if self.all_content(t) && self.profile_matches(t, a_star) {
                    hits += 1;
                }
            }
        }
        (total > 0).then(|| hits as f64 / total as f64)
    }

    /// Cumulative occupancy of [a_star, C^N] over trial-and-error turns up
    /// to each sampled 1-based turn (0 before the first such turn).
    pub fn got_occupancy_at_turns(&self, a_star: &[usize], turns: &[u64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(turns.len());
        let mut seen = 0u64;
        let mut hits = 0u64;
        let mut seg_iter = self.segments.iter().peekable();
        let mut next = turns.iter().peekable();
        for t in 0..self.turns() {
            while seg_iter.peek().is_some_and(|s| s.start + s.len <= t) {
                seg_iter.next();
            }
            let in_got = seg_iter.peek().is_some_and(|s| s.phase == Phase::Got);
            if in_got {
                seen += 1;
                if self.all_content(t) && self.profile_matches(t, a_star) {
                    hits += 1;
                }
            }
            while next.peek() == Some(&&(t + 1)) {
                out.push(if seen == 0 { 0.0 } else { hits as f64 / seen as f64 });
                next.next();
            }
        }
        out
    }
}

pub(crate) struct TraceBuilder {
    players: usize,
    arms: usize,
    segments: Vec<PhaseSegment>,
    profiles: Vec<u8>,
    total_utility: Vec<f64>,
    per_player_utility: Option<Vec<f64>>,
    all_content: Vec<u64>,
    turn: u64,
}

impl TraceBuilder {
    fn new(players: usize, arms: usize, detail: TraceDetail, horizon: u64) -> Self {
        let reserve = usize::try_from(horizon)
            .ok()
            .filter(|h| h.saturating_mul(players) <= 256 << 20)
            .unwrap_or(0);
        let mut profiles = Vec::new();
        let mut total_utility = Vec::new();
        profiles.reserve(reserve * players);
        total_utility.reserve(reserve);
        Self {
            players,
            arms,
            segments: Vec::new(),
            profiles,
            total_utility,
            per_player_utility: match detail {
                TraceDetail::Compact => None,
                TraceDetail::PerPlayer => Some(Vec::new()),
            },
            all_content: Vec::new(),
            turn: 0,
        }
    }

    pub fn push_segment(&mut self, epoch: u32, phase: Phase, len: u64) {
        self.segments.push(PhaseSegment {
            epoch,
            phase,
            start: self.turn,
            len,
        });
    }

    pub fn push_turn(&mut self, profile: &[usize], utilities: &[f64], all_content: bool) {
        debug_assert_eq!(profile.len(), self.players);
        for &a in profile {
            debug_assert!(a < self.arms);
            self.profiles.push(a as u8);
        }
        self.total_utility.push(utilities.iter().sum());
        if let Some(pp) = &mut self.per_player_utility {
            pp.extend_from_slice(utilities);
        }
        let word = (self.turn / 64) as usize;
        if word >= self.all_content.len() {
            self.all_content.push(0);
        }
        if all_content {
            self.all_content[word] |= 1 << (self.turn % 64);
        }
        self.turn += 1;
    }

    pub fn finish(self) -> RunTrace {
        debug_assert_eq!(
            self.segments.iter().map(|s| s.len).sum::<u64>(),
            self.turn
        );
        RunTrace {
            players: self.players,
            arms: self.arms,
            segments: self.segments,
            profiles: self.profiles,
            total_utility: self.total_utility,
            per_player_utility: self.per_player_utility,
            all_content: self.all_content,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Two-player trace: one exploitation segment on the optimal profile,
    /// one of equal length off it.
    fn synthetic_trace() -> RunTrace {
        let segments = vec![
            PhaseSegment { epoch: 1, phase: Phase::Exploitation, start: 0, len: 4 },
            PhaseSegment { epoch: 2, phase: Phase::Exploitation, start: 4, len: 4 },
        ];
        let mut profiles = Vec::new();
        let mut totals = Vec::new();
        for t in 0..8 {
            if t < 4 {
                profiles.extend([0u8, 1]);
                totals.push(2.0);
            } else {
                profiles.extend([1u8, 0]);
                totals.push(1.0);
            }
        }
        RunTrace::from_parts(2, 2, segments, profiles, totals, None)
    }

    #[test]
    fn accuracy_counts_matching_exploitation_turns() {
        let trace = synthetic_trace();
        assert_eq!(trace.exploitation_accuracy(&[0, 1]), Some(0.5));
        assert_eq!(trace.exploitation_accuracy_from_epoch(&[0, 1], 2), Some(0.0));
        assert_eq!(trace.exploitation_accuracy_from_epoch(&[1, 0], 2), Some(1.0));
        assert_eq!(trace.exploitation_accuracy_from_epoch(&[0, 1], 3), None);
    }

    #[test]
    fn optimal_play_has_zero_regret_and_unit_ratio() {
        let segments = vec![PhaseSegment { epoch: 1, phase: Phase::Exploitation, start: 0, len: 5 }];
        let profiles = vec![0u8, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let totals = vec![2.0; 5];
        let trace = RunTrace::from_parts(2, 2, segments, profiles, totals, None);
        for r in trace.regret_curve(2.0) {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-12);
        }
        for r in trace.utility_ratio_curve(2.0) {
            assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn total_collision_accrues_full_regret() {
        let segments = vec![PhaseSegment { epoch: 1, phase: Phase::Exploitation, start: 0, len: 4 }];
        let profiles = vec![0u8; 8];
        let totals = vec![0.0; 4];
        let trace = RunTrace::from_parts(2, 2, segments, profiles, totals, None);
        let regret = trace.regret_curve(1.55);
        for (t, r) in regret.iter().enumerate() {
            assert_abs_diff_eq!(*r, (t + 1) as f64 * 1.55, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_curves_match_full_curves() {
        let trace = synthetic_trace();
        let full = trace.regret_curve(2.0);
        let sampled = trace.regret_at_turns(2.0, &[2, 5, 8]);
        assert_eq!(sampled, vec![full[1], full[4], full[7]]);
        let full = trace.utility_ratio_curve(2.0);
        let sampled = trace.utility_ratio_at_turns(2.0, &[1, 8]);
        assert_eq!(sampled, vec![full[0], full[7]]);
    }

    #[test]
    fn epoch_phase_lookup() {
        let trace = synthetic_trace();
        assert_eq!(trace.epoch_phase_at(0), (1, Phase::Exploitation));
        assert_eq!(trace.epoch_phase_at(3), (1, Phase::Exploitation));
        assert_eq!(trace.epoch_phase_at(4), (2, Phase::Exploitation));
        assert_eq!(trace.epoch_phase_at(7), (2, Phase::Exploitation));
    }

    #[test]
    fn collision_detection_from_profile() {
        let segments = vec![PhaseSegment { epoch: 1, phase: Phase::Got, start: 0, len: 1 }];
        let trace = RunTrace::from_parts(3, 3, segments, vec![1, 1, 2], vec![0.4], None);
        assert!(trace.collided(0, 0));
        assert!(trace.collided(0, 1));
        assert!(!trace.collided(0, 2));
    }
}

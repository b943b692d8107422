//! Stochastic reward processes and collision mechanics.
//!
//! Each (player, arm) pair carries its own reward process: i.i.d. Gaussian
//! around a positive mean, an arbitrary continuous distribution given as an
//! inverse-CDF table, or a finite-state rested Markov chain over positive
//! values. When two or more players pull the same arm in a turn they all
//! collide and realize zero utility; a rested chain advances only on a
//! collision-free pull by its owner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{RngFactory, Stream, StreamDomain};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Row-sum tolerance for transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A finite-state reward chain: positive state values plus a row-stochastic
/// transition matrix, required ergodic (single recurrent class, aperiodic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardChain {
    pub states: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

/// Piecewise-linear inverse CDF: `values[j]` is the quantile at
/// `quantiles[j]`, with `quantiles` strictly increasing from 0 to 1.
/// Sampling draws u uniform on [0, 1) and interpolates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub quantiles: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileTable {
    fn validate(&self) -> Result<()> {
        let q = &self.quantiles;
        let v = &self.values;
        if q.len() < 2 || q.len() != v.len() {
            return Err(Error::InvalidReward(
                "quantile table needs matching quantile/value lists of length >= 2".into(),
            ));
        }
        if q[0] != 0.0 || *q.last().unwrap() != 1.0 {
            return Err(Error::InvalidReward("quantiles must span [0, 1]".into()));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidReward("quantiles must be strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidReward("table values must be finite".into()));
        }
        if self.mean() <= 0.0 {
            return Err(Error::InvalidReward("table mean must be positive".into()));
        }
        Ok(())
    }

    /// Draws one value by inverse-CDF interpolation.
    pub fn sample_with(&self, rng: &mut Stream) -> f64 {
        let u: f64 = rng.random();
        let idx = match self.quantiles.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
            Ok(i) => i.max(1),
            Err(i) => i.clamp(1, self.quantiles.len() - 1),
        };
        let (q0, q1) = (self.quantiles[idx - 1], self.quantiles[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (u - q0) / (q1 - q0)
    }

    /// `E[X]` = integral of the inverse CDF over `[0, 1]`, exact for the
    /// piecewise-linear table (trapezoid per segment).
    pub fn mean(&self) -> f64 {
        self.quantiles
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(q, v)| (q[1] - q[0]) * (v[0] + v[1]) * 0.5)
            .sum()
    }
}

/// The kind of reward process, one entry per (player, arm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    /// Independent Gaussians: reward = `means[n][i]` + N(0, variance).
    IidGaussian { means: Vec<Vec<f64>>, variance: f64 },
    /// Arbitrary continuous distributions via inverse-CDF tables.
    IidCustomTable { tables: Vec<Vec<QuantileTable>> },
    /// Rested Markovian rewards: `chains[n][i]` advances only on a
    /// collision-free pull of arm i by player n.
    Markovian { chains: Vec<Vec<RewardChain>> },
}

/// Declarative description of the whole reward environment. The Bernstein
/// parameters are analytical inputs used only by bound evaluation; no
/// estimation procedure for them exists, so they are caller-provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    #[serde(flatten)]
    pub kind: RewardKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernstein_sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernstein_b: Option<Vec<Vec<f64>>>,
}

impl RewardSpec {
    pub fn iid_gaussian(means: Vec<Vec<f64>>, variance: f64) -> Self {
        Self {
            kind: RewardKind::IidGaussian { means, variance },
            bernstein_sigma: None,
            bernstein_b: None,
        }
    }

    pub fn markovian(chains: Vec<Vec<RewardChain>>) -> Self {
        Self {
            kind: RewardKind::Markovian { chains },
            bernstein_sigma: None,
            bernstein_b: None,
        }
    }

    pub fn players(&self) -> usize {
        match &self.kind {
            RewardKind::IidGaussian { means, .. } => means.len(),
            RewardKind::IidCustomTable { tables } => tables.len(),
            RewardKind::Markovian { chains } => chains.len(),
        }
    }

    pub fn arms(&self) -> usize {
        match &self.kind {
            RewardKind::IidGaussian { means, .. } => means.first().map_or(0, Vec::len),
            RewardKind::IidCustomTable { tables } => tables.first().map_or(0, Vec::len),
            RewardKind::Markovian { chains } => chains.first().map_or(0, Vec::len),
        }
    }

    /// In Markovian mode the collision indicator is observable by players;
    /// with continuous rewards the zero reward itself is the signal.
    pub fn indicator_observable(&self) -> bool {
        matches!(self.kind, RewardKind::Markovian { .. })
    }

    /// Validates shapes and all construction-time invariants. Fails fast on
    /// non-positive means, non-stochastic rows and non-ergodic chains.
    pub fn validate(&self) -> Result<()> {
        let n = self.players();
        let m = self.arms();
        if n == 0 || m == 0 {
            return Err(Error::InvalidReward("empty reward specification".into()));
        }
        match &self.kind {
            RewardKind::IidGaussian { means, variance } => {
                check_rect(means, n, m, "means")?;
                if !variance.is_finite() || *variance < 0.0 {
                    return Err(Error::InvalidReward("variance must be >= 0".into()));
                }
                if means.iter().flatten().any(|&mu| !mu.is_finite() || mu <= 0.0) {
                    return Err(Error::InvalidReward("all means must be positive".into()));
                }
            }
            RewardKind::IidCustomTable { tables } => {
                if tables.len() != n || tables.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidReward("ragged table matrix".into()));
                }
                for row in tables {
                    for t in row {
                        t.validate()?;
                    }
                }
            }
            RewardKind::Markovian { chains } => {
                if chains.len() != n || chains.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidReward("ragged chain matrix".into()));
                }
                for row in chains {
                    for chain in row {
                        validate_chain(chain)?;
                    }
                }
            }
        }
        for (name, mat) in [
            ("bernstein_sigma", &self.bernstein_sigma),
            ("bernstein_b", &self.bernstein_b),
        ] {
            if let Some(mat) = mat {
                check_rect(mat, n, m, name)?;
                if mat.iter().flatten().any(|&x| !x.is_finite() || x <= 0.0) {
                    return Err(Error::InvalidReward(format!("{name} entries must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Expected reward of arm `i` for player `n`: the mean for i.i.d. kinds,
    /// the stationary-weighted state average for Markovian chains.
    pub fn expected_reward(&self, n: usize, i: usize) -> f64 {
        match &self.kind {
            RewardKind::IidGaussian { means, .. } => means[n][i],
            RewardKind::IidCustomTable { tables } => tables[n][i].mean(),
            RewardKind::Markovian { chains } => {
                let chain = &chains[n][i];
                // Ergodicity is checked at construction, so the solve is safe.
                let pi = linalg::stationary_from_rows(&chain.transition)
                    .expect("validated chain has a unique stationary distribution");
                chain.states.iter().zip(&pi).map(|(r, p)| r * p).sum()
            }
        }
    }

    /// The full matrix of expected rewards.
    pub fn expected_means(&self) -> Vec<Vec<f64>> {
        (0..self.players())
            .map(|n| (0..self.arms()).map(|i| self.expected_reward(n, i)).collect())
            .collect()
    }
}

fn check_rect(mat: &[Vec<f64>], n: usize, m: usize, name: &str) -> Result<()> {
    if mat.len() != n || mat.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidReward(format!("{name} must be {n}x{m}")));
    }
    Ok(())
}

fn validate_chain(chain: &RewardChain) -> Result<()> {
    let s = chain.states.len();
    if s == 0 {
        return Err(Error::InvalidReward("chain needs at least one state".into()));
    }
    if chain.states.iter().any(|&r| !r.is_finite() || r <= 0.0) {
        return Err(Error::InvalidReward("chain state values must be positive".into()));
    }
    if chain.transition.len() != s || chain.transition.iter().any(|r| r.len() != s) {
        return Err(Error::InvalidReward("transition matrix shape mismatch".into()));
    }
    for row in &chain.transition {
        if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidReward("transition entries must be >= 0".into()));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidReward(format!(
                "transition row sums to {sum}, expected 1"
            )));
        }
    }
    check_ergodic(&chain.transition)
}

/// Irreducibility by reachability closure in both directions, aperiodicity
/// by the gcd of cycle-length discrepancies along a BFS tree.
fn check_ergodic(p: &[Vec<f64>]) -> Result<()> {
    let s = p.len();
    if s == 1 {
        // Single state: trivially irreducible and aperiodic (self loop).
        return Ok(());
    }
    let forward = |from: usize| (0..s).filter(move |&j| p[from][j] > 0.0);
    let reach = |rev: bool| {
        let mut seen = vec![false; s];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(u) = queue.pop() {
            for v in 0..s {
                let edge = if rev { p[v][u] > 0.0 } else { p[u][v] > 0.0 };
                if edge && !seen[v] {
                    seen[v] = true;
                    queue.push(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    if !reach(false) || !reach(true) {
        return Err(Error::InvalidReward("chain is not irreducible".into()));
    }
    // BFS depths from state 0; the period divides d(u) + 1 - d(v) for
    // every edge u -> v.
    let mut depth = vec![usize::MAX; s];
    depth[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in forward(u) {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: u64 = 0;
    for u in 0..s {
        for v in forward(u) {
            let diff = (depth[u] as i64 + 1 - depth[v] as i64).unsigned_abs();
            g = gcd(g, diff);
        }
    }
    if g != 1 {
        return Err(Error::InvalidReward(format!("chain is periodic (period {g})")));
    }
    Ok(())
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Mutable state of the reward environment during one run: per-(player, arm)
/// chain positions and collision-free visit counters.
#[derive(Debug, Clone)]
pub struct RewardProcessState {
    arms: usize,
    current: Vec<usize>,
    visits: Vec<u64>,
}

impl RewardProcessState {
    pub fn new(spec: &RewardSpec) -> Self {
        let (n, m) = (spec.players(), spec.arms());
        Self {
            arms: m,
            current: vec![0; n * m],
            visits: vec![0; n * m],
        }
    }

    pub fn visits(&self, n: usize, i: usize) -> u64 {
        self.visits[n * self.arms + i]
    }

    pub fn chain_state(&self, n: usize, i: usize) -> usize {
        self.current[n * self.arms + i]
    }
}

/// One independent stream per (player, arm) reward process, so a pull
/// sequence on one pair never perturbs another.
#[derive(Debug, Clone)]
pub struct RewardRng {
    streams: Vec<Stream>,
    arms: usize,
}

impl RewardRng {
    pub fn new(factory: &RngFactory, players: usize, arms: usize) -> Self {
        let streams = (0..players * arms)
            .map(|idx| factory.stream(StreamDomain::Reward, idx as u64))
            .collect();
        Self { streams, arms }
    }

    fn stream(&mut self, n: usize, i: usize) -> &mut Stream {
        &mut self.streams[n * self.arms + i]
    }
}

/// No-collision indicator of `arm` under `profile`: 0 iff two or more
/// players chose it.
pub fn no_collision_indicator(profile: &[usize], arm: usize) -> u8 {
    let occupants = profile.iter().filter(|&&a| a == arm).count();
    u8::from(occupants <= 1)
}

/// Realizes one turn of rewards under `profile` (arm indices, 0-based).
///
/// Returns per-player utilities and per-player no-collision indicators.
/// Colliding players receive exactly 0.0 and consume no randomness; a
/// Markovian chain advances one step (and its visit counter increments)
/// only on a collision-free pull.
pub fn sample_rewards(
    spec: &RewardSpec,
    state: &mut RewardProcessState,
    profile: &[usize],
    rng: &mut RewardRng,
) -> (Vec<f64>, Vec<bool>) {
    let mut utilities = vec![0.0; profile.len()];
    let mut no_collision = vec![false; profile.len()];
    let mut occupancy = vec![0u8; spec.arms()];
    sample_rewards_into(
        spec,
        state,
        profile,
        rng,
        &mut utilities,
        &mut no_collision,
        &mut occupancy,
    );
    (utilities, no_collision)
}

/// Allocation-free form of [`sample_rewards`] for hot loops. `occupancy`
/// is scratch space of length `spec.arms()`.
pub fn sample_rewards_into(
    spec: &RewardSpec,
    state: &mut RewardProcessState,
    profile: &[usize],
    rng: &mut RewardRng,
    utilities: &mut [f64],
    no_collision: &mut [bool],
    occupancy: &mut [u8],
) {
    occupancy.iter_mut().for_each(|x| *x = 0);
    for &a in profile {
        occupancy[a] = occupancy[a].saturating_add(1);
    }
    for (n, &arm) in profile.iter().enumerate() {
        if occupancy[arm] > 1 {
            utilities[n] = 0.0;
            no_collision[n] = false;
            continue;
        }
        no_collision[n] = true;
        let reward = match &spec.kind {
            RewardKind::IidGaussian { means, variance } => {
                let z: f64 = StandardNormal.sample(rng.stream(n, arm));
                means[n][arm] + variance.sqrt() * z
            }
            RewardKind::IidCustomTable { tables } => tables[n][arm].sample_with(rng.stream(n, arm)),
            RewardKind::Markovian { chains } => {
                let chain = &chains[n][arm];
                let idx = n * state.arms + arm;
                let row = &chain.transition[state.current[idx]];
                let next = sample_categorical(row, rng.stream(n, arm));
                state.current[idx] = next;
                chain.states[next]
            }
        };
        let idx = n * state.arms + arm;
        state.visits[idx] += 1;
        utilities[n] = reward;
    }
}

fn sample_categorical(probs: &[f64], rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

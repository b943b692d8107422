//! Exact analysis of the content/discontent dynamics on small instances.
//!
//! The joint dynamics of all players form a Markov chain on
//! Z = (arms x {content, discontent})^N. This module builds the exact
//! transition matrix by composing the per-player action and mood rules,
//! collision-zeroing utilities along the way, and computes:
//!
//! - the stationary distribution, by two independent routes: a dense
//!   linear solve of the balance equations, and the spanning in-tree
//!   (matrix-tree) cofactor formula, with a literal tree-enumeration
//!   oracle for very small chains;
//! - the stationary mass of the optimal all-content state;
//! - mixing times to a given total-variation accuracy;
//! - the closed-form exploration-rate threshold that guarantees the
//!   optimal state holds a stationary majority.
//!
//! State encoding is player-major mixed radix with the arm index as the
//! outer digit and the mood bit (content = 0, discontent = 1) as the inner
//! digit, so test vectors are portable: index = sum over players of
//! (2 * arm + mood) * (2M)^(N-1-n), player 0 most significant.

use crate::agent::Mood;
use crate::assignment;
use crate::error::{Error, Result};
use crate::linalg;

/// Hard cap on |Z| for exact chain construction.
pub const STATE_BUDGET: usize = 20_000;

/// Cap on |Z| for the cofactor route (dense determinant per state).
pub const TREE_FORMULA_BUDGET: usize = 64;

/// Cap on |Z| for literal in-tree enumeration (|Z|^(|Z|-1) products).
pub const TREE_ENUM_BUDGET: usize = 8;

/// Cap on |Z| for mixing-time matrix powers.
pub const MIXING_SIZE_BUDGET: usize = 2_048;

/// Iteration cap for mixing-time search.
pub const MIXING_ITERATION_CAP: u64 = 1_000_000;

/// Residual tolerance for the stationary linear solve.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-12;

/// One point of the joint state space: every player's baseline arm and mood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointState {
    pub baselines: Vec<usize>,
    pub moods: Vec<Mood>,
}

impl JointState {
    pub fn all_content(allocation: &[usize]) -> Self {
        Self {
            baselines: allocation.to_vec(),
            moods: vec![Mood::Content; allocation.len()],
        }
    }

    /// Canonical index in 0..(2M)^N.
    pub fn index(&self, arms: usize) -> usize {
        self.baselines
            .iter()
            .zip(&self.moods)
            .fold(0, |acc, (&arm, &mood)| {
                acc * (2 * arms) + 2 * arm + usize::from(mood == Mood::Discontent)
            })
    }

    pub fn from_index(mut index: usize, players: usize, arms: usize) -> Self {
        let base = 2 * arms;
        let mut baselines = vec![0; players];
        let mut moods = vec![Mood::Content; players];
        for n in (0..players).rev() {
            let digit = index % base;
            index /= base;
            baselines[n] = digit / 2;
            moods[n] = if digit & 1 == 0 { Mood::Content } else { Mood::Discontent };
        }
        Self { baselines, moods }
    }
}

/// The exact chain of one trial-and-error phase: utilities, parameters and
/// the full row-stochastic transition matrix.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub utilities: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub c: f64,
    players: usize,
    arms: usize,
    transition: Vec<Vec<f64>>,
}

impl ChainModel {
    pub fn players(&self) -> usize {
        self.players
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn size(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    pub fn stationary_linear(&self) -> Result<Vec<f64>> {
        stationary_linear(&self.transition)
    }

    pub fn stationary_tree_formula(&self) -> Result<Vec<f64>> {
        stationary_tree_formula(&self.transition)
    }

    pub fn mixing_time(&self, accuracy: f64) -> Result<u64> {
        mixing_time(&self.transition, accuracy)
    }
}

/// Builds the exact transition matrix of the dynamics for one utility
/// matrix. For each state, all M^N joint action choices are enumerated
/// with their product probabilities, utilities are zeroed on collisions,
/// and the per-player mood rules are applied independently; the post-turn
/// baseline is always the arm just played.
pub fn build_chain(utilities: &[Vec<f64>], epsilon: f64, c: f64) -> Result<ChainModel> {
    let players = utilities.len();
    if players == 0 || utilities[0].is_empty() {
        return Err(Error::InvalidConfig("empty utility matrix".into()));
    }
    let arms = utilities[0].len();
    if utilities.iter().any(|r| r.len() != arms) {
        return Err(Error::InvalidConfig("ragged utility matrix".into()));
    }
    if utilities.iter().flatten().any(|&u| u < 0.0 || !u.is_finite()) {
        return Err(Error::InvalidConfig("utilities must be >= 0".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig("epsilon must lie in (0, 1)".into()));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidConfig("c must be positive".into()));
    }
    let size128 = (2u128 * arms as u128).checked_pow(players as u32);
    let size = match size128 {
        Some(s) if s <= STATE_BUDGET as u128 => s as usize,
        Some(s) => {
            return Err(Error::StateSpaceGuard {
                states: s.min(usize::MAX as u128) as usize,
                budget: STATE_BUDGET,
            })
        }
        None => {
            return Err(Error::StateSpaceGuard { states: usize::MAX, budget: STATE_BUDGET })
        }
    };
    let u_max: Vec<f64> = utilities
        .iter()
        .map(|row| row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .collect();
    if u_max.iter().any(|&u| !u.is_finite() || u <= 0.0) {
        return Err(Error::InvalidConfig(
            "every player needs a positive best utility".into(),
        ));
    }

    let escape = epsilon.powf(c);
    let mut transition = vec![vec![0.0; size]; size];
    let mut action = vec![0usize; players];
    let mut occupancy = vec![0u32; arms];
    let mut accept = vec![0.0; players];

    for (z_index, row) in transition.iter_mut().enumerate() {
        let z = JointState::from_index(z_index, players, arms);
        // Per-player action distributions given the current state.
        let action_prob = |n: usize, a: usize| -> f64 {
            match z.moods[n] {
                Mood::Discontent => 1.0 / arms as f64,
                Mood::Content => {
                    if arms == 1 {
                        1.0
                    } else if a == z.baselines[n] {
                        1.0 - escape
                    } else {
                        escape / (arms - 1) as f64
                    }
                }
            }
        };
        action.iter_mut().for_each(|a| *a = 0);
        loop {
            let p_action: f64 = (0..players).map(|n| action_prob(n, action[n])).product();
            if p_action > 0.0 {
                occupancy.iter_mut().for_each(|x| *x = 0);
                for &a in &action {
                    occupancy[a] += 1;
                }
                for n in 0..players {
                    let utility = if occupancy[action[n]] == 1 {
                        utilities[n][action[n]]
                    } else {
                        0.0
                    };
                    accept[n] = if z.moods[n] == Mood::Content
                        && action[n] == z.baselines[n]
                        && utility > 0.0
                    {
                        // Content on the baseline with positive utility
                        // stays content with probability one.
                        1.0
                    } else if utility > 0.0 {
                        (utility / u_max[n]) * epsilon.powf(u_max[n] - utility)
                    } else {
                        0.0
                    };
                }
                // Marginalize the 2^N mood outcomes.
                for mask in 0..(1u32 << players) {
                    let mut p = p_action;
                    for (n, &q) in accept.iter().enumerate() {
                        p *= if mask >> n & 1 == 1 { 1.0 - q } else { q };
                        if p == 0.0 {
                            break;
                        }
                    }
                    if p == 0.0 {
                        continue;
                    }
                    let target = action
                        .iter()
                        .enumerate()
                        .fold(0, |acc, (n, &a)| {
                            acc * (2 * arms) + 2 * a + ((mask >> n) & 1) as usize
                        });
                    row[target] += p;
                }
            }
            // Mixed-radix increment over joint actions.
            let mut pos = 0;
            while pos < players {
                action[pos] += 1;
                if action[pos] < arms {
                    break;
                }
                action[pos] = 0;
                pos += 1;
            }
            if pos == players {
                break;
            }
        }
        debug_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    Ok(ChainModel {
        utilities: utilities.to_vec(),
        epsilon,
        c,
        players,
        arms,
        transition,
    })
}

/// Reachability check: every state reaches every other through positive-
/// probability edges.
pub fn is_irreducible(rows: &[Vec<f64>]) -> bool {
    let n = rows.len();
    let reach_all = |reverse: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if reverse { rows[v][u] > 0.0 } else { rows[u][v] > 0.0 };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach_all(false) && reach_all(true)
}

fn reachable_from(rows: &[Vec<f64>], start: usize) -> Vec<bool> {
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if rows[u][v] > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// True iff the chain has exactly one closed communicating class, reached
/// from every state: the condition for a unique stationary distribution.
/// The joint dynamics are a unichain rather than irreducible: states where
/// a content player sits on a colliding baseline exist in the product
/// space but have zero inbound probability, so they are transient.
pub fn is_unichain(rows: &[Vec<f64>]) -> bool {
    // Descend the condensation until a recurrent state is found.
    let mut s = 0usize;
    'descend: loop {
        let reach = reachable_from(rows, s);
        for (j, &r) in reach.iter().enumerate() {
            if r && j != s && !reachable_from(rows, j)[s] {
                s = j;
                continue 'descend;
            }
        }
        break;
    }
    // Unichain iff every state can reach that recurrent class.
    (0..rows.len()).all(|i| reachable_from(rows, i)[s])
}

/// Unique stationary distribution by a dense linear solve of pi P = pi,
/// sum(pi) = 1, with an infinity-norm residual check.
pub fn stationary_linear(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    let pi = linalg::stationary_from_rows(rows)?;
    // Residual over every balance equation, including the one replaced by
    // the normalization row.
    let mut residual = 0.0f64;
    for j in 0..n {
        let mut r = -pi[j];
        for i in 0..n {
            r += pi[i] * rows[i][j];
        }
        residual = residual.max(r.abs());
    }
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge(residual));
    }
    // Exact arithmetic gives a strictly positive solution; clamp the float
    // dust and renormalize.
    let mut pi = pi;
    for p in &mut pi {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

/// Stationary distribution through the matrix-tree identity: the weight
/// Q(z) of all spanning in-trees rooted at z equals the (z, z) cofactor of
/// (I - P)^T, and pi = Q / sum(Q).
pub fn stationary_tree_formula(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n > TREE_FORMULA_BUDGET {
        return Err(Error::StateSpaceGuard { states: n, budget: TREE_FORMULA_BUDGET });
    }
    let mut q = vec![0.0; n];
    let mut minor = vec![0.0; (n - 1) * (n - 1)];
    for (root, q_root) in q.iter_mut().enumerate() {
        // Minor of L = (I - P)^T with row/column `root` deleted:
        // L[i][j] = delta_ij - P[j][i].
        let mut idx = 0;
        for i in (0..n).filter(|&i| i != root) {
            for j in (0..n).filter(|&j| j != root) {
                minor[idx] = f64::from(i == j) - rows[j][i];
                idx += 1;
            }
        }
        *q_root = linalg::determinant(&mut minor, n - 1);
    }
    let total: f64 = q.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::SingularSystem(total));
    }
    Ok(q.into_iter().map(|x| (x / total).max(0.0)).collect())
}

/// Literal in-tree enumeration: sums, over every function assigning each
/// non-root state one outgoing edge whose paths all lead to the root, the
/// product of edge probabilities. Exponential; the oracle for
/// [`stationary_tree_formula`] on tiny chains.
pub fn stationary_tree_enumerated(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n > TREE_ENUM_BUDGET {
        return Err(Error::StateSpaceGuard { states: n, budget: TREE_ENUM_BUDGET });
    }
    let mut q = vec![0.0; n];
    for (root, q_root) in q.iter_mut().enumerate() {
        let nodes: Vec<usize> = (0..n).filter(|&i| i != root).collect();
        let mut targets = vec![0usize; nodes.len()];
        let mut total = 0.0;
        loop {
            let weight: f64 = nodes
                .iter()
                .zip(&targets)
                .map(|(&i, &t)| rows[i][t])
                .product();
            if weight > 0.0 && leads_to_root(&nodes, &targets, root) {
                total += weight;
            }
            let mut pos = 0;
            while pos < targets.len() {
                targets[pos] += 1;
                if targets[pos] < n {
                    break;
                }
                targets[pos] = 0;
                pos += 1;
            }
            if pos == targets.len() {
                break;
            }
        }
        *q_root = total;
        if nodes.is_empty() {
            *q_root = 1.0;
        }
    }
    let total: f64 = q.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::SingularSystem(total));
    }
    Ok(q.into_iter().map(|x| x / total).collect())
}

fn leads_to_root(nodes: &[usize], targets: &[usize], root: usize) -> bool {
    'outer: for &start in nodes {
        let mut current = start;
        for _ in 0..=nodes.len() {
            if current == root {
                continue 'outer;
            }
            let pos = nodes.iter().position(|&x| x == current).unwrap();
            let next = targets[pos];
            if next == current {
                return false;
            }
            current = next;
        }
        return false; // cycled without reaching the root
    }
    true
}

/// Smallest t such that the worst-case total-variation distance between
/// P^t(z, .) and the stationary distribution is at most `accuracy`.
pub fn mixing_time(rows: &[Vec<f64>], accuracy: f64) -> Result<u64> {
    let n = rows.len();
    if n > MIXING_SIZE_BUDGET {
        return Err(Error::StateSpaceGuard { states: n, budget: MIXING_SIZE_BUDGET });
    }
    let pi = stationary_linear(rows)?;
    let tv_from = |dist: &[f64]| -> f64 {
        0.5 * dist.iter().zip(&pi).map(|(d, p)| (d - p).abs()).sum::<f64>()
    };
    // power = P^t, starting at t = 0 (identity).
    let mut power: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect();
    let mut next = vec![vec![0.0; n]; n];
    let mut last_tv = f64::INFINITY;
    for t in 0..=MIXING_ITERATION_CAP {
        last_tv = power.iter().map(|row| tv_from(row)).fold(0.0, f64::max);
        if last_tv <= accuracy {
            return Ok(t);
        }
        for (pr, nr) in power.iter().zip(next.iter_mut()) {
            nr.iter_mut().for_each(|x| *x = 0.0);
            for (k, &w) in pr.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (nx, &p) in nr.iter_mut().zip(&rows[k]) {
                    *nx += w * p;
                }
            }
        }
        std::mem::swap(&mut power, &mut next);
    }
    Err(Error::MixingCap { cap: MIXING_ITERATION_CAP, last_tv })
}

/// The optimal all-content state and its stationary mass. Requires the
/// utilities to admit a unique optimal assignment.
pub fn pi_optimal(model: &ChainModel) -> Result<(JointState, f64)> {
    let (allocation, _) = assignment::optimal_assignment(&model.utilities)?;
    if !assignment::uniqueness_check(&model.utilities, 1e-9)? {
        return Err(Error::NonUniqueOptimum);
    }
    let z_star = JointState::all_content(&allocation);
    let pi = model.stationary_linear()?;
    let mass = pi[z_star.index(model.arms)];
    Ok((z_star, mass))
}

/// Smallest utility gap to a player's best achievable value, over the
/// finite set of values her utility can take across all profiles (her own
/// arm values, plus zero from collisions when another player exists).
pub fn utility_gap_alpha(utilities: &[Vec<f64>]) -> Result<f64> {
    let players = utilities.len();
    let mut alpha = f64::INFINITY;
    for row in utilities {
        let u_max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut values: Vec<f64> = row.clone();
        if players >= 2 {
            values.push(0.0);
        }
        let gap = values
            .into_iter()
            .filter(|&v| v < u_max)
            .map(|v| u_max - v)
            .fold(f64::INFINITY, f64::min);
        if !gap.is_finite() {
            return Err(Error::DegenerateInstance);
        }
        alpha = alpha.min(gap);
    }
    Ok(alpha)
}

/// Exploration-rate threshold under which the optimal state's stationary
/// mass exceeds one half:
/// min( 10^(-1/alpha), (1 - (9/10)^(1 / ((N-1) 2^N M^N)))^(1/c) ).
/// Requires c to exceed the total best-case utility minus the optimal
/// objective.
pub fn epsilon_threshold(utilities: &[Vec<f64>], c: f64) -> Result<f64> {
    let players = utilities.len();
    if players < 2 {
        return Err(Error::InvalidConfig(
            "threshold analysis needs at least two players".into(),
        ));
    }
    let arms = utilities.first().map_or(0, Vec::len);
    let (_, j1) = assignment::optimal_assignment(utilities)?;
    let j0: f64 = utilities
        .iter()
        .map(|row| row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
        .sum();
    let required = j0 - j1;
    if c <= required {
        return Err(Error::EscapeExponentTooSmall {
            c,
            required,
            deficit: required - c,
        });
    }
    let alpha = utility_gap_alpha(utilities)?;
    let term_alpha = 10f64.powf(-1.0 / alpha);
    let tree_count = (players as f64 - 1.0)
        * 2f64.powi(players as i32)
        * (arms as f64).powi(players as i32);
    let term_c = (1.0 - 0.9f64.powf(1.0 / tree_count)).powf(1.0 / c);
    Ok(term_alpha.min(term_c))
}

//! Exact solutions of the assignment problem on a players-by-arms matrix
//! of expected rewards: the optimal objective J1 and allocation, the
//! second-best objective J2, the perturbation margin (J1 - J2) / (2N),
//! and uniqueness / perturbation-invariance checks.
//!
//! Two independent routes compute the optimum: a rectangular Hungarian
//! solver (shortest augmenting paths with potentials, O(N^2 M)) and a
//! brute-force enumeration over injective allocations. They must always
//! agree; the acceptance suite checks this exhaustively.

use crate::error::{Error, Result};
use crate::rng::Stream;
use rand::Rng;

/// Enumeration guard: brute force and J2 scans are limited to this many
/// players.
pub const MAX_ENUM_PLAYERS: usize = 9;

/// Tie tolerance inside the solver; near-degenerate instances are reported
/// by [`uniqueness_check`] rather than silently resolved.
pub const SOLVER_TIE_TOL: f64 = 1e-12;

/// Everything the margin analysis needs about one means matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `allocation[n]` is the arm assigned to player n (pairwise distinct).
    pub allocation: Vec<usize>,
    /// Optimal objective.
    pub j1: f64,
    /// Best objective strictly below `j1`, collisions allowed (and zeroed).
    pub j2: f64,
    /// Estimation margin (j1 - j2) / (2N).
    pub margin: f64,
}

impl AssignmentResult {
    /// Solves the instance and derives the margin. Requires an enumerable
    /// instance (N <= [`MAX_ENUM_PLAYERS`]) for J2.
    pub fn analyze(means: &[Vec<f64>]) -> Result<Self> {
        let (allocation, j1) = optimal_assignment(means)?;
        let j2 = second_best_objective(means)?;
        let margin = (j1 - j2) / (2.0 * means.len() as f64);
        Ok(Self { allocation, j1, j2, margin })
    }
}

fn check_shape(means: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = means.len();
    if n == 0 {
        return Err(Error::InvalidConfig("empty means matrix".into()));
    }
    let m = means[0].len();
    if means.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidConfig("ragged means matrix".into()));
    }
    if m < n {
        return Err(Error::NotEnoughArms { players: n, arms: m });
    }
    if means.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("means must be finite".into()));
    }
    Ok((n, m))
}

fn objective(means: &[Vec<f64>], allocation: &[usize]) -> f64 {
    allocation.iter().enumerate().map(|(n, &i)| means[n][i]).sum()
}

/// Maximum-weight collision-free assignment via shortest augmenting paths
/// on the shifted cost matrix. Returns (allocation, J1).
///
/// Since the assignment is always injective, the result is valid for
/// matrices with arbitrary (even negative) finite entries.
pub fn optimal_assignment(means: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let (n, m) = check_shape(means)?;
    // Maximize by minimizing (max_entry - w); the shift keeps reduced costs
    // non-negative for the Dijkstra-style augmentation.
    let shift = means
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let cost = |row: usize, col: usize| shift - means[row][col];

    // 1-based arrays in the classic formulation; p[j] is the row matched
    // to column j, 0 meaning unmatched.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut allocation = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] > 0 {
            allocation[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(allocation.iter().all(|&a| a != usize::MAX));
    let j1 = objective(means, &allocation);
    Ok((allocation, j1))
}

/// Exhaustive maximum over injective allocations; the independent oracle
/// for [`optimal_assignment`]. Ties break toward the lexicographically
/// smallest allocation.
pub fn brute_force_assignment(means: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let (n, _m) = check_shape(means)?;
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::EnumerationGuard {
            what: format!("brute-force assignment over {n} players"),
            limit: MAX_ENUM_PLAYERS,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut current = Vec::with_capacity(n);
    enumerate_injective(means, &mut current, 0.0, &mut best);
    let (allocation, j1) = best.expect("at least one injective allocation exists");
    Ok((allocation, j1))
}

fn enumerate_injective(
    means: &[Vec<f64>],
    current: &mut Vec<usize>,
    acc: f64,
    best: &mut Option<(Vec<usize>, f64)>,
) {
    let n = means.len();
    if current.len() == n {
        let better = match best {
            None => true,
            Some((_, b)) => acc > *b + SOLVER_TIE_TOL,
        };
        if better {
            *best = Some((current.clone(), acc));
        }
        return;
    }
    let row = current.len();
    for arm in 0..means[row].len() {
        if current.contains(&arm) {
            continue;
        }
        current.push(arm);
        enumerate_injective(means, current, acc + means[row][arm], best);
        current.pop();
    }
}

/// The best objective strictly below J1, over ALL profiles with colliding
/// players' utilities zeroed. Strictness uses exact comparison against the
/// enumeration's own maximum, so both values live on the same float path.
pub fn second_best_objective(means: &[Vec<f64>]) -> Result<f64> {
    let (n, m) = check_shape(means)?;
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::EnumerationGuard {
            what: format!("profile enumeration over {m}^{n} profiles"),
            limit: MAX_ENUM_PLAYERS,
        });
    }
    let mut profile = vec![0usize; n];
    let mut occupancy = vec![0u32; m];
    let mut j1 = f64::NEG_INFINITY;
    let mut j2 = f64::NEG_INFINITY;
    loop {
        occupancy.iter_mut().for_each(|x| *x = 0);
        for &a in &profile {
            occupancy[a] += 1;
        }
        let value: f64 = profile
            .iter()
            .enumerate()
            .filter(|(_, &a)| occupancy[a] == 1)
            .map(|(p, &a)| means[p][a])
            .sum();
        if value > j1 {
            j2 = j1;
            j1 = value;
        } else if value < j1 && value > j2 {
            j2 = value;
        }
        // Mixed-radix increment.
        let mut pos = 0;
        while pos < n {
            profile[pos] += 1;
            if profile[pos] < m {
                break;
            }
            profile[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    if j2 == f64::NEG_INFINITY {
        return Err(Error::DegenerateInstance);
    }
    Ok(j2)
}

/// Draws `trials` i.i.d. perturbation matrices with entries uniform on
/// (-delta, delta), re-solves each, and reports whether the argmax
/// allocation ever changed.
pub fn perturbation_invariance_check(
    means: &[Vec<f64>],
    delta: f64,
    trials: u32,
    rng: &mut Stream,
) -> Result<bool> {
    check_shape(means)?;
    if delta < 0.0 {
        return Err(Error::InvalidConfig("perturbation delta must be >= 0".into()));
    }
    let (baseline, _) = optimal_assignment(means)?;
    let mut perturbed: Vec<Vec<f64>> = means.to_vec();
    for _ in 0..trials {
        for (prow, row) in perturbed.iter_mut().zip(means) {
            for (p, &w) in prow.iter_mut().zip(row) {
                *p = w + rng.random_range(-delta..=delta);
            }
        }
        let (allocation, _) = optimal_assignment(&perturbed)?;
        if allocation != baseline {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff exactly one injective allocation attains the maximum within
/// `tolerance`.
pub fn uniqueness_check(means: &[Vec<f64>], tolerance: f64) -> Result<bool> {
    let (n, _m) = check_shape(means)?;
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::EnumerationGuard {
            what: format!("uniqueness enumeration over {n} players"),
            limit: MAX_ENUM_PLAYERS,
        });
    }
    let (_, j1) = brute_force_assignment(means)?;
    let mut hits = 0u64;
    let mut current = Vec::with_capacity(n);
    count_near_optimal(means, &mut current, 0.0, j1, tolerance, &mut hits);
    Ok(hits == 1)
}

fn count_near_optimal(
    means: &[Vec<f64>],
    current: &mut Vec<usize>,
    acc: f64,
    j1: f64,
    tolerance: f64,
    hits: &mut u64,
) {
    if current.len() == means.len() {
        if acc >= j1 - tolerance {
            *hits += 1;
        }
        return;
    }
    let row = current.len();
    for arm in 0..means[row].len() {
        if current.contains(&arm) {
            continue;
        }
        current.push(arm);
        count_near_optimal(means, current, acc + means[row][arm], j1, tolerance, hits);
        current.pop();
    }
}

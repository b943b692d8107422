//! Closed-form error bounds for the exploration phase.
//!
//! Evaluates the concentration-based bound on the probability that the
//! assignment computed from the estimated means differs from the true
//! optimum after epoch k, and the union bound over the voting window of
//! the last floor(k/2) + 1 exploration phases. The bounds are asymptotic
//! in k; raw values above one are reported as vacuous rather than hidden.

use crate::error::{Error, Result};

/// Problem parameters feeding the bound. `sigma_max` and `b_max` are the
/// largest per-(player, arm) Bernstein parameters (standard deviation and
/// scale); the formula uses sigma_max squared.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub players: usize,
    pub arms: usize,
    pub c1: f64,
    pub delta: f64,
    pub sigma_max: f64,
    pub b_max: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Bound values at one epoch. `p_ek` and `p_union` are clamped to 1 for
/// reporting; the raw values stay available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationBound {
    /// The concentration rate w.
    pub w: f64,
    pub p_ek: f64,
    pub p_union: f64,
    pub p_ek_raw: f64,
    pub p_union_raw: f64,
}

impl ExplorationBound {
    pub fn ek_vacuous(&self) -> bool {
        self.p_ek_raw >= 1.0
    }

    pub fn union_vacuous(&self) -> bool {
        self.p_union_raw >= 1.0
    }
}

/// Evaluates the per-epoch failure bound and the window union bound at
/// epoch `k`:
///
/// w = (J1 - J2)^2 / (M N^2 (80 sigma_max^2 + (40 b_max / N)(J1 - J2)))
///
/// p_ek    = 2NM exp(-w c1 (k/2)^d k) + NM exp(-c1 (k/2)^d k / (36 M^2))
/// p_union = 2NM / (1 - exp(-w c1 (k/4)^d)) * exp(-(w/2) c1 (k/4)^d k)
///         +  NM / (1 - exp(-c1 (k/4)^d / (36 M^2)))
///              * exp(-c1 (k/4)^d k / (72 M^2))
pub fn exploration_bound(params: &BoundParams, k: u32) -> Result<ExplorationBound> {
    if params.players == 0 || params.arms < params.players {
        return Err(Error::InvalidConfig("need 1 <= players <= arms".into()));
    }
    let gap = params.j1 - params.j2;
    if !gap.is_finite() || gap <= 0.0 {
        return Err(Error::InvalidConfig("bounds require j1 > j2".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("epoch index starts at 1".into()));
    }
    for (name, v) in [
        ("c1", params.c1),
        ("sigma_max", params.sigma_max),
        ("b_max", params.b_max),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
    }
    let n = params.players as f64;
    let m = params.arms as f64;
    let w = gap * gap
        / (m * n * n * (80.0 * params.sigma_max * params.sigma_max + 40.0 * params.b_max / n * gap));

    let kf = k as f64;
    let nm = n * m;
    let half = (kf / 2.0).powf(params.delta);
    let quarter = (kf / 4.0).powf(params.delta);
    let p_ek_raw = 2.0 * nm * (-w * params.c1 * half * kf).exp()
        + nm * (-params.c1 * half * kf / (36.0 * m * m)).exp();
    let geo_a = 1.0 - (-w * params.c1 * quarter).exp();
    let geo_b = 1.0 - (-params.c1 * quarter / (36.0 * m * m)).exp();
    let p_union_raw = 2.0 * nm / geo_a * (-(w / 2.0) * params.c1 * quarter * kf).exp()
        + nm / geo_b * (-params.c1 * quarter * kf / (72.0 * m * m)).exp();

    Ok(ExplorationBound {
        w,
        p_ek: p_ek_raw.min(1.0),
        p_union: p_union_raw.min(1.0),
        p_ek_raw,
        p_union_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base_params() -> BoundParams {
        BoundParams {
            players: 3,
            arms: 3,
            c1: 500.0,
            delta: 0.0,
            sigma_max: 0.05f64.sqrt(),
            b_max: 0.25,
            j1: 1.55,
            j2: 1.2,
        }
    }

    #[test]
    fn rate_matches_hand_evaluation() {
        // gap = 0.35: w = 0.1225 / (27 * (80*0.05 + (40*0.25/3)*0.35)).
        let bound = exploration_bound(&base_params(), 1).unwrap();
        let expected = 0.1225 / (27.0 * (4.0 + 40.0 * 0.25 / 3.0 * 0.35));
        assert_abs_diff_eq!(bound.w, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(bound.w, 8.7813620e-4, epsilon = 1e-10);
    }

    #[test]
    fn bounds_decrease_in_epoch_and_phase_length() {
        let params = base_params();
        let mut previous = f64::INFINITY;
        for k in 1..=8 {
            let b = exploration_bound(&params, k).unwrap();
            assert!(b.p_ek_raw < previous);
            previous = b.p_ek_raw;
        }
        let short = exploration_bound(&params, 2).unwrap();
        let long = exploration_bound(&BoundParams { c1: 5000.0, ..params }, 2).unwrap();
        assert!(long.p_ek_raw < short.p_ek_raw);
        assert!(long.p_union_raw < short.p_union_raw);
    }

    #[test]
    fn vacuous_bounds_are_reported_not_hidden() {
        let tiny = BoundParams { c1: 1.0, ..base_params() };
        let b = exploration_bound(&tiny, 1).unwrap();
        assert!(b.ek_vacuous());
        assert_eq!(b.p_ek, 1.0);
        assert!(b.p_ek_raw > 1.0);
    }

    #[test]
    fn rejects_inverted_objectives() {
        let mut params = base_params();
        params.j2 = 2.0;
        assert!(exploration_bound(&params, 1).is_err());
    }
}

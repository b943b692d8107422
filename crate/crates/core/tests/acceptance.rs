//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `--nocapture` to see them on success). Every tolerance
//! is pinned here, in code.

use std::sync::OnceLock;

use got_core::assignment::{self, AssignmentResult};
use got_core::bounds::{exploration_bound, BoundParams};
use got_core::chain;
use got_core::engine::{CExponent, GameConfig, Mode};
use got_core::experiment::{
    emit_csv, emit_summaries_csv, run_batch, BatchResult, ExperimentConfig, MeansRange,
    OutputKind,
};
use got_core::reward::{
    sample_rewards_into, RewardChain, RewardProcessState, RewardRng, RewardSpec,
};
use got_core::rng::{RngFactory, StreamDomain};
use got_core::RegretBaseline;
use rand::Rng;

fn section7_means() -> Vec<Vec<f64>> {
    vec![
        vec![0.1, 0.05, 0.9],
        vec![0.1, 0.25, 0.3],
        vec![0.4, 0.2, 0.8],
    ]
}

fn section7_config() -> ExperimentConfig {
    ExperimentConfig {
        game: GameConfig {
            players: 3,
            arms: 3,
            horizon: 2_000_000,
            c1: 500.0,
            c2: 6000.0,
            c3: 6000.0,
            delta: 0.0,
            epsilon: 0.01,
            c_exponent: CExponent::Auto,
            seed: 1,
            mode: Mode::Epochs,
            reuse_samples: true,
            baseline_source: Default::default(),
            reward: RewardSpec::iid_gaussian(section7_means(), 0.05),
        },
        replications: 20,
        seed_base: 1,
        outputs: vec![OutputKind::RegretCurve, OutputKind::UtilityRatio],
        downsample_stride: 100_000,
        randomize_means: None,
        regret_baseline: RegretBaseline::Expected,
    }
}

/// Criteria 1 and 3 share one 20-seed batch.
fn section7_batch() -> &'static BatchResult {
    static BATCH: OnceLock<BatchResult> = OnceLock::new();
    BATCH.get_or_init(|| run_batch(&section7_config(), None).expect("batch runs"))
}

#[test]
fn criterion_01_regret_band_3x3() {
    let batch = section7_batch();
    let horizon = 2_000_000f64;
    let log2t = horizon.log2();
    let finals: Vec<f64> = batch.summaries.iter().map(|s| s.final_regret).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let (lo, hi) = (300.0 * log2t, 900.0 * log2t);
    assert!(
        finals.len() >= 20,
        "criterion 1: need at least 20 seeds, got {}",
        finals.len()
    );
    assert!(
        mean >= lo && mean <= hi,
        "criterion 1: FAIL -- mean regret {mean:.0} outside [{lo:.0}, {hi:.0}]"
    );
    println!(
        "criterion 1 (3x3 regret band): PASS -- mean regret {mean:.0} = {:.1} * log2(T) in [300, 900] * log2(T)",
        mean / log2t
    );
}

#[test]
fn criterion_02_utility_ratio_5x5() {
    let config = ExperimentConfig {
        game: GameConfig {
            players: 5,
            arms: 5,
            horizon: 4_000_000,
            c1: 500.0,
            c2: 60_000.0,
            c3: 60_000.0,
            delta: 0.0,
            epsilon: 0.001,
            c_exponent: CExponent::Auto,
            seed: 1,
            mode: Mode::Epochs,
            reuse_samples: true,
            baseline_source: Default::default(),
            reward: RewardSpec::iid_gaussian(vec![vec![0.5; 5]; 5], 0.05),
        },
        replications: 20,
        seed_base: 500,
        outputs: vec![OutputKind::UtilityRatio],
        downsample_stride: 400_000,
        randomize_means: Some(MeansRange { low: 0.05, high: 0.95 }),
        regret_baseline: RegretBaseline::Expected,
    };
    let batch = run_batch(&config, None).expect("batch runs");
    let ratios: Vec<f64> = batch.summaries.iter().map(|s| s.final_ratio).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        mean >= 0.85,
        "criterion 2: FAIL -- mean final utility ratio {mean:.4} below 0.85"
    );
    println!(
        "criterion 2 (5x5 random matrices): PASS -- mean final utility ratio {mean:.4} >= 0.85 over {} matrices",
        ratios.len()
    );
}

#[test]
fn criterion_03_exploitation_correctness() {
    let batch = section7_batch();
    let perfect = batch
        .summaries
        .iter()
        .filter(|s| s.exploit_accuracy_from_epoch3 == Some(1.0))
        .count();
    let total = batch.summaries.len();
    let fraction = perfect as f64 / total as f64;
    assert!(
        fraction >= 0.9,
        "criterion 3: FAIL -- only {perfect}/{total} seeds exploit perfectly from epoch 3"
    );
    println!(
        "criterion 3 (exploitation correctness): PASS -- accuracy 1.0 from epoch 3 in {perfect}/{total} seeds"
    );
}

#[test]
fn criterion_04_stationary_mass_grows_as_epsilon_shrinks() {
    let utilities = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
    let grid = [0.3, 0.1, 0.03, 0.01, 0.003];
    let mut masses = Vec::new();
    for &epsilon in &grid {
        let model = chain::build_chain(&utilities, epsilon, 1.4).expect("chain builds");
        let (z_star, mass) = chain::pi_optimal(&model).expect("unique optimum");
        assert_eq!(z_star.baselines, vec![0, 1]);
        masses.push(mass);
    }
    for w in masses.windows(2) {
        assert!(
            w[1] > w[0],
            "criterion 4: FAIL -- stationary mass not strictly increasing: {masses:?}"
        );
    }
    assert!(
        *masses.last().unwrap() > 0.5,
        "criterion 4: FAIL -- mass {} at epsilon 0.003 not above 1/2",
        masses.last().unwrap()
    );
    println!(
        "criterion 4 (exact stationary growth): PASS -- pi(z*) = {masses:?} strictly increasing, {:.4} > 0.5 at eps 0.003",
        masses.last().unwrap()
    );
}

#[test]
fn criterion_05_tree_formula_equivalence() {
    let factory = RngFactory::new(20_240_817);
    let mut rng = factory.stream(StreamDomain::Perturbation, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| {
                let raw: Vec<f64> = (0..8).map(|_| rng.random_range(0.01..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / sum).collect()
            })
            .collect();
        assert!(chain::is_irreducible(&rows));
        let linear = chain::stationary_linear(&rows).expect("solve");
        let tree = chain::stationary_tree_formula(&rows).expect("cofactor");
        let gap = linear
            .iter()
            .zip(&tree)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    assert!(
        worst <= 1e-9,
        "criterion 5: FAIL -- routes disagree by {worst:.3e} on random chains"
    );
    // Every 2-player/2-arm dynamics chain exercised in this suite.
    let mut worst_got = 0.0f64;
    for utilities in [
        vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        vec![vec![0.9, 0.3], vec![0.2, 0.7]],
    ] {
        for epsilon in [0.3, 0.1, 0.03, 0.01, 0.003] {
            let model = chain::build_chain(&utilities, epsilon, 1.4).expect("chain builds");
            let linear = model.stationary_linear().expect("solve");
            let tree = model.stationary_tree_formula().expect("cofactor");
            let gap = linear
                .iter()
                .zip(&tree)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_got = worst_got.max(gap);
        }
    }
    assert!(
        worst_got <= 1e-9,
        "criterion 5: FAIL -- routes disagree by {worst_got:.3e} on dynamics chains"
    );
    println!(
        "criterion 5 (stationary route equivalence): PASS -- max gap {worst:.2e} random, {worst_got:.2e} dynamics"
    );
}

#[test]
fn criterion_06_margin_perturbations_never_flip_argmax() {
    let means = section7_means();
    let result = AssignmentResult::analyze(&means).expect("analyzable");
    let delta = 0.99 * result.margin;
    let mut rng = RngFactory::new(63).stream(StreamDomain::Perturbation, 0);
    let stable = assignment::perturbation_invariance_check(&means, delta, 1000, &mut rng)
        .expect("check runs");
    assert!(
        stable,
        "criterion 6: FAIL -- argmax changed within delta = {delta:.5}"
    );
    println!(
        "criterion 6 (margin stability): PASS -- 1000 perturbations at delta {delta:.5} kept the allocation"
    );
}

#[test]
fn criterion_07_solver_matches_brute_force() {
    let mut rng = RngFactory::new(777).stream(StreamDomain::Perturbation, 1);
    for trial in 0..500 {
        let n = 1 + (trial % 6);
        let m = n + (trial % (7 - n));
        let means: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(0.01..1.0)).collect())
            .collect();
        let (fast, j_fast) = assignment::optimal_assignment(&means).expect("solver");
        let (slow, j_slow) = assignment::brute_force_assignment(&means).expect("oracle");
        assert_eq!(
            fast, slow,
            "criterion 7: FAIL -- allocations differ on trial {trial}: {means:?}"
        );
        assert_eq!(
            j_fast, j_slow,
            "criterion 7: FAIL -- objectives differ on trial {trial}"
        );
    }
    println!("criterion 7 (oracle equivalence): PASS -- 500 instances, exact allocation and J1 match");
}

#[test]
fn criterion_08_exploration_bound_dominates_monte_carlo() {
    let means = section7_means();
    let result = AssignmentResult::analyze(&means).expect("analyzable");
    let sigma = 0.05f64.sqrt();
    // Gaussian rewards satisfy the moment condition with scale b = sigma.
    let params = BoundParams {
        players: 3,
        arms: 3,
        c1: 6000.0,
        delta: 0.0,
        sigma_max: sigma,
        b_max: sigma,
        j1: result.j1,
        j2: result.j2,
    };
    let bound = exploration_bound(&params, 1).expect("bound evaluates");
    assert!(
        bound.p_ek < 1.0,
        "criterion 8: bound must be informative, got {}",
        bound.p_ek_raw
    );
    let spec = RewardSpec::iid_gaussian(means.clone(), 0.05);
    let trials = 1000u32;
    let turns = 6000u64;
    let mut failures = 0u32;
    for trial in 0..trials {
        let factory = RngFactory::new(10_000 + trial as u64);
        let mut reward_rng = RewardRng::new(&factory, 3, 3);
        let mut state = RewardProcessState::new(&spec);
        let mut uniform = factory.stream(StreamDomain::Agent, 0);
        let mut sums = vec![vec![0.0f64; 3]; 3];
        let mut profile = [0usize; 3];
        let mut utilities = [0.0f64; 3];
        let mut no_collision = [false; 3];
        let mut occupancy = [0u8; 3];
        for _ in 0..turns {
            for slot in profile.iter_mut() {
                *slot = uniform.random_range(0..3);
            }
            sample_rewards_into(
                &spec,
                &mut state,
                &profile,
                &mut reward_rng,
                &mut utilities,
                &mut no_collision,
                &mut occupancy,
            );
            for n in 0..3 {
                if no_collision[n] {
                    sums[n][profile[n]] += utilities[n];
                }
            }
        }
        let estimates: Vec<Vec<f64>> = (0..3)
            .map(|n| {
                (0..3)
                    .map(|i| {
                        let v = state.visits(n, i);
                        if v == 0 {
                            0.0
                        } else {
                            sums[n][i] / v as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let (estimated, _) = assignment::optimal_assignment(&estimates).expect("solver");
        if estimated != result.allocation {
            failures += 1;
        }
    }
    let frequency = failures as f64 / trials as f64;
    assert!(
        frequency <= bound.p_ek,
        "criterion 8: FAIL -- empirical failure rate {frequency:.4} above bound {:.4}",
        bound.p_ek
    );
    println!(
        "criterion 8 (exploration bound dominance): PASS -- {failures}/{trials} failures <= bound {:.4}",
        bound.p_ek
    );
}

#[test]
fn criterion_09_markovian_mode_settles_on_oracle_optimum() {
    let chain_spec = |states: [f64; 2], p: [[f64; 2]; 2]| RewardChain {
        states: states.to_vec(),
        transition: p.iter().map(|r| r.to_vec()).collect(),
    };
    let spec = RewardSpec::markovian(vec![
        vec![
            chain_spec([0.5, 1.5], [[0.9, 0.1], [0.1, 0.9]]),
            chain_spec([0.2, 0.6], [[0.5, 0.5], [0.5, 0.5]]),
        ],
        vec![
            chain_spec([0.3, 0.5], [[0.8, 0.2], [0.2, 0.8]]),
            chain_spec([0.8, 1.6], [[0.6, 0.4], [0.2, 0.8]]),
        ],
    ]);
    // Independent oracle: stationary expectations per chain, allocation by
    // brute force.
    let expected = spec.expected_means();
    let (oracle_allocation, _) = assignment::brute_force_assignment(&expected).expect("oracle");
    assert_eq!(oracle_allocation, vec![0, 1]);
    let config = GameConfig {
        players: 2,
        arms: 2,
        horizon: 300_000,
        c1: 500.0,
        c2: 2000.0,
        c3: 2000.0,
        delta: 0.0,
        epsilon: 0.01,
        c_exponent: CExponent::Auto,
        seed: 0,
        mode: Mode::Epochs,
        reuse_samples: true,
        baseline_source: Default::default(),
        reward: spec,
    };
    let mut accuracies = Vec::new();
    for seed in 900..910 {
        let mut game = config.clone();
        game.seed = seed;
        let trace = got_core::engine::run_game(&game).expect("run");
        let accuracy = trace
            .exploitation_accuracy_from_epoch(&oracle_allocation, 4)
            .expect("epochs from 4 exist");
        accuracies.push(accuracy);
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    assert!(
        mean >= 0.95,
        "criterion 9: FAIL -- mean exploitation accuracy {mean:.4} below 0.95: {accuracies:?}"
    );
    println!(
        "criterion 9 (Markovian mode): PASS -- mean accuracy {mean:.4} on a* over epochs >= 4, 10 seeds"
    );
}

#[test]
fn criterion_10_byte_identical_outputs() {
    let config = ExperimentConfig {
        game: GameConfig {
            players: 3,
            arms: 3,
            horizon: 20_000,
            c1: 300.0,
            c2: 2000.0,
            c3: 1000.0,
            delta: 0.0,
            epsilon: 0.01,
            c_exponent: CExponent::Auto,
            seed: 1,
            mode: Mode::Epochs,
            reuse_samples: true,
            baseline_source: Default::default(),
            reward: RewardSpec::iid_gaussian(section7_means(), 0.05),
        },
        replications: 4,
        seed_base: 42,
        outputs: vec![
            OutputKind::RegretCurve,
            OutputKind::UtilityRatio,
            OutputKind::Occupancy,
        ],
        downsample_stride: 700,
        randomize_means: None,
        regret_baseline: RegretBaseline::Expected,
    };
    let dir = tempfile::tempdir().expect("tempdir");
    let mut snapshots: Vec<Vec<Vec<u8>>> = Vec::new();
    for (run, workers) in [(0, Some(1)), (1, Some(3)), (2, Some(1))] {
        let batch = run_batch(&config, workers).expect("batch runs");
        let mut files = Vec::new();
        for series in &batch.series {
            let path = dir
                .path()
                .join(format!("{}_{run}.csv", series.kind.file_stem()));
            emit_csv(series, &path).expect("emit");
            files.push(std::fs::read(&path).expect("read back"));
        }
        let path = dir.path().join(format!("summary_{run}.csv"));
        emit_summaries_csv(&batch.summaries, &path).expect("emit");
        files.push(std::fs::read(&path).expect("read back"));
        snapshots.push(files);
    }
    assert_eq!(
        snapshots[0], snapshots[1],
        "criterion 10: FAIL -- output depends on worker count"
    );
    assert_eq!(
        snapshots[0], snapshots[2],
        "criterion 10: FAIL -- output differs across invocations"
    );
    println!(
        "criterion 10 (determinism): PASS -- byte-identical CSVs across invocations and worker counts"
    );
}

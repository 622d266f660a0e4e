//! Property-based invariants of the integration weights: simplex
//! normalization for every strategy, bitwise agreement between the naive and
//! incremental engines (including under duplicated sample positions), the
//! collapse of the inexact hybrid onto the empirical weights at β = 1, the
//! metric-extreme degenerations, Monte-Carlo consistency of nearest-record
//! counting with the exact cell probabilities, and the pool growth law.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use csg::{
    compute_weights, exact_hybrid_weights, exact_weights_1d, joint_nearest, pool_target,
    xspace_voronoi_measures_1d, BoxDomain, Design, Distribution, EvaluationRecord, History,
    JointMetric, Sample, WeightEngine, WeightMode, WeightStrategy,
};

/// One random step: the iterate, the evaluated sample, and extra unevaluated
/// pool draws trailing it.
type RawStep = (f64, f64, Vec<f64>);

fn steps_strategy(max_len: usize, max_extra: usize) -> impl Strategy<Value = Vec<RawStep>> {
    prop::collection::vec(
        (
            0.0..1.0f64,
            0.0..1.0f64,
            prop::collection::vec(0.0..1.0f64, 0..=max_extra),
        ),
        1..=max_len,
    )
}

/// Materializes raw steps into a history; returns it with the query design.
fn build_history(steps: &[RawStep]) -> (History, Vec<f64>) {
    let mut history = History::new();
    let mut theta = Vec::new();
    for (t, x, extra) in steps {
        theta = vec![*t];
        let idx = history.push_pool(Sample(vec![*x]));
        history.push_record(
            EvaluationRecord {
                theta: Design(theta.clone()),
                x: Sample(vec![*x]),
                grad: vec![t - x],
                jval: t + x,
            },
            idx,
        );
        for &e in extra {
            history.push_pool(Sample(vec![e]));
        }
    }
    (history, theta)
}

fn unit_uniform() -> Distribution {
    Distribution::uniform(BoxDomain::interval(0.0, 1.0).expect("valid interval"))
}

fn all_strategies() -> [WeightStrategy; 4] {
    [
        WeightStrategy::Exact,
        WeightStrategy::Empirical,
        WeightStrategy::ExactHybrid,
        WeightStrategy::InexactHybrid { beta: 1.5 },
    ]
}

proptest! {
    /// Every strategy returns a probability vector over the records.
    #[test]
    fn weights_form_a_probability_vector(steps in steps_strategy(60, 2)) {
        let (history, theta) = build_history(&steps);
        let dist = unit_uniform();
        let metric = JointMetric::default();
        for strategy in all_strategies() {
            let w = compute_weights(&strategy, &history, &metric, &theta, &dist)
                .expect("weights computable");
            prop_assert_eq!(w.len(), history.len());
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12,
                "{} weights sum to {}", strategy.label(), sum);
            for &a in w.iter() {
                prop_assert!((0.0..=1.0).contains(&a),
                    "{} produced weight {} outside [0, 1]", strategy.label(), a);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The incremental engine reproduces the naive rescan bit for bit at
    /// every step of a growing history.
    #[test]
    fn incremental_engine_matches_naive_bitwise(steps in steps_strategy(40, 2)) {
        let dist = unit_uniform();
        let metric = JointMetric::default();
        for strategy in all_strategies() {
            let mut naive = WeightEngine::new(strategy.clone(), WeightMode::Naive)
                .expect("naive engine");
            let mut incremental = WeightEngine::new(strategy.clone(), WeightMode::Incremental)
                .expect("incremental engine");
            let mut history = History::new();
            for (step, (t, x, extra)) in steps.iter().enumerate() {
                let theta = vec![*t];
                let idx = history.push_pool(Sample(vec![*x]));
                history.push_record(
                    EvaluationRecord {
                        theta: Design(theta.clone()),
                        x: Sample(vec![*x]),
                        grad: vec![t - x],
                        jval: t + x,
                    },
                    idx,
                );
                if strategy.uses_pool() {
                    for &e in extra {
                        history.push_pool(Sample(vec![e]));
                    }
                }
                let a = naive.compute(&history, &metric, &theta, &dist).expect("naive weights");
                let b = incremental.compute(&history, &metric, &theta, &dist)
                    .expect("incremental weights");
                for (k, (x, y)) in a.iter().zip(b.iter()).enumerate() {
                    prop_assert_eq!(x.to_bits(), y.to_bits(),
                        "{} diverges at step {} record {}: naive {} vs incremental {}",
                        strategy.label(), step + 1, k, x, y);
                }
            }
        }
    }

    /// Duplicated sample positions (ties in every nearest-point decision)
    /// keep both engines normalized and in bitwise agreement.
    #[test]
    fn duplicated_positions_stay_consistent(
        steps in steps_strategy(30, 1),
        dups in prop::collection::vec(any::<prop::sample::Index>(), 30),
    ) {
        // Rewrite roughly half the sample positions to repeat an earlier one.
        let mut steps = steps;
        let n = steps.len();
        for k in 1..n {
            if k % 2 == 1 {
                let src = dups[k].index(k);
                steps[k].1 = steps[src].1;
            }
        }
        let dist = unit_uniform();
        let metric = JointMetric::default();
        for strategy in all_strategies() {
            let (history, theta) = build_history(&steps);
            let w = compute_weights(&strategy, &history, &metric, &theta, &dist)
                .expect("weights with duplicate positions");
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12,
                "{} loses mass under duplicates: sum {}", strategy.label(), sum);
            let mut incremental = WeightEngine::new(strategy.clone(), WeightMode::Incremental)
                .expect("incremental engine");
            let b = incremental.compute(&history, &metric, &theta, &dist)
                .expect("incremental weights");
            for (k, (x, y)) in w.iter().zip(b.iter()).enumerate() {
                prop_assert_eq!(x.to_bits(), y.to_bits(),
                    "{} tie handling differs at record {}", strategy.label(), k);
            }
        }
    }

    /// With β = 1 the pool is exactly the evaluated sample set, so the
    /// inexact hybrid is the empirical strategy, bit for bit.
    #[test]
    fn beta_one_collapses_to_empirical(steps in steps_strategy(50, 0)) {
        let (history, theta) = build_history(&steps);
        let dist = unit_uniform();
        let metric = JointMetric::default();
        let emp = compute_weights(&WeightStrategy::Empirical, &history, &metric, &theta, &dist)
            .expect("empirical weights");
        let ih = compute_weights(
            &WeightStrategy::InexactHybrid { beta: 1.0 }, &history, &metric, &theta, &dist)
            .expect("beta=1 weights");
        for (k, (x, y)) in emp.iter().zip(ih.iter()).enumerate() {
            prop_assert_eq!(x.to_bits(), y.to_bits(), "divergence at record {}", k);
        }
    }

    /// A dominant design distance collapses every cell except the one of the
    /// record nearest to the query design: the stochastic-gradient one-hot.
    #[test]
    fn dominant_design_weight_is_one_hot(steps in steps_strategy(40, 0)) {
        let (history, theta) = build_history(&steps);
        // Keep clear of near-ties in design distance so the winning cell
        // covers the whole support exactly.
        let mut dists: Vec<(f64, usize)> = history
            .records()
            .iter()
            .enumerate()
            .map(|(k, r)| ((r.theta.scalar() - theta[0]).abs(), k))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if dists.len() > 1 {
            prop_assume!(dists[1].0 - dists[0].0 > 1e-6);
        }
        let winner = dists[0].1;
        let dist = unit_uniform();
        let metric = JointMetric::new(1e9, 1.0).expect("valid metric");
        let w = exact_weights_1d(&history, &metric, &theta, &dist).expect("exact weights");
        for (k, &a) in w.iter().enumerate() {
            let expected: f64 = if k == winner { 1.0 } else { 0.0 };
            prop_assert_eq!(a.to_bits(), expected.to_bits(),
                "record {} has weight {}, winner is {}", k, a, winner);
        }
    }

    /// A vanishing design weight reduces both exact strategies to the plain
    /// sample-space Voronoi measures.
    #[test]
    fn zero_design_weight_reduces_to_sample_voronoi(steps in steps_strategy(40, 0)) {
        let (history, theta) = build_history(&steps);
        let dist = unit_uniform();
        let metric = JointMetric::new(0.0, 1.0).expect("valid metric");
        let centers: Vec<Sample> = history.records().iter().map(|r| r.x.clone()).collect();
        let measures = xspace_voronoi_measures_1d(&centers, &dist).expect("cell measures");
        let exact = exact_weights_1d(&history, &metric, &theta, &dist).expect("exact weights");
        let hybrid = exact_hybrid_weights(&history, &metric, &theta, &dist).expect("hybrid weights");
        for (k, &measure) in measures.iter().enumerate() {
            prop_assert_eq!(exact.as_slice()[k].to_bits(), measure.to_bits(),
                "exact weight differs from x-Voronoi measure at record {}", k);
            prop_assert_eq!(hybrid.as_slice()[k].to_bits(), measure.to_bits(),
                "hybrid weight differs from x-Voronoi measure at record {}", k);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Counting fresh draws by joint-nearest record converges on the exact
    /// cell probabilities (the law the empirical strategy relies on).
    #[test]
    fn fresh_sample_counts_estimate_exact_cells(
        steps in steps_strategy(10, 0),
        seed in any::<u64>(),
    ) {
        let (history, theta) = build_history(&steps);
        let dist = unit_uniform();
        let metric = JointMetric::default();
        let exact = exact_weights_1d(&history, &metric, &theta, &dist).expect("exact weights");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 20_000;
        let mut counts = vec![0u64; history.len()];
        for _ in 0..draws {
            let x = dist.sample(&mut rng);
            let k = joint_nearest(&history, &metric, &theta, x.as_slice())
                .expect("fresh sample assignment");
            counts[k] += 1;
        }
        for (k, (&c, &a)) in counts.iter().zip(exact.iter()).enumerate() {
            let gap = (c as f64 / draws as f64 - a).abs();
            prop_assert!(gap < 0.05,
                "record {}: frequency {} vs exact mass {}", k, c as f64 / draws as f64, a);
        }
    }
}

proptest! {
    /// `⌊n^β⌋` pool growth: exact at β = 1, superlinear beyond, monotone in
    /// both arguments.
    #[test]
    fn pool_growth_follows_the_power_law(n in 1usize..200, beta in 1.0..2.5f64) {
        let target = pool_target(n, beta);
        prop_assert!(target >= n, "pool must include every evaluated sample");
        prop_assert!((target as f64) <= (n as f64).powf(beta) + 1.0,
            "pool target {} overshoots n^beta = {}", target, (n as f64).powf(beta));
        prop_assert_eq!(pool_target(n, 1.0), n);
        prop_assert!(pool_target(n + 1, beta) >= target, "growth must be monotone in n");
    }
}

#[test]
fn pool_target_squares_round_numbers_exactly() {
    for n in [1usize, 10, 31, 100, 1000] {
        assert_eq!(
            pool_target(n, 2.0),
            n * n,
            "n^2 must not lose a sample to floating-point rounding at n = {n}"
        );
    }
}

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neurometa_core::dataset::{self, ScaledSet};
use neurometa_core::harness;
use neurometa_core::lm::{self, LmConfig, StepOutcome};
use neurometa_core::metaheuristics::RunStatus;
use neurometa_core::mlp::{self, HIDDEN, WEIGHT_COUNT};

fn random_set(rows: usize, rng: &mut ChaCha8Rng) -> ScaledSet {
    ScaledSet {
        inputs: (0..rows).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect(),
        targets: (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// With the hidden layer frozen, the residuals are affine in the six
/// output-layer parameters, so one undamped Gauss-Newton step on those
/// columns must land on the least-squares optimum.
#[test]
fn gauss_newton_step_solves_the_linear_subproblem() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let set = random_set(40, &mut rng);
    let w: Vec<f64> = (0..WEIGHT_COUNT).map(|_| rng.random_range(-1.5..1.5)).collect();
    let out_cols = 8 * HIDDEN + HIDDEN..WEIGHT_COUNT;

    let j_full = lm::jacobian(&w, &set).unwrap();
    let j = j_full.columns(out_cols.start, out_cols.len()).into_owned();
    let e = DVector::from_vec(lm::residuals(&w, &set).unwrap());
    let delta = lm::damped_step(&j, &e, 0.0).expect("full column rank");
    let mut stepped = w.clone();
    for (k, d) in out_cols.clone().zip(delta.iter()) {
        stepped[k] += d;
    }

    // independent optimum: SVD least squares on [z_1..z_5, 1] -> target
    let n = set.len();
    let mut a = DMatrix::zeros(n, out_cols.len());
    for (i, x) in set.inputs.iter().enumerate() {
        for jn in 0..HIDDEN {
            let mut pre = w[8 * HIDDEN + jn];
            for k in 0..8 {
                pre += w[jn * 8 + k] * x[k];
            }
            a[(i, jn)] = pre.tanh();
        }
        a[(i, HIDDEN)] = 1.0;
    }
    let b = DVector::from_vec(set.targets.clone());
    let optimum = a.svd(true, true).solve(&b, 1e-14).unwrap();
    for (k, want) in out_cols.zip(optimum.iter()) {
        assert!((stepped[k] - want).abs() < 1e-8, "param {k}: {} vs {want}", stepped[k]);
    }
}

#[test]
fn large_damping_follows_the_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let set = random_set(25, &mut rng);
    let w = lm::random_init(HIDDEN, 4);
    let j = lm::jacobian(&w, &set).unwrap();
    let e = DVector::from_vec(lm::residuals(&w, &set).unwrap());
    let g = j.tr_mul(&e);
    for mu in [1e6, 1e8, 1e10] {
        let d = lm::damped_step(&j, &e, mu).unwrap();
        let cosine = -d.dot(&g) / (d.norm() * g.norm());
        assert!(cosine > 0.9998, "mu {mu}: cosine {cosine}");
        assert!((d.norm() * mu / g.norm() - 1.0).abs() < 1e-2, "mu {mu}");
    }
}

#[test]
fn finite_difference_jacobian_on_larger_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let set = random_set(12, &mut rng);
    let w: Vec<f64> = (0..WEIGHT_COUNT).map(|_| rng.random_range(-3.0..3.0)).collect();
    let j = lm::jacobian(&w, &set).unwrap();
    let h = 1e-6;
    for k in 0..WEIGHT_COUNT {
        let mut up = w.clone();
        let mut down = w.clone();
        up[k] += h;
        down[k] -= h;
        let eu = lm::residuals(&up, &set).unwrap();
        let ed = lm::residuals(&down, &set).unwrap();
        for i in 0..set.len() {
            let fd = (eu[i] - ed[i]) / (2.0 * h);
            assert!((fd - j[(i, k)]).abs() <= 1e-6, "({i},{k})");
        }
    }
}

#[test]
fn tiny_damping_ceiling_diverges_with_partial_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let set = random_set(20, &mut rng);
    let config = LmConfig {
        initial_mu: 1e-3,
        mu_max: 1e-3,
        ..LmConfig::default()
    };
    // 20 rows cannot pin 51 weights, so steps keep succeeding until one
    // needs more damping than the ceiling allows
    let r = lm::lm_train(lm::random_init(HIDDEN, 1), &config, &set).unwrap();
    assert_eq!(r.status, RunStatus::Diverged);
    assert!(r.curve.len() < config.max_epochs);
    assert_eq!(r.curve.last(), Some(r.best_objective));
    assert!(r.curve.is_monotone());
    assert_eq!(r.best_vector.len(), WEIGHT_COUNT);
}

#[test]
fn stationary_and_accepted_outcomes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let set = random_set(15, &mut rng);
    let config = LmConfig::default();
    let state = lm::initial_state(lm::random_init(HIDDEN, 2), &config, &set).unwrap();
    let (next, outcome, grad, _) = lm::lm_step(&state, &config, &set).unwrap();
    assert_eq!(outcome, StepOutcome::Accepted);
    assert!(next.sse < state.sse);
    assert!(grad > 0.0);
    assert!(next.mu < state.mu);
    assert_eq!(next.epoch, 1);
}

#[test]
fn canonical_training_curve_is_monotone() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ENB2012_data.csv");
    let data = dataset::load_csv(path).unwrap();
    let prep = harness::prepare(&data, 0.7, dataset::DEFAULT_SPLIT_SEED).unwrap();
    let config = LmConfig {
        max_epochs: 60,
        ..LmConfig::default()
    };
    let r = lm::lm_train(lm::random_init(HIDDEN, 3), &config, &prep.train_set).unwrap();
    assert!(r.curve.is_monotone());
    let mse = mlp::mse_objective(&r.best_vector, HIDDEN, &prep.train_set).unwrap();
    assert!((mse - r.best_objective).abs() < 1e-12);
}

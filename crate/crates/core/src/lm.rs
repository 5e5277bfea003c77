//! Levenberg–Marquardt training of the network weights.
//!
//! Residuals are `e = prediction - target` over the scaled training rows and
//! `V = sum(e^2)`. Each epoch solves `(J'J + mu I) d = -J'e` and accepts the
//! step only when `V` drops, shrinking `mu` on success and growing it on
//! failure.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ScaledSet;
use crate::metaheuristics::{ConvergenceCurve, Rng64, RunStatus, TrainResult};
use crate::mlp::{forward_flat, forward_with_gradient, weight_count, MlpError};

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("invalid LM configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub initial_mu: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub max_epochs: usize,
    /// Stop once `|grad V|` falls below this.
    pub gradient_tolerance: f64,
    /// Damping above this ends the run as diverged.
    pub mu_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            initial_mu: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            max_epochs: 1000,
            gradient_tolerance: 1e-7,
            mu_max: 1e10,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        let ok = self.initial_mu > 0.0
            && self.mu_decrease > 0.0
            && self.mu_decrease < 1.0
            && self.mu_increase > 1.0
            && self.max_epochs > 0
            && self.gradient_tolerance > 0.0
            && self.mu_max >= self.initial_mu
            && [self.initial_mu, self.mu_increase, self.mu_max, self.gradient_tolerance]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(LmError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmState {
    pub weights: Vec<f64>,
    /// Sum of squared residuals at `weights`.
    pub sse: f64,
    pub mu: f64,
    pub epoch: usize,
}

/// Result of one damped step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// Residuals were already zero; nothing to do.
    Stationary,
    /// Damping passed `mu_max` without finding a descent step.
    Diverged,
}

fn hidden_for(len: usize) -> Result<usize, MlpError> {
    // 8h + h + h + 1 = 10h + 1
    let h = len.saturating_sub(1) / 10;
    if h == 0 || weight_count(h) != len {
        return Err(MlpError::WrongLength {
            expected: weight_count(h.max(1)),
            found: len,
        });
    }
    Ok(h)
}

fn check(v: &[f64], set: &ScaledSet) -> Result<usize, MlpError> {
    if set.is_empty() {
        return Err(MlpError::EmptySet);
    }
    hidden_for(v.len())
}

/// `e_i = prediction_i - target_i` in row order.
pub fn residuals(v: &[f64], set: &ScaledSet) -> Result<Vec<f64>, LmError> {
    let hidden = check(v, set)?;
    Ok(residuals_unchecked(v, hidden, set))
}

fn residuals_unchecked(v: &[f64], hidden: usize, set: &ScaledSet) -> Vec<f64> {
    set.inputs
        .iter()
        .zip(&set.targets)
        .map(|(x, t)| forward_flat(v, hidden, x) - t)
        .collect()
}

/// `J[i][k] = d e_i / d v_k`, one row per training row.
pub fn jacobian(v: &[f64], set: &ScaledSet) -> Result<DMatrix<f64>, LmError> {
    let hidden = check(v, set)?;
    Ok(jacobian_and_residuals(v, hidden, set).0)
}

fn jacobian_and_residuals(v: &[f64], hidden: usize, set: &ScaledSet) -> (DMatrix<f64>, DVector<f64>) {
    let cols = v.len();
    let mut rows = vec![0.0; set.len() * cols];
    let mut e = vec![0.0; set.len()];
    rows.par_chunks_mut(cols)
        .zip(e.par_iter_mut())
        .zip(set.inputs.par_iter().zip(&set.targets))
        .for_each(|((row, ei), (x, t))| {
            *ei = forward_with_gradient(v, hidden, x, row) - t;
        });
    (DMatrix::from_row_slice(set.len(), cols, &rows), DVector::from_vec(e))
}

/// Solves `(J'J + mu I) d = -J'e`. `None` when the system is not positive
/// definite (possible only at `mu = 0`).
pub fn damped_step(j: &DMatrix<f64>, e: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let mut a = j.tr_mul(j);
    for k in 0..a.nrows() {
        a[(k, k)] += mu;
    }
    let g = j.tr_mul(e);
    a.cholesky().map(|c| -c.solve(&g))
}

pub fn initial_state(weights: Vec<f64>, config: &LmConfig, set: &ScaledSet) -> Result<LmState, LmError> {
    let e = residuals(&weights, set)?;
    Ok(LmState {
        weights,
        sse: e.iter().map(|r| r * r).sum(),
        mu: config.initial_mu,
        epoch: 0,
    })
}

/// One epoch: retries with growing damping until `V` decreases or `mu`
/// exceeds `mu_max`. Also returns `|grad V|` at the starting point and the
/// number of residual evaluations spent.
pub fn lm_step(
    state: &LmState,
    config: &LmConfig,
    set: &ScaledSet,
) -> Result<(LmState, StepOutcome, f64, u64), LmError> {
    let hidden = check(&state.weights, set)?;
    let (j, e) = jacobian_and_residuals(&state.weights, hidden, set);
    let grad_norm = 2.0 * j.tr_mul(&e).norm();
    let mut next = state.clone();
    next.epoch += 1;
    if e.iter().all(|&r| r == 0.0) {
        next.mu = (state.mu * config.mu_decrease).max(f64::MIN_POSITIVE);
        return Ok((next, StepOutcome::Stationary, grad_norm, 0));
    }
    let mut mu = state.mu;
    let mut evaluations = 0;
    loop {
        if let Some(delta) = damped_step(&j, &e, mu) {
            let trial: Vec<f64> = state.weights.iter().zip(delta.iter()).map(|(w, d)| w + d).collect();
            evaluations += 1;
            let sse: f64 = residuals_unchecked(&trial, hidden, set).iter().map(|r| r * r).sum();
            if sse < state.sse {
                next.weights = trial;
                next.sse = sse;
                next.mu = (mu * config.mu_decrease).max(f64::MIN_POSITIVE);
                return Ok((next, StepOutcome::Accepted, grad_norm, evaluations));
            }
        }
        mu *= config.mu_increase;
        if mu > config.mu_max {
            next.mu = config.mu_max;
            return Ok((next, StepOutcome::Diverged, grad_norm, evaluations));
        }
    }
}

/// Uniform draw in `[-1, 1]` for every weight.
pub fn random_init(hidden: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng64::seed_from_u64(seed);
    (0..weight_count(hidden)).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Runs epochs until the gradient test passes, the epoch cap is hit, or the
/// damping diverges. The curve holds training MSE after each epoch.
pub fn lm_train(init: Vec<f64>, config: &LmConfig, set: &ScaledSet) -> Result<TrainResult, LmError> {
    config.validate()?;
    let started = Instant::now();
    let n = set.len() as f64;
    let mut state = initial_state(init, config, set)?;
    let mut evaluations = 1u64;
    let mut curve = Vec::new();
    let mut status = RunStatus::EpochCap;
    while state.epoch < config.max_epochs {
        let (next, outcome, grad_norm, evals) = lm_step(&state, config, set)?;
        evaluations += evals;
        if grad_norm < config.gradient_tolerance || outcome == StepOutcome::Stationary {
            state.epoch = next.epoch;
            curve.push(state.sse / n);
            status = RunStatus::Converged;
            break;
        }
        let diverged = outcome == StepOutcome::Diverged;
        state = next;
        curve.push(state.sse / n);
        if diverged {
            status = RunStatus::Diverged;
            break;
        }
    }
    Ok(TrainResult {
        best_objective: state.sse / n,
        best_vector: state.weights,
        curve: ConvergenceCurve(curve),
        evaluations,
        wall_time: started.elapsed().as_secs_f64(),
        status,
    })
}

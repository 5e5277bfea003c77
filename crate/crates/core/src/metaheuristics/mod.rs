//! Population-based minimizers over a bounded box.
//!
//! Every algorithm shares one contract: a seeded ChaCha stream drives all
//! randomness on the calling thread, candidates are clamped into bounds
//! before evaluation, objective calls inside a generation may fan out over
//! rayon but are merged in population order, and the reported curve is the
//! best-so-far value after each generation.

mod alo;
mod bbo;
mod da;
mod es;
mod iwo;
mod lca;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ScaledSet;
use crate::mlp;

pub use alo::{random_walk_summary, run_alo, shrink_ratio, AloParams, WalkSummary};
pub use bbo::{migration_rates, run_bbo, BboParams};
pub use da::{levy_flight, run_da, swarm_terms, DaParams, SwarmTerms};
pub use es::{run_es, EsParams};
pub use iwo::{iwo_sigma, run_iwo, seed_count, IwoParams};
pub use lca::{round_robin, run_lca, win_probability, LcaParams};

pub type Rng64 = ChaCha8Rng;

#[derive(Debug, Error, PartialEq)]
pub enum MetaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective returned {value} at {vector:?}")]
    NonFiniteObjective { vector: Vec<f64>, value: f64 },
    #[error(transparent)]
    Mlp(#[from] mlp::MlpError),
}

/// Black-box function to minimize.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Per-dimension search box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Bounds {
    pub fn uniform(dim: usize, low: f64, high: f64) -> Self {
        Bounds {
            low: vec![low; dim],
            high: vec![high; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.high[d] - self.low[d]
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.low).zip(&self.high) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn sample(&self, rng: &mut Rng64) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
            .collect()
    }

    fn validate(&self) -> Result<(), MetaError> {
        if self.dim() == 0 || self.low.len() != self.high.len() {
            return Err(MetaError::InvalidConfig(
                "bounds must be non-empty with matching low/high lengths".into(),
            ));
        }
        for (d, (lo, hi)) in self.low.iter().zip(&self.high).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(MetaError::InvalidConfig(format!(
                    "dimension {d}: need finite low < high, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Alo,
    Bbo,
    Da,
    Es,
    Iwo,
    Lca,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Alo,
        Algorithm::Bbo,
        Algorithm::Da,
        Algorithm::Es,
        Algorithm::Iwo,
        Algorithm::Lca,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Alo => "alo",
            Algorithm::Bbo => "bbo",
            Algorithm::Da => "da",
            Algorithm::Es => "es",
            Algorithm::Iwo => "iwo",
            Algorithm::Lca => "lca",
        }
    }

    /// Display label used in tables, e.g. `BBO-MLP`.
    pub fn model_label(&self) -> String {
        format!("{}-MLP", self.name().to_uppercase())
    }

    /// Population size the published sensitivity analysis settled on.
    pub fn published_best_population(&self) -> usize {
        match self {
            Algorithm::Alo => 350,
            Algorithm::Bbo => 400,
            Algorithm::Da => 200,
            Algorithm::Es => 500,
            Algorithm::Iwo => 50,
            Algorithm::Lca => 300,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let key = lower.strip_suffix("-mlp").unwrap_or(&lower);
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected one of alo, bbo, da, es, iwo, lca)"))
    }
}

/// Algorithm-specific settings; every field has a documented default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub alo: AloParams,
    pub bbo: BboParams,
    pub da: DaParams,
    pub es: EsParams,
    pub iwo: IwoParams,
    pub lca: LcaParams,
}

impl Knobs {
    /// Parses a TOML knob file; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, MetaError> {
        toml::from_str(text).map_err(|e| MetaError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("knobs serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub bounds: Bounds,
    pub seed: u64,
    #[serde(default)]
    pub knobs: Knobs,
}

/// Default search box for network weights.
pub const DEFAULT_WEIGHT_BOUND: f64 = 10.0;

impl TrainConfig {
    pub fn new(dim: usize, population_size: usize, iterations: usize, seed: u64) -> Self {
        TrainConfig {
            population_size,
            iterations,
            bounds: Bounds::uniform(dim, -DEFAULT_WEIGHT_BOUND, DEFAULT_WEIGHT_BOUND),
            seed,
            knobs: Knobs::default(),
        }
    }

    pub fn validate(&self) -> Result<(), MetaError> {
        if self.population_size < 2 {
            return Err(MetaError::InvalidConfig(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.iterations < 1 {
            return Err(MetaError::InvalidConfig("iterations must be at least 1".into()));
        }
        self.bounds.validate()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub(crate) fn rng(&self) -> Rng64 {
        Rng64::seed_from_u64(self.seed)
    }
}

/// Best-so-far objective after each generation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvergenceCurve(pub Vec<f64>);

impl ConvergenceCurve {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }

    pub fn is_monotone(&self) -> bool {
        self.0.windows(2).all(|w| w[1] <= w[0])
    }

    /// Two columns, `iteration,best_mse`, iterations counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_mse\n");
        for (i, v) in self.0.iter().enumerate() {
            out.push_str(&format!("{},{v:e}\n", i + 1));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// All planned iterations ran.
    Completed,
    /// Gradient fell below tolerance.
    Converged,
    /// Epoch limit reached.
    EpochCap,
    /// Damping exceeded its ceiling.
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub best_vector: Vec<f64>,
    pub best_objective: f64,
    pub curve: ConvergenceCurve,
    pub evaluations: u64,
    /// Seconds.
    pub wall_time: f64,
    pub status: RunStatus,
}

impl TrainResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &TrainResult) -> bool {
        self.best_vector == other.best_vector
            && self.best_objective.to_bits() == other.best_objective.to_bits()
            && self.curve == other.curve
            && self.evaluations == other.evaluations
            && self.status == other.status
    }
}

/// Counts calls and tracks the incumbent.
pub(crate) struct Evaluator<'a, O: Objective + ?Sized> {
    objective: &'a O,
    pub evaluations: u64,
    pub best: Vec<f64>,
    pub best_value: f64,
    curve: Vec<f64>,
    started: Instant,
}

impl<'a, O: Objective + ?Sized> Evaluator<'a, O> {
    pub fn new(objective: &'a O, iterations: usize) -> Self {
        Evaluator {
            objective,
            evaluations: 0,
            best: Vec::new(),
            best_value: f64::INFINITY,
            curve: Vec::with_capacity(iterations),
            started: Instant::now(),
        }
    }

    /// Evaluates candidates in order; the first strict improvement wins ties.
    pub fn evaluate(&mut self, xs: &[Vec<f64>]) -> Result<Vec<f64>, MetaError> {
        let values: Vec<f64> = if xs.len() > 1 {
            xs.par_iter().map(|x| self.objective.evaluate(x)).collect()
        } else {
            xs.iter().map(|x| self.objective.evaluate(x)).collect()
        };
        self.evaluations += xs.len() as u64;
        for (x, &v) in xs.iter().zip(&values) {
            if !v.is_finite() {
                return Err(MetaError::NonFiniteObjective {
                    vector: x.clone(),
                    value: v,
                });
            }
            if v < self.best_value {
                self.best_value = v;
                self.best.clone_from(x);
            }
        }
        Ok(values)
    }

    pub fn end_generation(&mut self) {
        self.curve.push(self.best_value);
    }

    pub fn finish(self) -> TrainResult {
        TrainResult {
            best_vector: self.best,
            best_objective: self.best_value,
            curve: ConvergenceCurve(self.curve),
            evaluations: self.evaluations,
            wall_time: self.started.elapsed().as_secs_f64(),
            status: RunStatus::Completed,
        }
    }
}

/// Indices of `values` sorted ascending; equal values keep index order.
pub(crate) fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Picks an index with probability proportional to its (non-negative) weight.
pub fn roulette(weights: &[f64], rng: &mut Rng64) -> usize {
    let total: f64 = weights.iter().sum();
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Runs one of the six optimizers.
pub fn run<O: Objective + ?Sized>(
    algorithm: Algorithm,
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    match algorithm {
        Algorithm::Alo => run_alo(config, objective),
        Algorithm::Bbo => run_bbo(config, objective),
        Algorithm::Da => run_da(config, objective),
        Algorithm::Es => run_es(config, objective),
        Algorithm::Iwo => run_iwo(config, objective),
        Algorithm::Lca => run_lca(config, objective),
    }
}

/// Network MSE over a scaled training set, as a black-box objective.
pub struct MseObjective<'a> {
    pub set: &'a ScaledSet,
    pub hidden: usize,
}

impl Objective for MseObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        mlp::mse_unchecked(x, self.hidden, self.set)
    }
}

/// Trains network weights by minimizing training MSE with `algorithm`.
pub fn train_mlp(
    algorithm: Algorithm,
    config: &TrainConfig,
    set: &ScaledSet,
    hidden: usize,
) -> Result<TrainResult, MetaError> {
    if hidden == 0 {
        return Err(mlp::MlpError::NoHidden.into());
    }
    let expected = mlp::weight_count(hidden);
    if config.dim() != expected {
        return Err(MetaError::InvalidConfig(format!(
            "search dimension {} does not match {expected} network weights",
            config.dim()
        )));
    }
    if set.is_empty() {
        return Err(mlp::MlpError::EmptySet.into());
    }
    run(algorithm, config, &MseObjective { set, hidden })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roulette_single_weight_always_selected() {
        let mut rng = Rng64::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(roulette(&[3.0], &mut rng), 0);
        }
    }

    #[test]
    fn roulette_skips_zero_weights() {
        let mut rng = Rng64::seed_from_u64(2);
        for _ in 0..1000 {
            assert_ne!(roulette(&[0.0, 1.0, 0.0, 2.0], &mut rng) % 2, 0);
        }
    }

    #[test]
    fn roulette_frequencies_follow_weights() {
        let mut rng = Rng64::seed_from_u64(3);
        let mut hits = [0usize; 3];
        for _ in 0..30_000 {
            hits[roulette(&[1.0, 2.0, 3.0], &mut rng)] += 1;
        }
        let expect = [5_000.0, 10_000.0, 15_000.0];
        for (h, e) in hits.iter().zip(expect) {
            assert!((*h as f64 - e).abs() < 500.0, "{hits:?}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(2, 10, 5, 0);
        assert!(c.validate().is_ok());
        c.population_size = 1;
        assert!(c.validate().is_err());
        c.population_size = 3;
        c.iterations = 0;
        assert!(c.validate().is_err());
        c.iterations = 1;
        c.bounds.low[1] = 20.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.model_label().parse::<Algorithm>().unwrap(), a);
        }
        assert!("pso".parse::<Algorithm>().is_err());
    }

    #[test]
    fn knobs_toml_overrides_one_key() {
        let k = Knobs::from_toml("[bbo]\nmutation_probability = 0.2\n").unwrap();
        assert_eq!(k.bbo.mutation_probability, 0.2);
        assert_eq!(k.alo, AloParams::default());
        assert_eq!(Knobs::from_toml(&Knobs::default().to_toml()).unwrap(), Knobs::default());
        assert!(Knobs::from_toml("[bbo]\nnot_a_knob = 1\n").is_err());
    }

    #[test]
    fn train_mlp_checks_dimension() {
        let set = ScaledSet {
            inputs: vec![[0.0; 8]],
            targets: vec![0.0],
        };
        let c = TrainConfig::new(3, 4, 1, 0);
        assert!(matches!(
            train_mlp(Algorithm::Bbo, &c, &set, 5),
            Err(MetaError::InvalidConfig(_))
        ));
    }

    #[test]
    fn curve_csv_has_one_row_per_iteration() {
        let c = ConvergenceCurve(vec![3.0, 2.0, 2.0]);
        assert!(c.is_monotone());
        let text = c.to_csv();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("iteration,best_mse\n1,"));
    }
}

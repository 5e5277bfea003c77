//! Biogeography-based optimization with the linear migration model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    argsort, roulette, Bounds, Evaluator, MetaError, Objective, Rng64, TrainConfig, TrainResult,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BboParams {
    pub max_immigration: f64,
    pub max_emigration: f64,
    /// Per-dimension chance of a Gaussian kick.
    pub mutation_probability: f64,
    /// Kick standard deviation as a fraction of the dimension's range.
    pub mutation_sigma: f64,
    /// Habitats carried unchanged into the next generation.
    pub elites: usize,
}

impl Default for BboParams {
    fn default() -> Self {
        BboParams {
            max_immigration: 1.0,
            max_emigration: 1.0,
            mutation_probability: 0.05,
            mutation_sigma: 0.05,
            elites: 2,
        }
    }
}

/// Emigration (`mu`) and immigration (`lambda`) rates for `n` habitats sorted
/// best first. The best habitat emigrates at the maximum rate and never
/// immigrates.
pub fn migration_rates(n: usize, params: &BboParams) -> (Vec<f64>, Vec<f64>) {
    let mu = (0..n)
        .map(|i| params.max_emigration * (n - i) as f64 / n as f64)
        .collect();
    let lambda = (0..n)
        .map(|i| params.max_immigration * i as f64 / n as f64)
        .collect();
    (mu, lambda)
}

/// Builds the next generation from a best-first population. Returns the new
/// habitats and which of them differ from their parent.
pub(crate) fn migrate_and_mutate(
    habitats: &[Vec<f64>],
    params: &BboParams,
    bounds: &Bounds,
    rng: &mut Rng64,
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = habitats.len();
    let (mu, lambda) = migration_rates(n, params);
    let mut next = habitats.to_vec();
    let mut changed = vec![false; n];
    for i in 0..n {
        let h = &mut next[i];
        for d in 0..h.len() {
            if rng.random::<f64>() < lambda[i] {
                let source = roulette(&mu, rng);
                if habitats[source][d] != h[d] {
                    h[d] = habitats[source][d];
                    changed[i] = true;
                }
            }
        }
        for d in 0..h.len() {
            if rng.random::<f64>() < params.mutation_probability {
                let z: f64 = rng.sample(StandardNormal);
                h[d] += params.mutation_sigma * bounds.width(d) * z;
                changed[i] = true;
            }
        }
        bounds.clamp(h);
    }
    (next, changed)
}

pub fn run_bbo<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let params = &config.knobs.bbo;
    if !(0.0..=1.0).contains(&params.mutation_probability) {
        return Err(MetaError::InvalidConfig(
            "bbo.mutation_probability must lie in [0, 1]".into(),
        ));
    }
    let n = config.population_size;
    let elites = params.elites.min(n);
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, config.iterations);

    let init: Vec<Vec<f64>> = (0..n).map(|_| config.bounds.sample(&mut rng)).collect();
    let costs = eval.evaluate(&init)?;
    let order = argsort(&costs);
    let mut habitats: Vec<Vec<f64>> = order.iter().map(|&i| init[i].clone()).collect();
    let mut hsi: Vec<f64> = order.iter().map(|&i| costs[i]).collect();

    for _ in 0..config.iterations {
        let (mut next, changed) = migrate_and_mutate(&habitats, params, &config.bounds, &mut rng);
        let mut next_cost = hsi.clone();
        let touched: Vec<usize> = (0..n).filter(|&i| changed[i]).collect();
        let batch: Vec<Vec<f64>> = touched.iter().map(|&i| next[i].clone()).collect();
        for (&i, c) in touched.iter().zip(eval.evaluate(&batch)?) {
            next_cost[i] = c;
        }

        // elites from the previous generation replace the worst newcomers
        let order = argsort(&next_cost);
        let mut ranked: Vec<(Vec<f64>, f64)> = order
            .iter()
            .take(n - elites)
            .map(|&i| (std::mem::take(&mut next[i]), next_cost[i]))
            .collect();
        ranked.extend((0..elites).map(|e| (habitats[e].clone(), hsi[e])));
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        habitats = ranked.iter().map(|(h, _)| h.clone()).collect();
        hsi = ranked.into_iter().map(|(_, c)| c).collect();
        eval.end_generation();
    }
    Ok(eval.finish())
}

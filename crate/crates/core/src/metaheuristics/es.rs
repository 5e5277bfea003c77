//! (mu + lambda) evolution strategy with one self-adapted step size per
//! individual.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argsort, Evaluator, MetaError, Objective, TrainConfig, TrainResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsParams {
    /// Starting step size as a fraction of each dimension's range.
    pub initial_sigma: f64,
    /// Log-normal learning rate; `None` means `1/sqrt(2 * dim)`.
    pub learning_rate: Option<f64>,
}

impl Default for EsParams {
    fn default() -> Self {
        EsParams {
            initial_sigma: 0.1,
            learning_rate: None,
        }
    }
}

struct Individual {
    x: Vec<f64>,
    sigma: f64,
    cost: f64,
}

pub fn run_es<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let p = &config.knobs.es;
    if !(p.initial_sigma >= 0.0 && p.initial_sigma.is_finite()) {
        return Err(MetaError::InvalidConfig("es.initial_sigma must be finite and >= 0".into()));
    }
    let dim = config.dim();
    let lambda = config.population_size;
    let mu = (lambda / 2).max(1);
    let tau = p.learning_rate.unwrap_or(1.0 / (2.0 * dim as f64).sqrt());
    let bounds = &config.bounds;
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, config.iterations);

    let init: Vec<Vec<f64>> = (0..lambda).map(|_| bounds.sample(&mut rng)).collect();
    let costs = eval.evaluate(&init)?;
    let mut parents: Vec<Individual> = argsort(&costs)
        .into_iter()
        .take(mu)
        .map(|i| Individual {
            x: init[i].clone(),
            sigma: p.initial_sigma,
            cost: costs[i],
        })
        .collect();

    for _ in 0..config.iterations {
        let mut xs = Vec::with_capacity(lambda);
        let mut sigmas = Vec::with_capacity(lambda);
        for k in 0..lambda {
            let parent = &parents[k % mu];
            let z: f64 = rng.sample(StandardNormal);
            let sigma = parent.sigma * (tau * z).exp();
            let mut x = parent.x.clone();
            for (d, v) in x.iter_mut().enumerate() {
                let n: f64 = rng.sample(StandardNormal);
                *v += sigma * bounds.width(d) * n;
            }
            bounds.clamp(&mut x);
            xs.push(x);
            sigmas.push(sigma);
        }
        let costs = eval.evaluate(&xs)?;

        // plus selection; the stable sort keeps parents ahead of equal offspring
        let mut pool = parents;
        pool.extend(
            xs.into_iter()
                .zip(sigmas)
                .zip(costs)
                .map(|((x, sigma), cost)| Individual { x, sigma, cost }),
        );
        pool.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        pool.truncate(mu);
        parents = pool;
        eval.end_generation();
    }
    Ok(eval.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_step_size_freezes_the_best() {
        let mut config = TrainConfig::new(3, 6, 20, 11);
        config.knobs.es.initial_sigma = 0.0;
        let obj = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
        let r = run_es(&config, &obj).unwrap();
        assert!(r.curve.0.iter().all(|&v| v == r.curve.0[0]));
        assert_eq!(r.evaluations, 6 + 6 * 20);
    }

    #[test]
    fn offspring_count_is_population_size() {
        let config = TrainConfig::new(2, 10, 7, 1);
        let r = run_es(&config, &|x: &[f64]| x[0].abs() + x[1].abs()).unwrap();
        assert_eq!(r.evaluations, 10 * 8);
        assert!(r.curve.is_monotone());
    }
}

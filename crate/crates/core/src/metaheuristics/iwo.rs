//! Invasive weed optimization.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{argsort, Evaluator, MetaError, Objective, TrainConfig, TrainResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IwoParams {
    pub min_seeds: usize,
    pub max_seeds: usize,
    /// Modulation exponent of the dispersal schedule.
    pub exponent: f64,
    /// Dispersal std-dev at the start, as a fraction of each dimension's range.
    pub sigma_initial: f64,
    /// Dispersal std-dev at the end, same units.
    pub sigma_final: f64,
}

impl Default for IwoParams {
    fn default() -> Self {
        IwoParams {
            min_seeds: 0,
            max_seeds: 5,
            exponent: 3.0,
            sigma_initial: 0.1,
            sigma_final: 0.001,
        }
    }
}

/// Dispersal std-dev (fraction of range) at iteration `t` of `total`.
pub fn iwo_sigma(t: usize, total: usize, params: &IwoParams) -> f64 {
    let remaining = (total.saturating_sub(t)) as f64 / total as f64;
    remaining.powf(params.exponent) * (params.sigma_initial - params.sigma_final) + params.sigma_final
}

/// Seeds produced by a weed of cost `cost` in a colony whose costs span
/// `[best, worst]`. A colony of equal weeds gives everyone the maximum.
pub fn seed_count(cost: f64, best: f64, worst: f64, params: &IwoParams) -> usize {
    let ratio = if worst > best {
        ((worst - cost) / (worst - best)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let span = params.max_seeds.saturating_sub(params.min_seeds) as f64;
    params.min_seeds + (span * ratio).floor() as usize
}

pub fn run_iwo<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let p = &config.knobs.iwo;
    if p.max_seeds < p.min_seeds {
        return Err(MetaError::InvalidConfig("iwo.max_seeds must be >= iwo.min_seeds".into()));
    }
    let cap = config.population_size;
    let total = config.iterations;
    let bounds = &config.bounds;
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, total);

    let init: Vec<Vec<f64>> = (0..cap).map(|_| bounds.sample(&mut rng)).collect();
    let costs = eval.evaluate(&init)?;
    let order = argsort(&costs);
    let mut weeds: Vec<Vec<f64>> = order.iter().map(|&i| init[i].clone()).collect();
    let mut weed_costs: Vec<f64> = order.iter().map(|&i| costs[i]).collect();

    for t in 1..=total {
        let sigma = iwo_sigma(t, total, p);
        let best = weed_costs[0];
        let worst = *weed_costs.last().expect("non-empty colony");
        let mut seeds = Vec::new();
        for (w, &c) in weeds.iter().zip(&weed_costs) {
            for _ in 0..seed_count(c, best, worst, p) {
                let mut s = w.clone();
                for (d, v) in s.iter_mut().enumerate() {
                    let n: f64 = rng.sample(StandardNormal);
                    *v += sigma * bounds.width(d) * n;
                }
                bounds.clamp(&mut s);
                seeds.push(s);
            }
        }
        let seed_costs = eval.evaluate(&seeds)?;

        // competitive exclusion
        weeds.extend(seeds);
        weed_costs.extend(seed_costs);
        let order = argsort(&weed_costs);
        let mut slots: Vec<Option<Vec<f64>>> = weeds.into_iter().map(Some).collect();
        weeds = Vec::with_capacity(cap);
        let mut kept = Vec::with_capacity(cap);
        for &i in order.iter().take(cap) {
            weeds.push(slots[i].take().expect("each index once"));
            kept.push(weed_costs[i]);
        }
        weed_costs = kept;
        eval.end_generation();
    }
    Ok(eval.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_count_endpoints() {
        let p = IwoParams::default();
        assert_eq!(seed_count(7.0, 1.0, 7.0, &p), p.min_seeds);
        assert_eq!(seed_count(1.0, 1.0, 7.0, &p), p.max_seeds);
        assert_eq!(seed_count(4.0, 1.0, 7.0, &p), 2);
        assert_eq!(seed_count(3.0, 3.0, 3.0, &p), p.max_seeds);
    }

    #[test]
    fn sigma_schedule_endpoints() {
        let p = IwoParams::default();
        assert_eq!(iwo_sigma(0, 100, &p), p.sigma_initial);
        assert_eq!(iwo_sigma(100, 100, &p), p.sigma_final);
        assert!((iwo_sigma(50, 100, &p) - (0.125 * 0.099 + 0.001)).abs() < 1e-15);
    }

    #[test]
    fn colony_never_exceeds_cap() {
        let config = TrainConfig::new(2, 4, 10, 2);
        let r = run_iwo(&config, &|x: &[f64]| x[0] * x[0] + x[1] * x[1]).unwrap();
        // at most 5 seeds for each of 4 weeds per generation
        assert!(r.evaluations <= 4 + 10 * 20);
        assert!(r.evaluations > 4);
    }
}

//! Dragonfly algorithm.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{Evaluator, MetaError, Objective, Rng64, TrainConfig, TrainResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaParams {
    pub inertia_start: f64,
    pub inertia_end: f64,
    /// Lévy stability exponent.
    pub levy_beta: f64,
    /// Scale applied to each Lévy draw.
    pub levy_scale: f64,
    /// Separation/alignment/cohesion weight at the first iteration; it decays
    /// linearly to zero at the half-way point.
    pub swarm_weight: f64,
    /// Step cap as a fraction of each dimension's range.
    pub max_step: f64,
}

impl Default for DaParams {
    fn default() -> Self {
        DaParams {
            inertia_start: 0.9,
            inertia_end: 0.4,
            levy_beta: 1.5,
            levy_scale: 0.01,
            swarm_weight: 0.1,
            max_step: 0.1,
        }
    }
}

/// Mantegna's Lévy-stable step, one component per dimension.
pub fn levy_flight(dim: usize, beta: f64, scale: f64, rng: &mut Rng64) -> Vec<f64> {
    let num = gamma(1.0 + beta) * (PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    let sigma = (num / den).powf(1.0 / beta);
    (0..dim)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            scale * u * sigma / v.abs().powf(1.0 / beta)
        })
        .collect()
}

/// Neighbourhood terms for one dragonfly.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmTerms {
    pub neighbours: usize,
    /// Separation: `sum(x_i - x_j)` over neighbours.
    pub separation: Vec<f64>,
    /// Alignment: mean neighbour step, or the own step without neighbours.
    pub alignment: Vec<f64>,
    /// Cohesion: neighbour centroid minus own position, zero without neighbours.
    pub cohesion: Vec<f64>,
}

fn within(a: &[f64], b: &[f64], radius: &[f64]) -> bool {
    a.iter().zip(b).zip(radius).all(|((x, y), r)| (x - y).abs() <= *r)
}

/// Neighbours of `i` are the other dragonflies within `radius` on every axis.
pub fn swarm_terms(i: usize, positions: &[Vec<f64>], steps: &[Vec<f64>], radius: &[f64]) -> SwarmTerms {
    let dim = positions[i].len();
    let me = &positions[i];
    let mut separation = vec![0.0; dim];
    let mut step_sum = vec![0.0; dim];
    let mut centroid = vec![0.0; dim];
    let mut neighbours = 0;
    for (j, other) in positions.iter().enumerate() {
        if j == i || !within(me, other, radius) {
            continue;
        }
        neighbours += 1;
        for d in 0..dim {
            separation[d] += me[d] - other[d];
            step_sum[d] += steps[j][d];
            centroid[d] += other[d];
        }
    }
    let (alignment, cohesion) = if neighbours == 0 {
        (steps[i].clone(), vec![0.0; dim])
    } else {
        let k = neighbours as f64;
        (
            step_sum.iter().map(|s| s / k).collect(),
            centroid.iter().zip(me).map(|(c, x)| c / k - x).collect(),
        )
    };
    SwarmTerms {
        neighbours,
        separation,
        alignment,
        cohesion,
    }
}

pub fn run_da<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let p = &config.knobs.da;
    let n = config.population_size;
    let dim = config.dim();
    let total = config.iterations;
    let bounds = &config.bounds;
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, total);

    let max_step: Vec<f64> = (0..dim).map(|d| p.max_step * bounds.width(d)).collect();
    let mut x: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample(&mut rng)).collect();
    let mut dx: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            max_step
                .iter()
                .map(|m| m * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        })
        .collect();
    let mut enemy_pos = vec![0.0; dim];
    let mut enemy_cost = f64::NEG_INFINITY;

    for t in 1..=total {
        let frac = t as f64 / total as f64;
        let radius: Vec<f64> = (0..dim)
            .map(|d| bounds.width(d) / 4.0 + bounds.width(d) * frac * 2.0)
            .collect();
        let w = p.inertia_start - frac * (p.inertia_start - p.inertia_end);
        let c_weight = (p.swarm_weight * (1.0 - 2.0 * frac)).max(0.0);
        let s = 2.0 * rng.random::<f64>() * c_weight;
        let a = 2.0 * rng.random::<f64>() * c_weight;
        let c = 2.0 * rng.random::<f64>() * c_weight;
        let f = 2.0 * rng.random::<f64>();
        let e = c_weight;

        let costs = eval.evaluate(&x)?;
        for (xi, &ci) in x.iter().zip(&costs) {
            if ci > enemy_cost {
                enemy_cost = ci;
                enemy_pos.clone_from(xi);
            }
        }
        let food = eval.best.clone();

        let mut next_x = x.clone();
        let mut next_dx = dx.clone();
        for i in 0..n {
            let terms = swarm_terms(i, &x, &dx, &radius);
            let near_food = within(&x[i], &food, &radius);
            let near_enemy = within(&x[i], &enemy_pos, &radius);
            let xi = &mut next_x[i];
            let di = &mut next_dx[i];
            if terms.neighbours == 0 {
                // isolated: Lévy flight, step memory cleared
                let levy = levy_flight(dim, p.levy_beta, p.levy_scale, &mut rng);
                for d in 0..dim {
                    xi[d] += levy[d] * xi[d];
                    di[d] = 0.0;
                }
            } else {
                for d in 0..dim {
                    let food_pull = if near_food { food[d] - x[i][d] } else { 0.0 };
                    let enemy_push = if near_enemy { x[i][d] - enemy_pos[d] } else { 0.0 };
                    let step = s * terms.separation[d]
                        + a * terms.alignment[d]
                        + c * terms.cohesion[d]
                        + f * food_pull
                        + e * enemy_push
                        + w * dx[i][d];
                    di[d] = step.clamp(-max_step[d], max_step[d]);
                    xi[d] += di[d];
                }
            }
            bounds.clamp(xi);
        }
        x = next_x;
        dx = next_dx;
        eval.end_generation();
    }
    Ok(eval.finish())
}

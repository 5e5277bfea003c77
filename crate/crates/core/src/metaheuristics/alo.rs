//! Ant lion optimizer.
//!
//! Ants random-walk around a roulette-selected ant lion and around the elite;
//! the walks are squeezed into a trap interval that shrinks as the run
//! progresses, and an ant's new position is the mean of the two walks.

use std::sync::OnceLock;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{argsort, roulette, Evaluator, MetaError, Objective, Rng64, TrainConfig, TrainResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AloParams {
    /// `(fraction of the run, exponent w)` pairs: past each fraction the trap
    /// ratio becomes `10^w * t / T`.
    pub stages: Vec<(f64, f64)>,
}

impl Default for AloParams {
    fn default() -> Self {
        AloParams {
            stages: vec![(0.10, 2.0), (0.50, 3.0), (0.75, 4.0), (0.90, 5.0), (0.95, 6.0)],
        }
    }
}

/// Trap shrink ratio at iteration `t` of `total`; 1 before the first stage.
pub fn shrink_ratio(t: usize, total: usize, stages: &[(f64, f64)]) -> f64 {
    let frac = t as f64 / total as f64;
    let w = stages
        .iter()
        .filter(|(at, _)| frac > *at)
        .map(|(_, w)| *w)
        .last();
    match w {
        Some(w) => (10f64.powf(w) * frac).max(1.0),
        None => 1.0,
    }
}

/// Value at one step plus the extremes of a ±1 walk starting at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkSummary {
    pub at: i32,
    pub min: i32,
    pub max: i32,
}

#[derive(Clone, Copy)]
struct ByteWalk {
    sum: i8,
    min: i8,
    max: i8,
}

fn byte_table() -> &'static [ByteWalk; 256] {
    static TABLE: OnceLock<[ByteWalk; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [ByteWalk { sum: 0, min: 0, max: 0 }; 256];
        for (b, entry) in t.iter_mut().enumerate() {
            let (mut s, mut lo, mut hi) = (0i8, i8::MAX, i8::MIN);
            for bit in 0..8 {
                s += if (b >> bit) & 1 == 1 { 1 } else { -1 };
                lo = lo.min(s);
                hi = hi.max(s);
            }
            *entry = ByteWalk { sum: s, min: lo, max: hi };
        }
        t
    })
}

/// Summarizes a walk of `steps` ±1 moves (bit set = +1, bits consumed
/// least-significant first from successive `next_u64` words) and reports the
/// position after `at` moves. Equivalent to materializing the cumulative sum.
pub fn random_walk_summary(rng: &mut Rng64, steps: usize, at: usize) -> WalkSummary {
    debug_assert!(at <= steps);
    let table = byte_table();
    let (mut pos, mut lo, mut hi) = (0i32, 0i32, 0i32);
    let mut at_value = if at == 0 { Some(0) } else { None };
    let mut done = 0usize;
    while done < steps {
        let word = rng.next_u64();
        let take = (steps - done).min(64);
        let mut bit = 0usize;
        while bit < take {
            let byte_fits = bit + 8 <= take;
            let at_inside = at_value.is_none() && at > done + bit && at <= done + bit + 8;
            if byte_fits && !at_inside {
                let e = table[((word >> bit) & 0xff) as usize];
                lo = lo.min(pos + e.min as i32);
                hi = hi.max(pos + e.max as i32);
                pos += e.sum as i32;
                bit += 8;
            } else {
                pos += if (word >> bit) & 1 == 1 { 1 } else { -1 };
                lo = lo.min(pos);
                hi = hi.max(pos);
                bit += 1;
                if done + bit == at {
                    at_value = Some(pos);
                }
            }
        }
        done += take;
    }
    WalkSummary {
        at: at_value.unwrap_or(pos),
        min: lo,
        max: hi,
    }
}

/// One random-walk position per dimension around `center`, min-max mapped into
/// the current trap interval.
fn walk_around(
    center: &[f64],
    config: &TrainConfig,
    t: usize,
    ratio: f64,
    rng: &mut Rng64,
    out: &mut [f64],
) {
    let b = &config.bounds;
    for d in 0..center.len() {
        let mut lb = b.low[d] / ratio;
        let mut ub = b.high[d] / ratio;
        lb = if rng.random::<f64>() < 0.5 { lb + center[d] } else { -lb + center[d] };
        ub = if rng.random::<f64>() >= 0.5 { ub + center[d] } else { -ub + center[d] };
        let w = random_walk_summary(rng, config.iterations, t);
        let span = (w.max - w.min) as f64;
        out[d] = (w.at - w.min) as f64 * (ub - lb) / span + lb;
    }
}

pub fn run_alo<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let params = &config.knobs.alo;
    let n = config.population_size;
    let dim = config.dim();
    let total = config.iterations;
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, total);

    let init: Vec<Vec<f64>> = (0..n).map(|_| config.bounds.sample(&mut rng)).collect();
    let costs = eval.evaluate(&init)?;
    let order = argsort(&costs);
    let mut antlions: Vec<Vec<f64>> = order.iter().map(|&i| init[i].clone()).collect();
    let mut lion_costs: Vec<f64> = order.iter().map(|&i| costs[i]).collect();

    // rank weights: best ant lion n, worst 1
    let weights: Vec<f64> = (0..n).map(|r| (n - r) as f64).collect();
    let mut ra = vec![0.0; dim];
    let mut re = vec![0.0; dim];

    for t in 1..=total {
        let ratio = shrink_ratio(t, total, &params.stages);
        let elite = antlions[0].clone();
        let mut ants = Vec::with_capacity(n);
        for _ in 0..n {
            let j = roulette(&weights, &mut rng);
            walk_around(&antlions[j], config, t, ratio, &mut rng, &mut ra);
            walk_around(&elite, config, t, ratio, &mut rng, &mut re);
            let mut ant: Vec<f64> = ra.iter().zip(&re).map(|(a, e)| 0.5 * (a + e)).collect();
            config.bounds.clamp(&mut ant);
            ants.push(ant);
        }
        let ant_costs = eval.evaluate(&ants)?;

        // ant lions catch fitter ants: keep the best n of both groups
        let mut pool = std::mem::take(&mut antlions);
        pool.extend(ants);
        let mut pool_costs = std::mem::take(&mut lion_costs);
        pool_costs.extend(ant_costs);
        let order = argsort(&pool_costs);
        let mut slots: Vec<Option<Vec<f64>>> = pool.into_iter().map(Some).collect();
        for &i in order.iter().take(n) {
            antlions.push(slots[i].take().expect("each index once"));
            lion_costs.push(pool_costs[i]);
        }
        eval.end_generation();
    }
    Ok(eval.finish())
}

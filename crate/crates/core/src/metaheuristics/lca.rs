//! League championship algorithm.
//!
//! Teams play a single round-robin per season. After each week a team rebuilds
//! its formation from its best formation using its last opponent and the team
//! its next opponent just played, moving toward or away from each depending on
//! who won.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Evaluator, MetaError, Objective, TrainConfig, TrainResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcaParams {
    /// Weight toward a rival after a win (strength-based moves).
    pub psi_win: f64,
    /// Weight away from / toward a rival after a loss (weakness-based moves).
    pub psi_loss: f64,
}

impl Default for LcaParams {
    fn default() -> Self {
        LcaParams {
            psi_win: 0.2,
            psi_loss: 1.0,
        }
    }
}

/// Circle-method schedule for an even number of teams. `weeks[w][i]` is team
/// `i`'s opponent in week `w`.
pub fn round_robin(teams: usize) -> Vec<Vec<usize>> {
    assert!(teams >= 2 && teams.is_multiple_of(2), "round robin needs an even team count");
    let rounds = teams - 1;
    let mut weeks = Vec::with_capacity(rounds);
    // slot 0 is fixed, the rest rotate
    let mut ring: Vec<usize> = (1..teams).collect();
    for _ in 0..rounds {
        let mut opp = vec![0; teams];
        let slots: Vec<usize> = std::iter::once(0).chain(ring.iter().copied()).collect();
        for k in 0..teams / 2 {
            let (a, b) = (slots[k], slots[teams - 1 - k]);
            opp[a] = b;
            opp[b] = a;
        }
        weeks.push(opp);
        ring.rotate_right(1);
    }
    weeks
}

/// Chance that a team with cost `fi` beats one with cost `fj`, given the
/// worst cost in the league.
pub fn win_probability(fi: f64, fj: f64, worst: f64) -> f64 {
    let (a, b) = (worst - fi, worst - fj);
    if a + b > 0.0 {
        a / (a + b)
    } else {
        0.5
    }
}

pub fn run_lca<O: Objective + ?Sized>(
    config: &TrainConfig,
    objective: &O,
) -> Result<TrainResult, MetaError> {
    config.validate()?;
    let p = &config.knobs.lca;
    let n = config.population_size;
    let dim = config.dim();
    // odd leagues get a bye slot with index n
    let slots = n + n % 2;
    let schedule = round_robin(slots);
    let weeks = schedule.len();
    let bounds = &config.bounds;
    let mut rng = config.rng();
    let mut eval = Evaluator::new(objective, config.iterations);

    let mut x: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample(&mut rng)).collect();
    let mut fx = eval.evaluate(&x)?;
    let mut best = x.clone();
    let mut fbest = fx.clone();

    for t in 0..config.iterations {
        let this_week = &schedule[t % weeks];
        let next_week = &schedule[(t + 1) % weeks];

        let worst = fx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut won = vec![true; slots];
        for i in 0..n {
            let j = this_week[i];
            if j < n && i < j {
                let i_wins = rng.random::<f64>() < win_probability(fx[i], fx[j], worst);
                won[i] = i_wins;
                won[j] = !i_wins;
            }
        }

        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let j = this_week[i];
            let l = next_week[i];
            let k = if l < n { this_week[l] } else { slots };
            let l_won = l >= n || won[l];
            let mut y = best[i].clone();
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                // what l's last opponent did: copy its strengths or avoid its weaknesses
                if k < n {
                    let (w, diff) = if l_won {
                        (p.psi_win, x[i][d] - x[k][d])
                    } else {
                        (p.psi_loss, x[k][d] - x[i][d])
                    };
                    y[d] += w * r1 * diff;
                }
                // what happened in our own match
                if j < n {
                    let (w, diff) = if won[i] {
                        (p.psi_win, x[i][d] - x[j][d])
                    } else {
                        (p.psi_loss, x[j][d] - x[i][d])
                    };
                    y[d] += w * r2 * diff;
                }
            }
            bounds.clamp(&mut y);
            next.push(y);
        }

        fx = eval.evaluate(&next)?;
        x = next;
        for i in 0..n {
            if fx[i] < fbest[i] {
                fbest[i] = fx[i];
                best[i].clone_from(&x[i]);
            }
        }
        eval.end_generation();
    }
    Ok(eval.finish())
}

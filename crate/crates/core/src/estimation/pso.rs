use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};

/// Swarm coefficients and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwarmSettings {
    pub swarm_size: usize,
    pub max_iterations: usize,
    /// Inertia weight w.
    pub inertia: f64,
    /// Cognitive coefficient c1.
    pub cognitive: f64,
    /// Social coefficient c2.
    pub social: f64,
}

impl Default for SwarmSettings {
    fn default() -> Self {
        Self { swarm_size: 100, max_iterations: 500, inertia: 0.9, cognitive: 0.5, social: 0.3 }
    }
}

impl SwarmSettings {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(SpmError::InvalidArgument(format!("swarm size must be >= 2, got {}", self.swarm_size)));
        }
        if self.max_iterations == 0 {
            return Err(SpmError::InvalidArgument("max_iterations must be >= 1".into()));
        }
        for (name, v) in [("inertia", self.inertia), ("cognitive", self.cognitive), ("social", self.social)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SpmError::InvalidArgument(format!("{name} coefficient must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one swarm run, in the caller's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmOutcome {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Global best cost after each iteration.
    pub cost_trace: Vec<f64>,
    pub iterations_run: usize,
    pub evaluations_run: usize,
}

/// Global-best particle swarm minimization of `f` over the box `bounds`.
///
/// The swarm lives in the unit cube; positions are mapped affinely onto the
/// box before every evaluation and clamped to it after every move. Initial
/// positions are uniform, initial velocities zero. Each iteration evaluates
/// the whole swarm (in parallel), updates personal and global bests, then
/// moves: `v = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)`.
///
/// Random numbers are drawn on the calling thread in a fixed order, so the
/// result depends only on `seed`. Non-finite costs are treated as `+inf`.
pub fn minimize<F>(f: F, bounds: &[(f64, f64)], settings: &SwarmSettings, seed: u64) -> Result<SwarmOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    settings.validate()?;
    if bounds.is_empty() {
        return Err(SpmError::Empty("search bounds"));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(SpmError::InvalidArgument(format!("search bound [{lo}, {hi}] is empty")));
    }
    let dim = bounds.len();
    let n = settings.swarm_size;
    let to_box = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(bounds).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut v = vec![vec![0.0; dim]; n];
    let mut pbest = x.clone();
    let mut pbest_cost = vec![f64::INFINITY; n];
    let mut gbest = x[0].clone();
    let mut gbest_cost = f64::INFINITY;
    let mut trace = Vec::with_capacity(settings.max_iterations);

    for _ in 0..settings.max_iterations {
        let costs: Vec<f64> = x
            .par_iter()
            .map(|u| {
                let c = f(&to_box(u));
                if c.is_nan() {
                    f64::INFINITY
                } else {
                    c
                }
            })
            .collect();
        for i in 0..n {
            if costs[i] < pbest_cost[i] {
                pbest_cost[i] = costs[i];
                pbest[i].clone_from(&x[i]);
            }
        }
        for i in 0..n {
            if pbest_cost[i] < gbest_cost {
                gbest_cost = pbest_cost[i];
                gbest.clone_from(&pbest[i]);
            }
        }
        trace.push(gbest_cost);

        for i in 0..n {
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                v[i][d] = settings.inertia * v[i][d]
                    + settings.cognitive * r1 * (pbest[i][d] - x[i][d])
                    + settings.social * r2 * (gbest[d] - x[i][d]);
                x[i][d] = (x[i][d] + v[i][d]).clamp(0.0, 1.0);
            }
        }
    }

    Ok(SwarmOutcome {
        best_position: to_box(&gbest),
        best_cost: gbest_cost,
        iterations_run: trace.len(),
        evaluations_run: trace.len() * n,
        cost_trace: trace,
    })
}

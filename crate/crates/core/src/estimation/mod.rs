//! Particle swarm estimation of the grouped parameters from a voltage trace,
//! in full (all nine parameters) or reduced (six high-sensitivity
//! parameters, the other three fixed) mode.

mod pso;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::model::{GroupedModel, GroupedParameters, ParameterName, PhysicalConstants};
use crate::profiles::CurrentProfile;
use crate::sensitivity::{evaluate_or_penalize, ParameterSpace, Scenario};
use crate::sim::simulate;

pub use pso::{minimize, SwarmOutcome, SwarmSettings};

/// Which parameters the swarm searches over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full9,
    High6,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full9 => "full9",
            Mode::High6 => "high6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full9" => Some(Mode::Full9),
            "high6" => Some(Mode::High6),
            _ => None,
        }
    }

    pub fn free_parameters(self) -> &'static [ParameterName] {
        match self {
            Mode::Full9 => &ParameterName::ALL,
            Mode::High6 => &ParameterName::HIGH_SENSITIVITY,
        }
    }

    pub fn dim(self) -> usize {
        self.free_parameters().len()
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values of the low-sensitivity parameters in reduced mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedValues {
    pub alpha_p: f64,
    pub d_n: f64,
    pub d_p: f64,
}

impl Default for FixedValues {
    fn default() -> Self {
        Self { alpha_p: 1250.0, d_n: 5e-5, d_p: 5e-4 }
    }
}

impl FixedValues {
    pub fn apply(&self, params: GroupedParameters) -> GroupedParameters {
        GroupedParameters { alpha_p: self.alpha_p, d_n: self.d_n, d_p: self.d_p, ..params }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    pub swarm: SwarmSettings,
    pub seed: u64,
    pub bounds: ParameterSpace,
    pub mode: Mode,
    pub fixed: FixedValues,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmSettings::default(),
            seed: 0,
            bounds: ParameterSpace::literature_ranges(),
            mode: Mode::High6,
            fixed: FixedValues::default(),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        self.swarm.validate()?;
        self.bounds.validate()?;
        self.search_space().map(|_| ())
    }

    /// The box the swarm searches: all nine ranges, or the six
    /// high-sensitivity ranges with the fixed values filled in.
    pub fn search_space(&self) -> Result<ParameterSpace> {
        let base = self.fixed.apply(self.bounds.base_params());
        self.bounds.restrict(self.mode.free_parameters(), base)
    }
}

/// RMSE objective over candidate vectors of the configured mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    mode: Mode,
    space: ParameterSpace,
    scenario: Scenario,
}

/// Build the objective for `profile` and its `measured` voltage. In reduced
/// mode candidates are completed with `fixed`; infeasible simulations score
/// [`crate::sensitivity::FAILURE_PENALTY`].
#[allow(clippy::too_many_arguments)]
pub fn make_objective(
    profile: CurrentProfile,
    measured: Vec<f64>,
    cutoff: f64,
    step: f64,
    mode: Mode,
    fixed: FixedValues,
    bounds: &ParameterSpace,
    consts: PhysicalConstants,
) -> Result<Objective> {
    if measured.is_empty() {
        return Err(SpmError::Empty("measured voltage"));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(SpmError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    consts.validate()?;
    let space = bounds.restrict(mode.free_parameters(), fixed.apply(bounds.base_params()))?;
    let scenario =
        Scenario { name: "estimation".into(), profile, reference: measured, cutoff, step, consts };
    Ok(Objective { mode, space, scenario })
}

impl Objective {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Full parameter set for a candidate vector.
    pub fn params_for(&self, candidate: &[f64]) -> Result<GroupedParameters> {
        if candidate.len() != self.dim() {
            return Err(SpmError::DimensionMismatch { expected: self.dim(), got: candidate.len() });
        }
        Ok(self.space.apply(&self.space.base_params(), candidate))
    }

    pub fn evaluate(&self, candidate: &[f64]) -> Result<f64> {
        let p = self.params_for(candidate)?;
        Ok(evaluate_or_penalize(&p, &self.scenario).0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub mode: Mode,
    pub seed: u64,
    pub best_params: GroupedParameters,
    pub best_cost: f64,
    pub cost_trace: Vec<f64>,
    pub iterations_run: usize,
    pub evaluations_run: usize,
}

impl EstimationResult {
    /// `iteration,best_cost_v` rows, iterations counted from 1.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trace_csv(w, &self.cost_trace)
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "iteration,best_cost_v")?;
    for (i, c) in trace.iter().enumerate() {
        writeln!(w, "{},{c}", i + 1)?;
    }
    Ok(())
}

/// Run the swarm on `objective`. The config's mode must match the
/// objective's.
pub fn pso_run(objective: &Objective, config: &PsoConfig) -> Result<EstimationResult> {
    config.validate()?;
    if config.mode != objective.mode {
        return Err(SpmError::InvalidArgument(format!(
            "objective is {} but the config asks for {}",
            objective.mode, config.mode
        )));
    }
    let out = minimize(
        |x| objective.evaluate(x).unwrap_or(f64::INFINITY),
        &objective.space.bounds(),
        &config.swarm,
        config.seed,
    )?;
    Ok(EstimationResult {
        mode: config.mode,
        seed: config.seed,
        best_params: objective.params_for(&out.best_position)?,
        best_cost: out.best_cost,
        cost_trace: out.cost_trace,
        iterations_run: out.iterations_run,
        evaluations_run: out.evaluations_run,
    })
}

/// Seed of repeat `index` derived from `base` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub mode: Mode,
    pub runs: Vec<EstimationResult>,
    pub mean_cost: f64,
    /// Sample standard deviation of the final costs (0 for a single run).
    pub std_cost: f64,
    pub min_cost: f64,
    pub max_cost: f64,
    /// Iteration-wise mean of the best-cost traces.
    pub mean_trace: Vec<f64>,
}

/// Run the swarm `repeats` times with derived seeds. `factory` builds the
/// objective of each repeat from its seed (so measurement noise can differ
/// per repeat).
pub fn repeated_estimation<F>(factory: F, config: &PsoConfig, repeats: usize) -> Result<EstimationSummary>
where
    F: Fn(u64) -> Result<Objective>,
{
    if repeats == 0 {
        return Err(SpmError::InvalidArgument("repeats must be >= 1".into()));
    }
    let mut runs = Vec::with_capacity(repeats);
    for i in 0..repeats {
        let seed = derive_seed(config.seed, i);
        let objective = factory(seed)?;
        let cfg = PsoConfig { seed, ..config.clone() };
        let r = pso_run(&objective, &cfg)?;
        log::info!("{} repeat {}/{}: best cost {:.6} V", config.mode, i + 1, repeats, r.best_cost);
        runs.push(r);
    }
    summarize(config.mode, runs)
}

pub fn summarize(mode: Mode, runs: Vec<EstimationResult>) -> Result<EstimationSummary> {
    let n = runs.len();
    if n == 0 {
        return Err(SpmError::Empty("estimation runs"));
    }
    let costs: Vec<f64> = runs.iter().map(|r| r.best_cost).collect();
    let mean_cost = costs.iter().sum::<f64>() / n as f64;
    let std_cost = if n > 1 {
        (costs.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let len = runs.iter().map(|r| r.cost_trace.len()).min().unwrap_or(0);
    let mean_trace =
        (0..len).map(|k| runs.iter().map(|r| r.cost_trace[k]).sum::<f64>() / n as f64).collect();
    Ok(EstimationSummary {
        mode,
        mean_cost,
        std_cost,
        min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
        max_cost: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_trace,
        runs,
    })
}

/// First (0-based) iteration whose best cost is at or below `threshold`;
/// `None` if the trace never gets there.
pub fn iterations_to_threshold(trace: &[f64], threshold: f64) -> Option<usize> {
    trace.iter().position(|&c| c <= threshold)
}

/// Voltage of the grouped model at `truth` under `profile`, optionally with
/// seeded Gaussian noise of standard deviation `noise_sigma` volts.
pub fn synthetic_measurement(
    truth: &GroupedParameters,
    consts: PhysicalConstants,
    profile: &CurrentProfile,
    cutoff: f64,
    step: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let model = GroupedModel::new(*truth, consts)?;
    let mut v = simulate(&model, profile, cutoff, step)?.voltage;
    if v.is_empty() {
        return Err(SpmError::Empty("synthetic measurement"));
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| SpmError::InvalidArgument(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut v {
            *x += normal.sample(&mut rng);
        }
    } else if noise_sigma < 0.0 || noise_sigma.is_nan() {
        return Err(SpmError::InvalidArgument(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    Ok(v)
}

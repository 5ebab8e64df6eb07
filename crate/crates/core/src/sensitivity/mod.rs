//! Variance-based global sensitivity analysis of the grouped parameters.
//!
//! Samples come from a digitally shifted Sobol sequence: the first `k`
//! coordinates form matrix A, the next `k` matrix B, and the radial matrices
//! A_B^(i) take column i from B. Total indices use the Jansen estimator,
//! normalized by the output variance over the pooled A and B evaluations.

mod sampling;
mod space;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::model::{GroupedModel, GroupedParameters, PhysicalConstants};
use crate::profiles::CurrentProfile;
use crate::sim::{overlap_rmse, simulate, simulate_voltage, BoundExit, Termination};

pub use sampling::{sample_matrices, SampleMatrices};
pub use space::{ParameterBound, ParameterSpace};

/// Output assigned to a sample whose simulation fails, V.
pub const FAILURE_PENALTY: f64 = 1.0;

/// A current profile with the reference voltage the model output is scored
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub profile: CurrentProfile,
    pub reference: Vec<f64>,
    pub cutoff: f64,
    pub step: f64,
    pub consts: PhysicalConstants,
}

impl Scenario {
    /// Scenario whose reference voltage is simulated from `reference_params`.
    pub fn synthetic(
        name: impl Into<String>,
        profile: CurrentProfile,
        reference_params: &GroupedParameters,
        consts: PhysicalConstants,
        cutoff: f64,
        step: f64,
    ) -> Result<Self> {
        let model = GroupedModel::new(*reference_params, consts)?;
        let reference = simulate(&model, &profile, cutoff, step)?.voltage;
        if reference.is_empty() {
            return Err(SpmError::Empty("reference simulation produced no samples"));
        }
        Ok(Self { name: name.into(), profile, reference, cutoff, step, consts })
    }
}

/// The default scenario set: constant discharges at 0.2C, 0.33C, 0.5C, 1C
/// and 3C, a pulse profile and a fluctuating profile.
pub fn default_scenarios(
    reference_params: &GroupedParameters,
    consts: PhysicalConstants,
    capacity_ah: f64,
    cutoff: f64,
    step: f64,
    profile_seed: u64,
) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (name, c_rate) in [("0.2C", 0.2), ("0.33C", 0.33), ("0.5C", 0.5), ("1C", 1.0), ("3C", 3.0)] {
        let profile = CurrentProfile::constant_current(c_rate, capacity_ah, 1.5 * 3600.0 / c_rate, step)?;
        out.push(Scenario::synthetic(name, profile, reference_params, consts, cutoff, step)?);
    }
    let pulse = CurrentProfile::pulse(profile_seed, capacity_ah, DYNAMIC_DURATION, step)?;
    out.push(Scenario::synthetic("pulse", pulse, reference_params, consts, cutoff, step)?);
    let fluct = CurrentProfile::fluctuating(profile_seed, capacity_ah, DYNAMIC_DURATION, step)?;
    out.push(Scenario::synthetic("fluctuating", fluct, reference_params, consts, cutoff, step)?);
    Ok(out)
}

/// Length of the dynamic profiles, s.
pub const DYNAMIC_DURATION: f64 = 9000.0;

/// Model output Y: voltage RMSE of the grouped model against the scenario
/// reference, over the common prefix of the two series.
///
/// Fails when the run cannot produce a comparable trace: invalid parameters,
/// no valid sample, or a surface concentration leaving (0, 1) other than by
/// exhaustion at the end of discharge.
pub fn evaluate_output(params: &GroupedParameters, scenario: &Scenario) -> Result<f64> {
    let model = GroupedModel::new(*params, scenario.consts)?;
    let trace = simulate_voltage(
        &model,
        &scenario.profile,
        scenario.cutoff,
        scenario.step,
        Some(scenario.reference.len()),
    )?;
    if trace.terminated_by == Termination::ConcentrationBound
        && trace.bound_exit != Some(BoundExit::Exhausted)
    {
        return Err(SpmError::InvalidArgument(format!(
            "surface concentration left (0, 1) ({:?}) after {} samples",
            trace.bound_exit,
            trace.voltage.len()
        )));
    }
    if trace.voltage.is_empty() {
        return Err(SpmError::Empty("simulation produced no samples"));
    }
    overlap_rmse(&scenario.reference, &trace.voltage)
}

/// [`evaluate_output`] with failures replaced by [`FAILURE_PENALTY`].
/// Returns the value and whether it was penalized.
pub fn evaluate_or_penalize(params: &GroupedParameters, scenario: &Scenario) -> (f64, bool) {
    match evaluate_output(params, scenario) {
        Ok(y) if y.is_finite() => (y, false),
        Ok(_) | Err(_) => (FAILURE_PENALTY, true),
    }
}

/// Total Sobol indices of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub names: Vec<String>,
    pub s_total: Vec<f64>,
    pub base_sample_count: usize,
    pub total_model_evaluations: usize,
    /// Variance of Y over the pooled A and B evaluations.
    pub output_variance: f64,
    /// Parameters whose estimate fell outside [0, 1].
    pub out_of_range: Vec<String>,
    /// Indices (into the evaluation order A, B, A_B^(1..k)) of samples that
    /// received the failure penalty.
    pub penalized: Vec<usize>,
}

impl SobolIndices {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.s_total[i])
    }

    /// Parameter names sorted by ascending total index.
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.names.len()).collect();
        idx.sort_by(|&a, &b| self.s_total[a].total_cmp(&self.s_total[b]));
        idx.into_iter().map(|i| self.names[i].as_str()).collect()
    }
}

/// Jansen total-effect estimator.
///
/// `y_a`, `y_b` are outputs at the rows of A and B, `y_ab[i]` the outputs at
/// the rows of A_B^(i).
pub fn total_indices(names: &[String], y_a: &[f64], y_b: &[f64], y_ab: &[Vec<f64>]) -> Result<SobolIndices> {
    let n = y_a.len();
    if n == 0 {
        return Err(SpmError::Empty("sensitivity outputs"));
    }
    if y_b.len() != n {
        return Err(SpmError::LengthMismatch { left: n, right: y_b.len() });
    }
    if y_ab.len() != names.len() {
        return Err(SpmError::LengthMismatch { left: names.len(), right: y_ab.len() });
    }
    if let Some(bad) = y_ab.iter().find(|v| v.len() != n) {
        return Err(SpmError::LengthMismatch { left: n, right: bad.len() });
    }
    let pooled = y_a.iter().chain(y_b);
    let mean = pooled.clone().sum::<f64>() / (2 * n) as f64;
    let var = pooled.map(|y| (y - mean) * (y - mean)).sum::<f64>() / (2 * n) as f64;
    if !(var > 0.0) || var <= f64::EPSILON * mean * mean {
        return Err(SpmError::ZeroVariance);
    }
    let s_total: Vec<f64> = y_ab
        .iter()
        .map(|col| {
            let ss: f64 = y_a.iter().zip(col).map(|(a, ab)| (a - ab) * (a - ab)).sum();
            ss / (2 * n) as f64 / var
        })
        .collect();
    let out_of_range = names
        .iter()
        .zip(&s_total)
        .filter(|(_, s)| !(0.0..=1.0).contains(*s))
        .map(|(n, _)| n.clone())
        .collect();
    Ok(SobolIndices {
        names: names.to_vec(),
        s_total,
        base_sample_count: n,
        total_model_evaluations: n * (names.len() + 2),
        output_variance: var,
        out_of_range,
        penalized: vec![],
    })
}

/// Evaluate `f` at every point of the sample matrices, in parallel, and
/// reduce to total indices. Results do not depend on the thread count.
pub fn indices_for<F>(names: &[String], samples: &SampleMatrices, f: F) -> Result<SobolIndices>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let points = samples.points();
    let y: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    let n = samples.n_base();
    let y_ab: Vec<Vec<f64>> = (0..samples.dim()).map(|i| y[(2 + i) * n..(3 + i) * n].to_vec()).collect();
    total_indices(names, &y[..n], &y[n..2 * n], &y_ab)
}

/// Sensitivity of the RMSE output to the nine grouped parameters, one
/// [`SobolIndices`] per scenario.
pub fn run_sensitivity(
    space: &ParameterSpace,
    scenarios: &[Scenario],
    n_base: usize,
    seed: u64,
) -> Result<Vec<(String, SobolIndices)>> {
    let samples = sample_matrices(&space.bounds(), n_base, seed)?;
    let points = samples.points();
    let names: Vec<String> = space.names().iter().map(|s| s.to_string()).collect();
    let base = space.base_params();
    let candidates: Vec<GroupedParameters> = points.iter().map(|p| space.apply(&base, p)).collect();
    let n = n_base;
    let mut out = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let evals: Vec<(f64, bool)> =
            candidates.par_iter().map(|p| evaluate_or_penalize(p, scenario)).collect();
        let penalized: Vec<usize> =
            evals.iter().enumerate().filter(|(_, e)| e.1).map(|(i, _)| i).collect();
        if !penalized.is_empty() {
            log::warn!(
                "scenario {}: {} of {} samples failed and were assigned Y = {FAILURE_PENALTY} V",
                scenario.name,
                penalized.len(),
                evals.len()
            );
        }
        let y: Vec<f64> = evals.iter().map(|e| e.0).collect();
        let y_ab: Vec<Vec<f64>> =
            (0..samples.dim()).map(|i| y[(2 + i) * n..(3 + i) * n].to_vec()).collect();
        let mut idx = total_indices(&names, &y[..n], &y[n..2 * n], &y_ab)?;
        idx.penalized = penalized;
        out.push((scenario.name.clone(), idx));
    }
    Ok(out)
}

/// Ishigami test function `sin x1 + a sin^2 x2 + b x3^4 sin x1`, used to
/// check the estimator.
pub fn ishigami(x: &[f64], a: f64, b: f64) -> f64 {
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

/// Closed-form total indices of [`ishigami`] with inputs uniform on
/// [-pi, pi].
pub fn ishigami_total_indices(a: f64, b: f64) -> [f64; 3] {
    use std::f64::consts::PI;
    let v1 = 0.5 * (1.0 + b * PI.powi(4) / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * PI.powi(8) * (1.0 / 18.0 - 1.0 / 50.0);
    let v = v1 + v2 + v13;
    [(v1 + v13) / v, v2 / v, v13 / v]
}

/// High/low sensitivity partition of the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screening {
    pub threshold_description: String,
    pub high: Vec<String>,
    pub low: Vec<String>,
}

/// A parameter is low-sensitivity when its total index is below `threshold`
/// on every scenario; otherwise it is high-sensitivity.
pub fn screen(indices: &[SobolIndices], threshold: f64) -> Result<Screening> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(SpmError::InvalidArgument(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let first = indices.first().ok_or(SpmError::Empty("index list"))?;
    let mut high = vec![];
    let mut low = vec![];
    for name in &first.names {
        let is_low = indices.iter().all(|idx| idx.get(name).is_some_and(|s| s < threshold));
        if is_low {
            low.push(name.clone());
        } else {
            high.push(name.clone());
        }
    }
    Ok(Screening { threshold_description: format!("S_T < {threshold} on every scenario"), high, low })
}

/// Write `scenario,parameter,s_total` rows.
pub fn write_indices_csv<W: std::io::Write>(mut w: W, results: &[(String, SobolIndices)]) -> Result<()> {
    writeln!(w, "scenario,parameter,s_total")?;
    for (scenario, idx) in results {
        for (name, s) in idx.names.iter().zip(&idx.s_total) {
            writeln!(w, "{scenario},{name},{s}")?;
        }
    }
    Ok(())
}

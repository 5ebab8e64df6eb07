//! Fixed-step simulation of a cell model over a current profile, and the
//! voltage RMSE objective.

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::integrate::rk4_step;
use crate::model::{CellOutput, Concentrations, GroupedModel, GroupedParameters, PhysicalConstants};
use crate::profiles::CurrentProfile;

/// A four-state cell model: linear concentration dynamics plus a nonlinear
/// voltage map over normalized surface concentrations.
pub trait CellModel: Sync {
    type State: Copy;

    fn initial_state(&self) -> Self::State;
    fn state_vector(state: &Self::State) -> [f64; 4];
    fn state_from_vector(v: [f64; 4]) -> Self::State;
    fn derivative(&self, x: &[f64; 4], current: f64) -> [f64; 4];
    /// Normalized average and surface concentrations.
    fn concentrations(&self, x: &[f64; 4], current: f64) -> Concentrations;
    fn voltage(&self, c: &Concentrations, current: f64) -> Result<f64>;
    /// Relaxation rate of the fastest diffusion mode, 1/s.
    fn fastest_rate(&self) -> f64;
}

/// Largest `rate * h` an RK4 substep may take. The stability limit of the
/// classical method on a real decay is about 2.79; staying at 1 also keeps
/// the truncation error small.
pub const MAX_RATE_STEP: f64 = 1.0;

/// Number of equal RK4 substeps per output step for a model whose fastest
/// mode relaxes at `rate`.
pub fn substeps(rate: f64, step: f64) -> usize {
    let m = (rate * step / MAX_RATE_STEP).ceil();
    if m.is_finite() && m > 1.0 {
        m as usize
    } else {
        1
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ProfileEnd,
    VoltageCutoff,
    ConcentrationBound,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ProfileEnd => "profile_end",
            Termination::VoltageCutoff => "voltage_cutoff",
            Termination::ConcentrationBound => "concentration_bound",
        }
    }
}

/// Which side of (0, 1) a surface concentration left through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundExit {
    /// Negative surface emptied or positive surface filled: the end of
    /// discharge, where the terminal voltage diverges downwards.
    Exhausted,
    /// Negative surface filled or positive surface emptied.
    Overcharged,
    NonFinite,
}

fn classify_exit(c: &Concentrations) -> BoundExit {
    if !(c.c_ss_n.is_finite() && c.c_ss_p.is_finite()) {
        BoundExit::NonFinite
    } else if c.c_ss_n <= 0.0 || c.c_ss_p >= 1.0 {
        BoundExit::Exhausted
    } else {
        BoundExit::Overcharged
    }
}

/// Time series produced by [`simulate`]; all vectors share one length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult<S> {
    pub time: Vec<f64>,
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub states: Vec<S>,
    pub outputs: Vec<CellOutput>,
    pub terminated_by: Termination,
    pub bound_exit: Option<BoundExit>,
}

impl<S> SimulationResult<S> {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// `time_s,current_a,voltage_v,soc_n,soc_p,css_n,css_p`, where `soc_*`
    /// are the normalized average concentrations.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,current_a,voltage_v,soc_n,soc_p,css_n,css_p")?;
        for k in 0..self.len() {
            let o = &self.outputs[k];
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.time[k], self.current[k], self.voltage[k], o.c_avg_n, o.c_avg_p, o.c_ss_n, o.c_ss_p
            )?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// One accepted step of the simulation loop.
struct StepRecord<'a> {
    time: f64,
    current: f64,
    state: &'a [f64; 4],
    conc: Concentrations,
    voltage: f64,
}

struct LoopEnd {
    terminated_by: Termination,
    bound_exit: Option<BoundExit>,
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(SpmError::InvalidArgument(format!("integration step must be positive, got {step}")))
    }
}

/// The simulation loop shared by every front end. `visit` sees each
/// accepted step and may stop the run early; such a stop reports
/// `ProfileEnd`.
fn run<M, F>(model: &M, profile: &CurrentProfile, cutoff: f64, step: f64, mut visit: F) -> Result<LoopEnd>
where
    M: CellModel,
    F: FnMut(StepRecord<'_>) -> ControlFlow<()>,
{
    check_step(step)?;
    if profile.is_empty() {
        return Err(SpmError::Empty("current profile"));
    }
    let last = (profile.end_time() / step + 1e-9).floor() as usize;
    let mut x = M::state_vector(&model.initial_state());
    let m = substeps(model.fastest_rate(), step);
    let h = step / m as f64;
    for k in 0..=last {
        let t = k as f64 * step;
        let current = profile.current_at(t);
        let conc = model.concentrations(&x, current);
        if !conc.surfaces_in_open_unit_interval() {
            return Ok(LoopEnd {
                terminated_by: Termination::ConcentrationBound,
                bound_exit: Some(classify_exit(&conc)),
            });
        }
        let voltage = model.voltage(&conc, current)?;
        if visit(StepRecord { time: t, current, state: &x, conc, voltage }).is_break() {
            break;
        }
        if voltage <= cutoff {
            return Ok(LoopEnd { terminated_by: Termination::VoltageCutoff, bound_exit: None });
        }
        if k < last {
            for _ in 0..m {
                x = rk4_step(|y: &[f64; 4]| model.derivative(y, current), &x, h);
            }
        }
    }
    Ok(LoopEnd { terminated_by: Termination::ProfileEnd, bound_exit: None })
}

/// Integrate `model` over `profile` with classical RK4 at a fixed `step`,
/// holding the current constant over each step. A step is split into
/// [`substeps`] equal RK4 substeps when the model's fastest mode would make
/// a single step unstable (small `alpha`); outputs stay on the `step` grid.
///
/// Stops after the first step whose voltage is at or below `cutoff` (that
/// step is kept), before the first step whose surface concentration leaves
/// (0, 1) (that step is dropped), or at the end of the profile.
pub fn simulate<M: CellModel>(
    model: &M,
    profile: &CurrentProfile,
    cutoff: f64,
    step: f64,
) -> Result<SimulationResult<M::State>> {
    let mut out = SimulationResult {
        time: vec![],
        current: vec![],
        voltage: vec![],
        states: vec![],
        outputs: vec![],
        terminated_by: Termination::ProfileEnd,
        bound_exit: None,
    };
    let end = run(model, profile, cutoff, step, |r| {
        out.time.push(r.time);
        out.current.push(r.current);
        out.voltage.push(r.voltage);
        out.states.push(M::state_from_vector(*r.state));
        out.outputs.push(CellOutput::new(r.conc, r.voltage));
        ControlFlow::Continue(())
    })?;
    out.terminated_by = end.terminated_by;
    out.bound_exit = end.bound_exit;
    Ok(out)
}

/// Voltage trace only, with the same stopping rules as [`simulate`];
/// `max_len` caps the number of recorded steps.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub voltage: Vec<f64>,
    pub terminated_by: Termination,
    pub bound_exit: Option<BoundExit>,
}

pub fn simulate_voltage<M: CellModel>(
    model: &M,
    profile: &CurrentProfile,
    cutoff: f64,
    step: f64,
    max_len: Option<usize>,
) -> Result<VoltageTrace> {
    let cap = max_len.unwrap_or(usize::MAX);
    let mut voltage = Vec::with_capacity(cap.min(profile.len()));
    if cap == 0 {
        return Ok(VoltageTrace { voltage, terminated_by: Termination::ProfileEnd, bound_exit: None });
    }
    let end = run(model, profile, cutoff, step, |r| {
        voltage.push(r.voltage);
        if voltage.len() >= cap {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(VoltageTrace { voltage, terminated_by: end.terminated_by, bound_exit: end.bound_exit })
}

/// Root mean square difference of two equally long series.
pub fn rmse(measured: &[f64], simulated: &[f64]) -> Result<f64> {
    if measured.len() != simulated.len() {
        return Err(SpmError::LengthMismatch { left: measured.len(), right: simulated.len() });
    }
    if measured.is_empty() {
        return Err(SpmError::Empty("rmse input"));
    }
    let sum: f64 = measured.iter().zip(simulated).map(|(m, s)| (m - s) * (m - s)).sum();
    Ok((sum / measured.len() as f64).sqrt())
}

/// RMSE over the common prefix of two series of possibly different length.
pub fn overlap_rmse(measured: &[f64], simulated: &[f64]) -> Result<f64> {
    let n = measured.len().min(simulated.len());
    rmse(&measured[..n], &simulated[..n])
}

/// Largest per-step differences between two simulations of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub max_voltage: f64,
    /// Over the normalized average and surface concentrations of both
    /// electrodes.
    pub max_concentration: f64,
    pub samples_left: usize,
    pub samples_right: usize,
}

impl Deviation {
    pub fn within(&self, voltage_tol: f64, concentration_tol: f64) -> bool {
        self.samples_left == self.samples_right
            && self.max_voltage <= voltage_tol
            && self.max_concentration <= concentration_tol
    }
}

/// Simulate both models and compare them step by step over the common
/// prefix.
pub fn compare_models<A: CellModel, B: CellModel>(
    left: &A,
    right: &B,
    profile: &CurrentProfile,
    cutoff: f64,
    step: f64,
) -> Result<Deviation> {
    let a = simulate(left, profile, cutoff, step)?;
    let b = simulate(right, profile, cutoff, step)?;
    let mut max_voltage = 0.0f64;
    let mut max_concentration = 0.0f64;
    for (x, y) in a.outputs.iter().zip(&b.outputs) {
        max_voltage = max_voltage.max((x.voltage - y.voltage).abs());
        for (u, v) in [
            (x.c_avg_p, y.c_avg_p),
            (x.c_ss_p, y.c_ss_p),
            (x.c_avg_n, y.c_avg_n),
            (x.c_ss_n, y.c_ss_n),
        ] {
            max_concentration = max_concentration.max((u - v).abs());
        }
    }
    Ok(Deviation { max_voltage, max_concentration, samples_left: a.len(), samples_right: b.len() })
}

/// A current profile together with the voltage measured under it.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub profile: CurrentProfile,
    pub measured: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiConditionRmse {
    pub names: Vec<String>,
    pub per_condition: Vec<f64>,
    pub mean: f64,
}

/// Voltage RMSE of the grouped model under each condition, plus the mean.
pub fn multi_condition_rmse(
    params: &GroupedParameters,
    consts: &PhysicalConstants,
    conditions: &[Condition],
    cutoff: f64,
    step: f64,
) -> Result<MultiConditionRmse> {
    if conditions.is_empty() {
        return Err(SpmError::Empty("condition list"));
    }
    let model = GroupedModel::new(*params, *consts)?;
    let mut per_condition = Vec::with_capacity(conditions.len());
    for c in conditions {
        let trace = simulate_voltage(&model, &c.profile, cutoff, step, Some(c.measured.len()))?;
        per_condition.push(overlap_rmse(&c.measured, &trace.voltage)?);
    }
    let mean = per_condition.iter().sum::<f64>() / per_condition.len() as f64;
    Ok(MultiConditionRmse { names: conditions.iter().map(|c| c.name.clone()).collect(), per_condition, mean })
}

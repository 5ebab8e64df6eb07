use super::kinetics::terminal_voltage;
use super::{CellState, Concentrations, Electrode, GroupedParameters, PhysicalConstants};
use crate::error::Result;
use crate::sim::CellModel;

/// Time derivative of the normalized state.
///
/// Per electrode, with s = +1 (positive) or -1 (negative):
/// `dq1/dt = s I / Q` and `dq2/dt = (30/alpha)(q1 - q2) + s (19/(7Q)) I`.
pub fn grouped_dynamics(state: &CellState, current: f64, params: &GroupedParameters) -> CellState {
    let rate = |e: Electrode| {
        let (q1, q2) = state.electrode(e);
        let u = e.flux_sign() * current / params.capacity(e);
        (u, 30.0 / params.alpha(e) * (q1 - q2) + 19.0 / 7.0 * u)
    };
    let (dq1_p, dq2_p) = rate(Electrode::Positive);
    let (dq1_n, dq2_n) = rate(Electrode::Negative);
    CellState { q1_p: dq1_p, q2_p: dq2_p, q1_n: dq1_n, q2_n: dq2_n }
}

/// Normalized average and surface concentrations; the surface picks up the
/// feedthrough `s alpha I / (105 Q)`.
pub fn grouped_output(state: &CellState, current: f64, params: &GroupedParameters) -> Concentrations {
    let feed = |e: Electrode| e.flux_sign() * params.alpha(e) * current / (105.0 * params.capacity(e));
    Concentrations {
        c_avg_p: state.q1_p,
        c_ss_p: state.q2_p + feed(Electrode::Positive),
        c_avg_n: state.q1_n,
        c_ss_n: state.q2_n + feed(Electrode::Negative),
    }
}

/// Uniform initial concentration: zero initial flux, so both states of an
/// electrode start at its initial stoichiometry.
pub fn initial_state(params: &GroupedParameters) -> CellState {
    CellState {
        q1_p: params.soc_p0,
        q2_p: params.soc_p0,
        q1_n: params.soc_n0,
        q2_n: params.soc_n0,
    }
}

/// State-space matrices of one electrode, input `u = s I` (the signed
/// electrode current).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeMatrices {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [[f64; 2]; 2],
    pub d: [f64; 2],
}

impl ElectrodeMatrices {
    pub fn new(alpha: f64, capacity: f64) -> Self {
        let k = 30.0 / alpha;
        Self {
            a: [[0.0, 0.0], [k, -k]],
            b: [1.0 / capacity, 19.0 / (7.0 * capacity)],
            c: [[1.0, 0.0], [0.0, 1.0]],
            d: [0.0, alpha / (105.0 * capacity)],
        }
    }

    pub fn for_electrode(params: &GroupedParameters, electrode: Electrode) -> Self {
        Self::new(params.alpha(electrode), params.capacity(electrode))
    }
}

/// Grouped model bound to a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedModel {
    params: GroupedParameters,
    consts: PhysicalConstants,
}

impl GroupedModel {
    pub fn new(params: GroupedParameters, consts: PhysicalConstants) -> Result<Self> {
        params.validate()?;
        consts.validate()?;
        Ok(Self { params, consts })
    }

    pub fn params(&self) -> &GroupedParameters {
        &self.params
    }

    pub fn consts(&self) -> &PhysicalConstants {
        &self.consts
    }
}

impl CellModel for GroupedModel {
    type State = CellState;

    fn initial_state(&self) -> CellState {
        initial_state(&self.params)
    }

    fn state_vector(state: &CellState) -> [f64; 4] {
        state.to_array()
    }

    fn state_from_vector(v: [f64; 4]) -> CellState {
        CellState::from_array(v)
    }

    #[inline]
    fn derivative(&self, x: &[f64; 4], current: f64) -> [f64; 4] {
        grouped_dynamics(&CellState::from_array(*x), current, &self.params).to_array()
    }

    fn concentrations(&self, x: &[f64; 4], current: f64) -> Concentrations {
        grouped_output(&CellState::from_array(*x), current, &self.params)
    }

    fn voltage(&self, c: &Concentrations, current: f64) -> Result<f64> {
        terminal_voltage(c, current, &self.params, &self.consts)
    }

    fn fastest_rate(&self) -> f64 {
        30.0 / self.params.alpha_n.min(self.params.alpha_p)
    }
}

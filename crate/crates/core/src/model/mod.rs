//! Grouped single particle model: domain types, OCP curves, kinetics and
//! the normalized state-space dynamics.

mod grouped;
mod kinetics;
pub mod ocp;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};

pub use grouped::{
    grouped_dynamics, grouped_output, initial_state, ElectrodeMatrices, GroupedModel,
};
pub use kinetics::{overpotential, terminal_voltage};

/// Electrode of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Positive,
    Negative,
}

impl Electrode {
    pub const BOTH: [Electrode; 2] = [Electrode::Positive, Electrode::Negative];

    /// Sign of the normalized concentration rate per ampere of discharge
    /// current: the positive electrode fills, the negative one depletes.
    pub fn flux_sign(self) -> f64 {
        match self {
            Electrode::Positive => 1.0,
            Electrode::Negative => -1.0,
        }
    }

    /// Sign indicator inside the overpotential: -1 positive, +1 negative.
    pub fn kinetic_sign(self) -> f64 {
        -self.flux_sign()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Electrode::Positive => "positive",
            Electrode::Negative => "negative",
        }
    }
}

/// Physical constants shared by every model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// J/(mol K)
    pub gas_constant: f64,
    /// C/mol
    pub faraday: f64,
    /// K
    pub temperature: f64,
    /// Electrolyte concentration, mol/m^3.
    pub electrolyte_concentration: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gas_constant: 8.314,
            faraday: 96485.33,
            temperature: 298.15,
            electrolyte_concentration: 1000.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gas_constant", self.gas_constant),
            ("faraday", self.faraday),
            ("temperature", self.temperature),
            ("electrolyte_concentration", self.electrolyte_concentration),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(SpmError::InvalidParameter {
                    name,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Prefactor 2RT/F of the overpotential, in volts.
    pub fn kinetic_prefactor(&self) -> f64 {
        2.0 * self.gas_constant * self.temperature / self.faraday
    }
}

/// Names of the nine grouped parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterName {
    AlphaN,
    AlphaP,
    QN,
    QP,
    DN,
    DP,
    SocN0,
    SocP0,
    R0,
}

impl ParameterName {
    pub const ALL: [ParameterName; 9] = [
        ParameterName::AlphaN,
        ParameterName::AlphaP,
        ParameterName::QN,
        ParameterName::QP,
        ParameterName::DN,
        ParameterName::DP,
        ParameterName::SocN0,
        ParameterName::SocP0,
        ParameterName::R0,
    ];

    /// The six parameters kept in reduced-mode estimation.
    pub const HIGH_SENSITIVITY: [ParameterName; 6] = [
        ParameterName::AlphaN,
        ParameterName::QN,
        ParameterName::QP,
        ParameterName::SocN0,
        ParameterName::SocP0,
        ParameterName::R0,
    ];

    /// The three parameters fixed in reduced-mode estimation.
    pub const LOW_SENSITIVITY: [ParameterName; 3] =
        [ParameterName::AlphaP, ParameterName::DN, ParameterName::DP];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParameterName::AlphaN => "alpha_n",
            ParameterName::AlphaP => "alpha_p",
            ParameterName::QN => "q_n",
            ParameterName::QP => "q_p",
            ParameterName::DN => "d_n",
            ParameterName::DP => "d_p",
            ParameterName::SocN0 => "soc_n0",
            ParameterName::SocP0 => "soc_p0",
            ParameterName::R0 => "r0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl std::fmt::Display for ParameterName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The nine identifiable quantities of the grouped model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedParameters {
    /// Diffusion time constant R_s^2/D_s of the negative particle, s.
    pub alpha_n: f64,
    /// Diffusion time constant of the positive particle, s.
    pub alpha_p: f64,
    /// Negative electrode capacity F A L eps c_max, C.
    pub q_n: f64,
    /// Positive electrode capacity, C.
    pub q_p: f64,
    /// Kinetic group r_eef sqrt(c_e)/(F R_s) of the negative electrode.
    pub d_n: f64,
    /// Kinetic group of the positive electrode.
    pub d_p: f64,
    pub soc_n0: f64,
    pub soc_p0: f64,
    /// Ohmic resistance, ohm.
    pub r0: f64,
}

impl GroupedParameters {
    /// Midpoints of the default parameter ranges, with the initial
    /// stoichiometries of a charged cell (negative 0.9, positive 0.1).
    pub fn nominal() -> Self {
        Self {
            alpha_n: 4158.5,
            alpha_p: 1250.7935,
            q_n: 10440.0,
            q_p: 10440.0,
            d_n: 4.185e-4,
            d_p: 5.395e-4,
            soc_n0: 0.9,
            soc_p0: 0.1,
            r0: 0.025,
        }
    }

    pub fn get(&self, name: ParameterName) -> f64 {
        match name {
            ParameterName::AlphaN => self.alpha_n,
            ParameterName::AlphaP => self.alpha_p,
            ParameterName::QN => self.q_n,
            ParameterName::QP => self.q_p,
            ParameterName::DN => self.d_n,
            ParameterName::DP => self.d_p,
            ParameterName::SocN0 => self.soc_n0,
            ParameterName::SocP0 => self.soc_p0,
            ParameterName::R0 => self.r0,
        }
    }

    pub fn set(&mut self, name: ParameterName, value: f64) {
        let slot = match name {
            ParameterName::AlphaN => &mut self.alpha_n,
            ParameterName::AlphaP => &mut self.alpha_p,
            ParameterName::QN => &mut self.q_n,
            ParameterName::QP => &mut self.q_p,
            ParameterName::DN => &mut self.d_n,
            ParameterName::DP => &mut self.d_p,
            ParameterName::SocN0 => &mut self.soc_n0,
            ParameterName::SocP0 => &mut self.soc_p0,
            ParameterName::R0 => &mut self.r0,
        };
        *slot = value;
    }

    pub fn with(mut self, name: ParameterName, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn to_array(&self) -> [f64; 9] {
        ParameterName::ALL.map(|p| self.get(p))
    }

    pub fn from_array(values: [f64; 9]) -> Self {
        let mut out = Self::nominal();
        for (name, v) in ParameterName::ALL.into_iter().zip(values) {
            out.set(name, v);
        }
        out
    }

    pub fn alpha(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.alpha_p,
            Electrode::Negative => self.alpha_n,
        }
    }

    pub fn capacity(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.q_p,
            Electrode::Negative => self.q_n,
        }
    }

    pub fn kinetic_group(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.d_p,
            Electrode::Negative => self.d_n,
        }
    }

    pub fn initial_soc(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.soc_p0,
            Electrode::Negative => self.soc_n0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in ParameterName::ALL {
            let v = self.get(name);
            let ok = v.is_finite()
                && match name {
                    ParameterName::SocN0 | ParameterName::SocP0 => (0.0..=1.0).contains(&v),
                    ParameterName::R0 => v >= 0.0,
                    _ => v > 0.0,
                };
            if !ok {
                let reason = match name {
                    ParameterName::SocN0 | ParameterName::SocP0 => "must lie in [0, 1]",
                    ParameterName::R0 => "must be non-negative",
                    _ => "must be strictly positive",
                };
                return Err(SpmError::InvalidParameter {
                    name: name.as_str(),
                    reason: format!("{reason}, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Normalized state [q1_p, q2_p, q1_n, q2_n] of the grouped model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub q1_p: f64,
    pub q2_p: f64,
    pub q1_n: f64,
    pub q2_n: f64,
}

impl CellState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.q1_p, self.q2_p, self.q1_n, self.q2_n]
    }

    pub fn from_array([q1_p, q2_p, q1_n, q2_n]: [f64; 4]) -> Self {
        Self { q1_p, q2_p, q1_n, q2_n }
    }

    /// (q1, q2) of one electrode.
    pub fn electrode(&self, electrode: Electrode) -> (f64, f64) {
        match electrode {
            Electrode::Positive => (self.q1_p, self.q2_p),
            Electrode::Negative => (self.q1_n, self.q2_n),
        }
    }
}

/// Normalized average and surface concentrations of both electrodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentrations {
    pub c_avg_p: f64,
    pub c_ss_p: f64,
    pub c_avg_n: f64,
    pub c_ss_n: f64,
}

impl Concentrations {
    pub fn surface(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.c_ss_p,
            Electrode::Negative => self.c_ss_n,
        }
    }

    pub fn average(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Positive => self.c_avg_p,
            Electrode::Negative => self.c_avg_n,
        }
    }

    pub fn surfaces_in_open_unit_interval(&self) -> bool {
        let open = |x: f64| x > 0.0 && x < 1.0;
        open(self.c_ss_p) && open(self.c_ss_n)
    }
}

/// Model outputs at one instant: normalized concentrations and terminal voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOutput {
    pub c_avg_p: f64,
    pub c_ss_p: f64,
    pub c_avg_n: f64,
    pub c_ss_n: f64,
    pub voltage: f64,
}

impl CellOutput {
    pub fn new(c: Concentrations, voltage: f64) -> Self {
        Self {
            c_avg_p: c.c_avg_p,
            c_ss_p: c.c_ss_p,
            c_avg_n: c.c_avg_n,
            c_ss_n: c.c_ss_n,
            voltage,
        }
    }

    pub fn concentrations(&self) -> Concentrations {
        Concentrations {
            c_avg_p: self.c_avg_p,
            c_ss_p: self.c_ss_p,
            c_avg_n: self.c_avg_n,
            c_ss_n: self.c_ss_n,
        }
    }
}

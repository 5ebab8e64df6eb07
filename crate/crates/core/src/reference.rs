//! Ungrouped parabolic-approximation SPM, integrated in physical
//! concentration units, and the map from the 17 physical parameters onto the
//! nine grouped ones.
//!
//! The flux form of the surface concentration,
//! `c_ss = c_avg + (8R/35) c_flux - (R/(35 D)) j`, and the feedthrough form
//! `c_ss = c_avg + (8R/35) c_flux + (R^2/(105 D)) s I/(F A L eps)` agree once
//! the pore-wall flux `j = -s I/(F a A L)` and the specific area
//! `a = 3 eps / R` are substituted: `R/(35 D) * R/(3 F eps A L) = R^2/(105 D F A L eps)`.
//! Here `s` is +1 for the positive and -1 for the negative electrode.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::model::{Concentrations, Electrode, GroupedParameters, PhysicalConstants};
use crate::sim::CellModel;

/// The 17 physical parameters of the ungrouped model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullParameters {
    /// Solid diffusion coefficients, m^2/s.
    pub d_s_n: f64,
    pub d_s_p: f64,
    /// Particle radii, m.
    pub r_s_n: f64,
    pub r_s_p: f64,
    /// Reaction rate constants.
    pub r_eef_n: f64,
    pub r_eef_p: f64,
    /// Electrode plate areas, m^2.
    pub a_area_n: f64,
    pub a_area_p: f64,
    /// Electrode thicknesses, m.
    pub l_n: f64,
    pub l_p: f64,
    /// Maximum solid concentrations, mol/m^3.
    pub c_max_n: f64,
    pub c_max_p: f64,
    /// Active material volume fractions.
    pub eps_n: f64,
    pub eps_p: f64,
    /// Initial uniform solid concentrations, mol/m^3.
    pub c_n0: f64,
    pub c_p0: f64,
    /// Ohmic resistance, ohm.
    pub r0: f64,
}

/// Per-electrode view of [`FullParameters`].
#[derive(Debug, Clone, Copy)]
struct ElectrodeProps {
    d_s: f64,
    r_s: f64,
    r_eef: f64,
    area: f64,
    thickness: f64,
    c_max: f64,
    eps: f64,
    c0: f64,
}

impl ElectrodeProps {
    /// Specific interfacial area, 1/m.
    fn specific_area(&self) -> f64 {
        3.0 * self.eps / self.r_s
    }
}

impl FullParameters {
    /// A 2.9 Ah-class NMC/graphite cell whose grouped values sit close to
    /// the nominal grouped parameters.
    pub fn example() -> Self {
        Self {
            d_s_n: 6.0e-15,
            d_s_p: 1.28e-14,
            r_s_n: 5.0e-6,
            r_s_p: 4.0e-6,
            r_eef_n: 6.385e-6,
            r_eef_p: 6.584e-6,
            a_area_n: 0.1,
            a_area_p: 0.1,
            l_n: 60.0e-6,
            l_p: 50.0e-6,
            c_max_n: 30000.0,
            c_max_p: 48000.0,
            eps_n: 0.6,
            eps_p: 0.45,
            c_n0: 27000.0,
            c_p0: 4800.0,
            r0: 0.025,
        }
    }

    fn electrode(&self, e: Electrode) -> ElectrodeProps {
        match e {
            Electrode::Positive => ElectrodeProps {
                d_s: self.d_s_p,
                r_s: self.r_s_p,
                r_eef: self.r_eef_p,
                area: self.a_area_p,
                thickness: self.l_p,
                c_max: self.c_max_p,
                eps: self.eps_p,
                c0: self.c_p0,
            },
            Electrode::Negative => ElectrodeProps {
                d_s: self.d_s_n,
                r_s: self.r_s_n,
                r_eef: self.r_eef_n,
                area: self.a_area_n,
                thickness: self.l_n,
                c_max: self.c_max_n,
                eps: self.eps_n,
                c0: self.c_n0,
            },
        }
    }

    pub fn c_max(&self, e: Electrode) -> f64 {
        self.electrode(e).c_max
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_s_n", self.d_s_n),
            ("d_s_p", self.d_s_p),
            ("r_s_n", self.r_s_n),
            ("r_s_p", self.r_s_p),
            ("r_eef_n", self.r_eef_n),
            ("r_eef_p", self.r_eef_p),
            ("a_area_n", self.a_area_n),
            ("a_area_p", self.a_area_p),
            ("l_n", self.l_n),
            ("l_p", self.l_p),
            ("c_max_n", self.c_max_n),
            ("c_max_p", self.c_max_p),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SpmError::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        for (name, v) in [("eps_n", self.eps_n), ("eps_p", self.eps_p)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(SpmError::InvalidParameter {
                    name,
                    reason: format!("volume fraction must lie in (0, 1), got {v}"),
                });
            }
        }
        for (name, c0, cmax) in [("c_n0", self.c_n0, self.c_max_n), ("c_p0", self.c_p0, self.c_max_p)] {
            if !(c0 >= 0.0 && c0 <= cmax) {
                return Err(SpmError::InvalidParameter {
                    name,
                    reason: format!("must lie in [0, c_max = {cmax}], got {c0}"),
                });
            }
        }
        if !(self.r0.is_finite() && self.r0 >= 0.0) {
            return Err(SpmError::InvalidParameter {
                name: "r0",
                reason: format!("must be non-negative, got {}", self.r0),
            });
        }
        Ok(())
    }
}

/// Map the physical parameters onto the grouped set:
/// `alpha = R^2/D`, `Q = F A L eps c_max`, `d = r_eef sqrt(c_e)/(F R)`,
/// `soc0 = c0/c_max`.
pub fn group_parameters(full: &FullParameters, consts: &PhysicalConstants) -> GroupedParameters {
    let f = consts.faraday;
    let group = |e: Electrode| {
        let p = full.electrode(e);
        (
            p.r_s * p.r_s / p.d_s,
            f * p.area * p.thickness * p.eps * p.c_max,
            p.r_eef * consts.electrolyte_concentration.sqrt() / (f * p.r_s),
            p.c0 / p.c_max,
        )
    };
    let (alpha_p, q_p, d_p, soc_p0) = group(Electrode::Positive);
    let (alpha_n, q_n, d_n, soc_n0) = group(Electrode::Negative);
    GroupedParameters { alpha_n, alpha_p, q_n, q_p, d_n, d_p, soc_n0, soc_p0, r0: full.r0 }
}

/// Average concentration (mol/m^3) and average concentration flux
/// (mol/m^4) of both particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PregroupedState {
    pub c_avg_p: f64,
    pub c_flux_p: f64,
    pub c_avg_n: f64,
    pub c_flux_n: f64,
}

impl PregroupedState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.c_avg_p, self.c_flux_p, self.c_avg_n, self.c_flux_n]
    }

    pub fn from_array([c_avg_p, c_flux_p, c_avg_n, c_flux_n]: [f64; 4]) -> Self {
        Self { c_avg_p, c_flux_p, c_avg_n, c_flux_n }
    }

    fn electrode(&self, e: Electrode) -> (f64, f64) {
        match e {
            Electrode::Positive => (self.c_avg_p, self.c_flux_p),
            Electrode::Negative => (self.c_avg_n, self.c_flux_n),
        }
    }
}

/// Pore-wall molar flux j (mol m^-2 s^-1), positive into the particle.
fn pore_wall_flux(p: &ElectrodeProps, e: Electrode, current: f64, faraday: f64) -> f64 {
    e.kinetic_sign() * current / (faraday * p.specific_area() * p.area * p.thickness)
}

/// Parabolic-approximation dynamics:
/// `dc_avg/dt = -(3/R) j`, `dc_flux/dt = -(30 D/R^2) c_flux - 45/(2 R^2) j`.
pub fn pregrouped_dynamics(
    state: &PregroupedState,
    current: f64,
    params: &FullParameters,
    consts: &PhysicalConstants,
) -> PregroupedState {
    let rate = |e: Electrode| {
        let p = params.electrode(e);
        let (_, cf) = state.electrode(e);
        let j = pore_wall_flux(&p, e, current, consts.faraday);
        let r2 = p.r_s * p.r_s;
        (-3.0 / p.r_s * j, -30.0 * p.d_s / r2 * cf - 45.0 / (2.0 * r2) * j)
    };
    let (c_avg_p, c_flux_p) = rate(Electrode::Positive);
    let (c_avg_n, c_flux_n) = rate(Electrode::Negative);
    PregroupedState { c_avg_p, c_flux_p, c_avg_n, c_flux_n }
}

/// Surface concentrations (mol/m^3) `[positive, negative]`,
/// `c_ss = c_avg + (8R/35) c_flux - (R/(35 D)) j`.
pub fn pregrouped_surface(
    state: &PregroupedState,
    current: f64,
    params: &FullParameters,
    consts: &PhysicalConstants,
) -> [f64; 2] {
    Electrode::BOTH.map(|e| {
        let p = params.electrode(e);
        let (c, cf) = state.electrode(e);
        let j = pore_wall_flux(&p, e, current, consts.faraday);
        c + 8.0 * p.r_s / 35.0 * cf - p.r_s / (35.0 * p.d_s) * j
    })
}

/// Ungrouped model bound to a physical parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PregroupedModel {
    params: FullParameters,
    consts: PhysicalConstants,
}

impl PregroupedModel {
    pub fn new(params: FullParameters, consts: PhysicalConstants) -> Result<Self> {
        params.validate()?;
        consts.validate()?;
        Ok(Self { params, consts })
    }

    pub fn params(&self) -> &FullParameters {
        &self.params
    }

    /// Overpotential through the exchange current density
    /// `j0 = r_eef c_max sqrt(c_e x (1 - x))` and `I / (2 a A L j0)`.
    fn overpotential(&self, e: Electrode, x: f64, current: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(SpmError::Domain {
                what: "surface concentration in overpotential",
                value: x,
                domain: "(0, 1)",
            });
        }
        let p = self.params.electrode(e);
        let j0 = p.r_eef * p.c_max * (self.consts.electrolyte_concentration * x * (1.0 - x)).sqrt();
        let arg = e.kinetic_sign() * current / (2.0 * p.specific_area() * p.area * p.thickness * j0);
        Ok(self.consts.kinetic_prefactor() * arg.asinh())
    }
}

impl CellModel for PregroupedModel {
    type State = PregroupedState;

    fn initial_state(&self) -> PregroupedState {
        PregroupedState {
            c_avg_p: self.params.c_p0,
            c_flux_p: 0.0,
            c_avg_n: self.params.c_n0,
            c_flux_n: 0.0,
        }
    }

    fn state_vector(state: &PregroupedState) -> [f64; 4] {
        state.to_array()
    }

    fn state_from_vector(v: [f64; 4]) -> PregroupedState {
        PregroupedState::from_array(v)
    }

    fn derivative(&self, x: &[f64; 4], current: f64) -> [f64; 4] {
        pregrouped_dynamics(&PregroupedState::from_array(*x), current, &self.params, &self.consts)
            .to_array()
    }

    fn concentrations(&self, x: &[f64; 4], current: f64) -> Concentrations {
        let s = PregroupedState::from_array(*x);
        let [ss_p, ss_n] = pregrouped_surface(&s, current, &self.params, &self.consts);
        Concentrations {
            c_avg_p: s.c_avg_p / self.params.c_max_p,
            c_ss_p: ss_p / self.params.c_max_p,
            c_avg_n: s.c_avg_n / self.params.c_max_n,
            c_ss_n: ss_n / self.params.c_max_n,
        }
    }

    fn voltage(&self, c: &Concentrations, current: f64) -> Result<f64> {
        use crate::model::ocp::{ocp_negative, ocp_positive};
        let eta_p = self.overpotential(Electrode::Positive, c.c_ss_p, current)?;
        let eta_n = self.overpotential(Electrode::Negative, c.c_ss_n, current)?;
        Ok(ocp_positive(c.c_ss_p)? - ocp_negative(c.c_ss_n)? + eta_p - eta_n - self.params.r0 * current)
    }

    // Same arithmetic as the grouped model so both pick the same substep count.
    fn fastest_rate(&self) -> f64 {
        let tau = |e: Electrode| {
            let p = self.params.electrode(e);
            p.r_s * p.r_s / p.d_s
        };
        30.0 / tau(Electrode::Negative).min(tau(Electrode::Positive))
    }
}

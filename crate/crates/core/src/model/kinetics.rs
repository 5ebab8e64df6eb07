use super::ocp::{ocp_negative_unchecked, ocp_positive_unchecked};
use super::{Concentrations, Electrode, GroupedParameters, PhysicalConstants};
use crate::error::{Result, SpmError};

/// Surface overpotential (V) of one electrode in grouped form,
/// `(2RT/F) asinh(sign * I / (6 Q d sqrt(x (1 - x))))`.
pub fn overpotential(
    electrode: Electrode,
    x_ss: f64,
    current: f64,
    params: &GroupedParameters,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(x_ss > 0.0 && x_ss < 1.0) {
        return Err(SpmError::Domain {
            what: "surface concentration in overpotential",
            value: x_ss,
            domain: "(0, 1)",
        });
    }
    let q = params.capacity(electrode);
    let d = params.kinetic_group(electrode);
    let denom = 6.0 * q * d * (x_ss * (1.0 - x_ss)).sqrt();
    Ok(consts.kinetic_prefactor() * (electrode.kinetic_sign() * current / denom).asinh())
}

/// Terminal voltage from the two surface concentrations:
/// `OCP_p - OCP_n + eta_p - eta_n - R0 I`.
pub fn terminal_voltage(
    surface: &Concentrations,
    current: f64,
    params: &GroupedParameters,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let eta_p = overpotential(Electrode::Positive, surface.c_ss_p, current, params, consts)?;
    let eta_n = overpotential(Electrode::Negative, surface.c_ss_n, current, params, consts)?;
    // both surfaces are now known to be inside (0, 1)
    Ok(ocp_positive_unchecked(surface.c_ss_p) - ocp_negative_unchecked(surface.c_ss_n) + eta_p
        - eta_n
        - params.r0 * current)
}

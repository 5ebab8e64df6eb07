//! Open-circuit potential curves of the NMC positive and graphite negative
//! electrodes, as functions of normalized surface concentration.

use crate::error::{Result, SpmError};

/// Coefficients of the positive-electrode polynomial, constant term first.
pub const POSITIVE_COEFFICIENTS: [f64; 8] = [
    4.26541327,
    -1.74561881,
    12.91342685,
    -71.23523821,
    182.39441925,
    -237.12698576,
    153.41883911,
    -39.38243997,
];

/// One `amplitude * tanh((x - center) / width)` term of the graphite curve.
#[derive(Debug, Clone, Copy)]
pub struct TanhTerm {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

pub const NEGATIVE_OFFSET: f64 = 50.9268468;
pub const NEGATIVE_EXP_AMPLITUDE: f64 = 1.01981453;
pub const NEGATIVE_EXP_RATE: f64 = 0.00300736348;

/// Subtracted tanh terms of the graphite curve.
pub const NEGATIVE_TANH_TERMS: [TanhTerm; 4] = [
    TanhTerm { amplitude: 97.3001503, center: -0.133226619, width: 0.0438465709 },
    TanhTerm { amplitude: 0.0188982006, center: 0.511704304, width: 0.0237662771 },
    TanhTerm { amplitude: 0.0437651724, center: 0.174973549, width: 0.0540321443 },
    TanhTerm { amplitude: 47.5291964, center: 1.18796536, width: 0.0516560110 },
];

fn check_domain(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(SpmError::Domain { what, value: x, domain: "[0, 1]" })
    }
}

/// Positive electrode OCP (V), seventh-order polynomial in `x`.
pub fn ocp_positive(x: f64) -> Result<f64> {
    check_domain("positive surface concentration", x)?;
    Ok(ocp_positive_unchecked(x))
}

/// Negative electrode OCP (V): exponential plus four tanh steps.
pub fn ocp_negative(x: f64) -> Result<f64> {
    check_domain("negative surface concentration", x)?;
    Ok(ocp_negative_unchecked(x))
}

#[inline]
pub(crate) fn ocp_positive_unchecked(x: f64) -> f64 {
    POSITIVE_COEFFICIENTS.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[inline]
pub(crate) fn ocp_negative_unchecked(x: f64) -> f64 {
    let mut v = NEGATIVE_OFFSET - NEGATIVE_EXP_AMPLITUDE * (NEGATIVE_EXP_RATE * x).exp();
    for t in &NEGATIVE_TANH_TERMS {
        v -= t.amplitude * ((x - t.center) / t.width).tanh();
    }
    v
}

//! Shared fixtures for the benchmarks.

use spm_core::{CurrentProfile, FullParameters, GroupedParameters, PhysicalConstants};

pub const CAPACITY_AH: f64 = 2.9;
pub const CUTOFF: f64 = 2.5;
pub const STEP: f64 = 1.0;

pub fn consts() -> PhysicalConstants {
    PhysicalConstants::default()
}

pub fn nominal() -> GroupedParameters {
    GroupedParameters::nominal()
}

pub fn full() -> FullParameters {
    FullParameters::example()
}

/// One hour at 1C.
pub fn one_c() -> CurrentProfile {
    CurrentProfile::constant_current(1.0, CAPACITY_AH, 3600.0, STEP).expect("valid profile")
}

/// Half an hour at 0.5C, short enough to keep objective benches quick.
pub fn half_c_short() -> CurrentProfile {
    CurrentProfile::constant_current(0.5, CAPACITY_AH, 1800.0, STEP).expect("valid profile")
}

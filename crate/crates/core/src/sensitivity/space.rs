use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::model::{GroupedParameters, ParameterName};

/// Search interval of one grouped parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBound {
    pub name: ParameterName,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterBound {
    pub fn new(name: ParameterName, lower: f64, upper: f64) -> Self {
        Self { name, lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Box over a subset of the grouped parameters. Parameters outside the box
/// take their value from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpace {
    bounds: Vec<ParameterBound>,
    base: GroupedParameters,
}

const NOMINAL_CAPACITY_C: f64 = 2.9 * 3600.0;

impl Default for ParameterSpace {
    fn default() -> Self {
        Self::literature_ranges()
    }
}

impl ParameterSpace {
    /// Ranges of the nine grouped parameters for a 2.9 Ah NMC/graphite
    /// cell, electrode capacities at +-20% of the nominal capacity.
    pub fn literature_ranges() -> Self {
        use ParameterName::*;
        let bounds = vec![
            ParameterBound::new(AlphaN, 625.0, 7692.0),
            ParameterBound::new(AlphaP, 1.587, 2500.0),
            ParameterBound::new(QN, NOMINAL_CAPACITY_C * 0.8, NOMINAL_CAPACITY_C * 1.2),
            ParameterBound::new(QP, NOMINAL_CAPACITY_C * 0.8, NOMINAL_CAPACITY_C * 1.2),
            ParameterBound::new(DN, 5.7e-5, 7.8e-4),
            ParameterBound::new(DP, 7.9e-5, 1.0e-3),
            ParameterBound::new(SocN0, 0.8, 1.0),
            ParameterBound::new(SocP0, 0.0, 0.2),
            ParameterBound::new(R0, 0.0, 0.05),
        ];
        Self { bounds, base: GroupedParameters::nominal() }
    }

    pub fn new(bounds: Vec<ParameterBound>, base: GroupedParameters) -> Result<Self> {
        let space = Self { bounds, base };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(SpmError::Empty("parameter space"));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(SpmError::InvalidParameter {
                    name: b.name.as_str(),
                    reason: format!("bounds must satisfy lower < upper, got [{}, {}]", b.lower, b.upper),
                });
            }
            if self.bounds[..i].iter().any(|o| o.name == b.name) {
                return Err(SpmError::InvalidParameter {
                    name: b.name.as_str(),
                    reason: "listed twice".into(),
                });
            }
        }
        Ok(())
    }

    /// Keep only `names` (in the given order) free; every other parameter
    /// is pinned to its value in `fixed`.
    pub fn restrict(&self, names: &[ParameterName], fixed: GroupedParameters) -> Result<Self> {
        let bounds = names
            .iter()
            .map(|n| {
                self.bound(*n).copied().ok_or(SpmError::InvalidParameter {
                    name: n.as_str(),
                    reason: "not part of the parameter space".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bounds, fixed)
    }

    pub fn bound(&self, name: ParameterName) -> Option<&ParameterBound> {
        self.bounds.iter().find(|b| b.name == name)
    }

    pub fn bounds_list(&self) -> &[ParameterBound] {
        &self.bounds
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.iter().map(|b| (b.lower, b.upper)).collect()
    }

    pub fn names(&self) -> Vec<ParameterName> {
        self.bounds.iter().map(|b| b.name).collect()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn base_params(&self) -> GroupedParameters {
        self.base
    }

    pub fn with_base(mut self, base: GroupedParameters) -> Self {
        self.base = base;
        self
    }

    /// Parameter set with the free parameters taken from `values`.
    pub fn apply(&self, base: &GroupedParameters, values: &[f64]) -> GroupedParameters {
        debug_assert_eq!(values.len(), self.bounds.len());
        let mut p = *base;
        for (b, &v) in self.bounds.iter().zip(values) {
            p.set(b.name, v);
        }
        p
    }

    /// Free parameter values of `params`, in bound order.
    pub fn extract(&self, params: &GroupedParameters) -> Vec<f64> {
        self.bounds.iter().map(|b| params.get(b.name)).collect()
    }

    /// Affine map from the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(unit).map(|(b, u)| b.lower + u * b.width()).collect()
    }

    pub fn to_unit(&self, values: &[f64]) -> Vec<f64> {
        self.bounds.iter().zip(values).map(|(b, v)| (v - b.lower) / b.width()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literature_ranges_are_valid() {
        let s = ParameterSpace::literature_ranges();
        s.validate().unwrap();
        assert_eq!(s.dim(), 9);
        assert_eq!(s.names(), ParameterName::ALL.to_vec());
        let q = s.bound(ParameterName::QN).unwrap();
        assert!((q.lower - 8352.0).abs() < 1e-9 && (q.upper - 12528.0).abs() < 1e-9);
        // nominal parameters are the midpoints, apart from the two stoichiometries
        let nominal = GroupedParameters::nominal();
        for b in s.bounds_list() {
            if !matches!(b.name, ParameterName::SocN0 | ParameterName::SocP0) {
                assert!((nominal.get(b.name) / b.midpoint() - 1.0).abs() < 1e-12, "{}", b.name);
            }
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        let base = GroupedParameters::nominal();
        assert!(ParameterSpace::new(vec![ParameterBound::new(ParameterName::R0, 1.0, 1.0)], base).is_err());
        assert!(ParameterSpace::new(vec![], base).is_err());
        let dup = vec![
            ParameterBound::new(ParameterName::R0, 0.0, 1.0),
            ParameterBound::new(ParameterName::R0, 0.0, 2.0),
        ];
        assert!(ParameterSpace::new(dup, base).is_err());
    }

    #[test]
    fn restrict_and_apply() {
        let fixed = GroupedParameters { alpha_p: 1250.0, d_n: 5e-5, d_p: 5e-4, ..GroupedParameters::nominal() };
        let s = ParameterSpace::literature_ranges()
            .restrict(&ParameterName::HIGH_SENSITIVITY, fixed)
            .unwrap();
        assert_eq!(s.dim(), 6);
        let p = s.apply(&s.base_params(), &[1000.0, 9000.0, 9500.0, 0.85, 0.05, 0.01]);
        assert_eq!((p.alpha_p, p.d_n, p.d_p), (1250.0, 5e-5, 5e-4));
        assert_eq!((p.alpha_n, p.q_n, p.r0), (1000.0, 9000.0, 0.01));
        assert_eq!(s.extract(&p), vec![1000.0, 9000.0, 9500.0, 0.85, 0.05, 0.01]);
        let u = s.to_unit(&s.extract(&p));
        let back = s.from_unit(&u);
        for (a, b) in back.iter().zip(s.extract(&p)) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sobol::params::JoeKuoD6;
use sobol::Sobol;

use crate::error::{Result, SpmError};

/// Saltelli sample design: base matrices A and B (`n_base x k`) and the `k`
/// radial matrices A_B^(i).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrices {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub ab: Vec<Vec<Vec<f64>>>,
}

impl SampleMatrices {
    pub fn n_base(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.ab.len()
    }

    /// All evaluation points in the order A, B, A_B^(1), ..., A_B^(k);
    /// `n_base * (k + 2)` rows.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_base() * (self.dim() + 2));
        out.extend(self.a.iter().cloned());
        out.extend(self.b.iter().cloned());
        for m in &self.ab {
            out.extend(m.iter().cloned());
        }
        out
    }
}

/// Build the sample design over the box `bounds` from the first `n_base`
/// points of a `2k`-dimensional Sobol sequence, randomized by a seeded
/// digital shift. `n_base` must be a power of two, at least 2.
pub fn sample_matrices(bounds: &[(f64, f64)], n_base: usize, seed: u64) -> Result<SampleMatrices> {
    if n_base < 2 || !n_base.is_power_of_two() {
        return Err(SpmError::InvalidArgument(format!(
            "base sample count must be a power of two >= 2, got {n_base}"
        )));
    }
    let k = bounds.len();
    if k == 0 {
        return Err(SpmError::Empty("parameter bounds"));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
        return Err(SpmError::InvalidArgument(format!("bound [{lo}, {hi}] is empty")));
    }
    let params = JoeKuoD6::minimal();
    if 2 * k > params.max_dims {
        return Err(SpmError::InvalidArgument(format!("at most {} parameters supported", params.max_dims / 2)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<u32> = (0..2 * k).map(|_| rng.gen()).collect();
    let scale = 1.0 / 4_294_967_296.0;
    let unit: Vec<Vec<f64>> = Sobol::<u32>::new(2 * k, &params)
        .take(n_base)
        .map(|p| p.iter().zip(&shift).map(|(v, s)| ((v ^ s) as f64 + 0.5) * scale).collect())
        .collect();
    let map = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(bounds).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
    };
    let a: Vec<Vec<f64>> = unit.iter().map(|u| map(&u[..k])).collect();
    let b: Vec<Vec<f64>> = unit.iter().map(|u| map(&u[k..])).collect();
    let ab = (0..k)
        .map(|i| {
            a.iter()
                .zip(&b)
                .map(|(ra, rb)| {
                    let mut row = ra.clone();
                    row[i] = rb[i];
                    row
                })
                .collect()
        })
        .collect();
    Ok(SampleMatrices { a, b, ab })
}

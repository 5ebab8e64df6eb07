//! Applied-current profiles. Positive current is discharge.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};

pub const DEFAULT_CAPACITY_AH: f64 = 2.9;

/// Minimum dwell of one level in a pulse profile, s.
pub const PULSE_MIN_DWELL: f64 = 8.0;
/// Nominal length of one pulse period, s.
pub const PULSE_PERIOD: f64 = 360.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// s
    pub time: f64,
    /// A
    pub current: f64,
}

/// Timestamped current series, held constant between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    samples: Vec<Sample>,
    nominal_capacity_ah: f64,
}

fn check_grid(duration: f64, step: f64) -> Result<usize> {
    if !(step.is_finite() && step > 0.0) {
        return Err(SpmError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(SpmError::InvalidArgument(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    Ok((duration / step + 1e-9).floor() as usize + 1)
}

fn check_capacity(capacity_ah: f64) -> Result<()> {
    if capacity_ah.is_finite() && capacity_ah > 0.0 {
        Ok(())
    } else {
        Err(SpmError::InvalidArgument(format!("capacity must be positive, got {capacity_ah}")))
    }
}

impl CurrentProfile {
    pub fn new(samples: Vec<Sample>, nominal_capacity_ah: f64) -> Result<Self> {
        check_capacity(nominal_capacity_ah)?;
        let first = samples.first().ok_or(SpmError::Empty("current profile"))?;
        if first.time != 0.0 {
            return Err(SpmError::InvalidProfile(format!(
                "first timestamp must be 0, got {}",
                first.time
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            if !s.time.is_finite() || !s.current.is_finite() {
                return Err(SpmError::InvalidProfile(format!("non-finite sample at index {k}")));
            }
        }
        if let Some(k) = samples.windows(2).position(|w| w[1].time <= w[0].time) {
            return Err(SpmError::InvalidProfile(format!(
                "timestamps must be strictly increasing (index {} at t = {})",
                k + 1,
                samples[k + 1].time
            )));
        }
        Ok(Self { samples, nominal_capacity_ah })
    }

    fn from_grid(step: f64, currents: Vec<f64>, capacity_ah: f64) -> Result<Self> {
        let samples = currents
            .into_iter()
            .enumerate()
            .map(|(k, current)| Sample { time: k as f64 * step, current })
            .collect();
        Self::new(samples, capacity_ah)
    }

    /// Constant discharge at `c_rate * capacity`.
    pub fn constant_current(c_rate: f64, capacity_ah: f64, duration: f64, step: f64) -> Result<Self> {
        if !(c_rate.is_finite() && c_rate > 0.0) {
            return Err(SpmError::InvalidArgument(format!("c_rate must be positive, got {c_rate}")));
        }
        check_capacity(capacity_ah)?;
        let n = check_grid(duration, step)?;
        Self::from_grid(step, vec![c_rate * capacity_ah; n], capacity_ah)
    }

    /// Repeating piecewise-constant pulse pattern in the style of a dynamic
    /// stress test: discharge pulses up to 2C, rests, and charge pulses down
    /// to -1C, each held for at least 8 s. Every charge pulse returns at most
    /// half of the charge drawn by the discharge pulse before it, so each
    /// period is net discharging. Charging starts only once
    /// [`CHARGE_HEADROOM`] of the capacity has been drawn.
    pub fn pulse(seed: u64, capacity_ah: f64, duration: f64, step: f64) -> Result<Self> {
        check_capacity(capacity_ah)?;
        let n = check_grid(duration, step)?;
        let period = pulse_period(seed, capacity_ah, step);
        let mut currents: Vec<f64> = period.iter().copied().cycle().take(n).collect();
        limit_charging(&mut currents, capacity_ah, step);
        Self::from_grid(step, currents, capacity_ah)
    }

    /// Rapidly fluctuating band-limited current in the style of a vehicle
    /// drive cycle: a fast and a slow first-order filtered noise around a
    /// 0.5C mean, clamped to [-1C, 2C]. The level may change every step.
    /// Charging is limited as in [`CurrentProfile::pulse`].
    pub fn fluctuating(seed: u64, capacity_ah: f64, duration: f64, step: f64) -> Result<Self> {
        check_capacity(capacity_ah)?;
        let n = check_grid(duration, step)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let one_c = capacity_ah;
        let fast = (-step / 4.0f64).exp();
        let slow = (-step / 90.0f64).exp();
        let (mut z_fast, mut z_slow) = (0.0f64, 0.0f64);
        let mut raw = Vec::with_capacity(n);
        for _ in 0..n {
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            z_fast = fast * z_fast + (1.0 - fast * fast).sqrt() * e1;
            z_slow = slow * z_slow + (1.0 - slow * slow).sqrt() * e2;
            raw.push(one_c * (0.5 + 0.55 * z_fast + 0.35 * z_slow));
        }
        let clamp = |v: f64| v.clamp(-one_c, 2.0 * one_c);
        let mut currents: Vec<f64> = raw.iter().map(|&v| clamp(v)).collect();
        // keep the series net discharging even for unlucky seeds
        let mean = currents.iter().sum::<f64>() / n as f64;
        if mean < 0.25 * one_c {
            let shift = 0.25 * one_c - mean;
            currents = raw.iter().map(|&v| clamp(v + shift)).collect();
        }
        limit_charging(&mut currents, one_c, step);
        Self::from_grid(step, currents, capacity_ah)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nominal_capacity_ah(&self) -> f64 {
        self.nominal_capacity_ah
    }

    pub fn with_capacity(mut self, capacity_ah: f64) -> Result<Self> {
        check_capacity(capacity_ah)?;
        self.nominal_capacity_ah = capacity_ah;
        Ok(self)
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Zero-order-hold current at time `t`.
    pub fn current_at(&self, t: f64) -> f64 {
        let idx = self.samples.partition_point(|s| s.time <= t);
        self.samples[idx.saturating_sub(1)].current
    }

    /// Charge drawn over the profile (A s), integrating the held current.
    pub fn net_charge(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].current * (w[1].time - w[0].time)).sum()
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,current_a")?;
        for s in &self.samples {
            writeln!(w, "{},{}", s.time, s.current)?;
        }
        Ok(())
    }

    /// Load a `time_s,current_a` CSV; the nominal capacity defaults to 2.9 Ah.
    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SpmError::Csv { line: 1, message: e.to_string() })?
            .clone();
        if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "current_a" {
            return Err(SpmError::Csv {
                line: 1,
                message: format!("expected header `time_s,current_a`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SpmError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .ok_or_else(|| SpmError::Csv { line, message: format!("missing column {}", i + 1) })?
                    .parse::<f64>()
                    .map_err(|e| SpmError::Csv { line, message: e.to_string() })
            };
            if record.len() != 2 {
                return Err(SpmError::Csv { line, message: format!("expected 2 columns, got {}", record.len()) });
            }
            let time = field(0)?;
            let current = field(1)?;
            if let Some(prev) = samples.last() {
                let prev: &Sample = prev;
                if time <= prev.time {
                    return Err(SpmError::Csv {
                        line,
                        message: format!("time {time} does not increase past {}", prev.time),
                    });
                }
            }
            samples.push(Sample { time, current });
        }
        if samples.is_empty() {
            return Err(SpmError::Empty("csv profile has no samples"));
        }
        Self::new(samples, DEFAULT_CAPACITY_AH)
    }
}

/// Fraction of the capacity that must have been drawn before a dynamic
/// profile may charge. Profiles start from a full cell.
pub const CHARGE_HEADROOM: f64 = 0.05;

/// Replace charge samples by rest wherever they would push the net drawn
/// charge below [`CHARGE_HEADROOM`] of the capacity.
fn limit_charging(currents: &mut [f64], one_c: f64, step: f64) {
    let floor = CHARGE_HEADROOM * one_c * 3600.0;
    let mut drawn = 0.0;
    for c in currents.iter_mut() {
        if *c < 0.0 && drawn + *c * step < floor {
            *c = 0.0;
        }
        drawn += *c * step;
    }
}

/// One period of the pulse pattern, on the step grid.
fn pulse_period(seed: u64, one_c: f64, step: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_steps = (PULSE_MIN_DWELL / step).ceil().max(1.0) as usize;
    let period_steps = ((PULSE_PERIOD / step).round() as usize).max(4 * min_steps);
    let dwell = |rng: &mut ChaCha8Rng| min_steps * rng.gen_range(1..=4usize);
    let mut out = Vec::with_capacity(period_steps + 8 * min_steps);
    while out.len() < period_steps {
        let d_steps = dwell(&mut rng);
        let d_level = one_c * rng.gen_range(0.25..=2.0);
        out.extend(std::iter::repeat_n(d_level, d_steps));
        if rng.gen_bool(0.4) {
            out.extend(std::iter::repeat_n(0.0, dwell(&mut rng)));
        }
        if rng.gen_bool(0.5) {
            let c_steps = dwell(&mut rng);
            let cap = 0.5 * d_level * d_steps as f64 / c_steps as f64;
            let c_level = -(one_c * rng.gen_range(0.25..=1.0)).min(cap);
            out.extend(std::iter::repeat_n(c_level, c_steps));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_current_grid() {
        let p = CurrentProfile::constant_current(1.0, 2.9, 3600.0, 1.0).unwrap();
        assert_eq!(p.len(), 3601);
        assert!(p.samples().iter().all(|s| s.current == 2.9));
        assert_eq!(p.end_time(), 3600.0);
        let half = CurrentProfile::constant_current(0.5, 2.9, 10.0, 1.0).unwrap();
        assert_eq!(half.samples()[0].current, 1.45);
        let three = CurrentProfile::constant_current(3.0, 2.9, 10.0, 1.0).unwrap();
        assert!((three.samples()[0].current - 8.7).abs() < 1e-15);
    }

    #[test]
    fn constant_current_rejects_bad_arguments() {
        assert!(CurrentProfile::constant_current(1.0, 2.9, 10.0, 0.0).is_err());
        assert!(CurrentProfile::constant_current(1.0, 2.9, -1.0, 1.0).is_err());
        assert!(CurrentProfile::constant_current(0.0, 2.9, 10.0, 1.0).is_err());
    }

    /// Lengths of the runs of equal consecutive values.
    fn runs(values: &[f64]) -> Vec<usize> {
        let mut out = vec![];
        let mut len = 1;
        for w in values.windows(2) {
            if w[0] == w[1] {
                len += 1;
            } else {
                out.push(len);
                len = 1;
            }
        }
        out.push(len);
        out
    }

    #[test]
    fn pulse_profile_shape() {
        let mut any_charge = false;
        for seed in 0..20 {
            let p = CurrentProfile::pulse(seed, 2.9, 3600.0, 1.0).unwrap();
            assert_eq!(p, CurrentProfile::pulse(seed, 2.9, 3600.0, 1.0).unwrap());
            let currents: Vec<f64> = p.samples().iter().map(|s| s.current).collect();
            assert!(currents.iter().all(|&c| (-2.9..=5.8).contains(&c)));
            let period = pulse_period(seed, 2.9, 1.0);
            let net: f64 = period.iter().sum();
            assert!(net > 0.0, "seed {seed}");
            let r = runs(&period);
            // interior runs hold for at least the minimum dwell
            assert!(r.iter().all(|&n| n >= 8), "seed {seed}: {r:?}");
            any_charge |= currents.iter().any(|&c| c < 0.0);
            assert_headroom(&p);
        }
        assert!(any_charge);
    }

    fn assert_headroom(p: &CurrentProfile) {
        let mut drawn = 0.0;
        for s in p.samples() {
            drawn += s.current;
            if s.current < 0.0 {
                assert!(drawn >= CHARGE_HEADROOM * 2.9 * 3600.0 - 1e-9);
            }
        }
    }

    #[test]
    fn fluctuating_profile_shape() {
        for seed in 0..20 {
            let p = CurrentProfile::fluctuating(seed, 2.9, 3600.0, 1.0).unwrap();
            assert_eq!(p, CurrentProfile::fluctuating(seed, 2.9, 3600.0, 1.0).unwrap());
            let c: Vec<f64> = p.samples().iter().map(|s| s.current).collect();
            assert!(c.iter().all(|&v| (-2.9..=5.8).contains(&v)));
            assert!(p.net_charge() > 0.0);
            assert_headroom(&p);
            let changes = c.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(changes > c.len() / 2, "fluctuates every few steps");
        }
        assert_ne!(
            CurrentProfile::fluctuating(1, 2.9, 100.0, 1.0).unwrap(),
            CurrentProfile::fluctuating(2, 2.9, 100.0, 1.0).unwrap()
        );
    }

    #[test]
    fn zero_order_hold_lookup() {
        let p = CurrentProfile::new(
            vec![Sample { time: 0.0, current: 1.0 }, Sample { time: 5.0, current: -2.0 }],
            2.9,
        )
        .unwrap();
        assert_eq!(p.current_at(0.0), 1.0);
        assert_eq!(p.current_at(4.999), 1.0);
        assert_eq!(p.current_at(5.0), -2.0);
        assert_eq!(p.current_at(100.0), -2.0);
    }

    #[test]
    fn csv_errors() {
        let header_only = "time_s,current_a\n";
        assert!(matches!(CurrentProfile::read_csv(header_only.as_bytes()), Err(SpmError::Empty(_))));
        let non_monotone = "time_s,current_a\n0,1\n1,1\n1,2\n";
        match CurrentProfile::read_csv(non_monotone.as_bytes()) {
            Err(SpmError::Csv { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let garbage = "time_s,current_a\n0,1\n1,abc\n";
        match CurrentProfile::read_csv(garbage.as_bytes()) {
            Err(SpmError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let wrong_header = "t,i\n0,1\n";
        assert!(CurrentProfile::read_csv(wrong_header.as_bytes()).is_err());
        let late_start = "time_s,current_a\n1,1\n2,1\n";
        assert!(CurrentProfile::read_csv(late_start.as_bytes()).is_err());
    }

    #[test]
    fn csv_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = CurrentProfile::pulse(7, 2.9, 900.0, 1.0).unwrap();
        p.save_csv(&path).unwrap();
        assert_eq!(CurrentProfile::load_csv(&path).unwrap(), p);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(seed in 0u64..1000, step in 0.1f64..3.0) {
            let p = CurrentProfile::fluctuating(seed, 2.9, 60.0, step).unwrap();
            let mut buf = Vec::new();
            p.write_csv(&mut buf).unwrap();
            prop_assert_eq!(CurrentProfile::read_csv(buf.as_slice()).unwrap(), p);
        }
    }
}

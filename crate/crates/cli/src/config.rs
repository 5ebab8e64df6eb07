//! Run configuration, read from TOML. Every section is optional; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spm_core::estimation::{FixedValues, Mode, PsoConfig, SwarmSettings};
use spm_core::sensitivity::ParameterSpace;
use spm_core::{CurrentProfile, FullParameters, GroupedParameters, PhysicalConstants};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub out: PathBuf,
    /// Integration step, s.
    pub step: f64,
    /// Cutoff voltage, V.
    pub cutoff: f64,
    /// Nominal capacity used for C-rates, Ah.
    pub capacity_ah: f64,
    pub constants: PhysicalConstants,
    pub model: ModelSpec,
    pub profile: ProfileSpec,
    pub verify: VerifySettings,
    pub sensitivity: SensitivitySettings,
    pub estimation: EstimationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            jobs: 0,
            out: PathBuf::from("out"),
            step: 1.0,
            cutoff: 2.5,
            capacity_ah: 2.9,
            constants: PhysicalConstants::default(),
            model: ModelSpec::default(),
            profile: ProfileSpec::default(),
            verify: VerifySettings::default(),
            sensitivity: SensitivitySettings::default(),
            estimation: EstimationSettings::default(),
        }
    }
}

/// Model parameters, grouped or physical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Grouped(GroupedParameters),
    Full(FullParameters),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Grouped(GroupedParameters::nominal())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    ConstantCurrent { c_rate: f64, duration: f64 },
    Pulse { seed: u64, duration: f64 },
    Fluctuating { seed: u64, duration: f64 },
    /// `time_s,current_a` file.
    Csv { path: PathBuf },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::ConstantCurrent { c_rate: 1.0, duration: 3600.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    /// Physical parameters for the grouped/ungrouped comparison; the
    /// built-in example set when absent.
    pub full: Option<FullParameters>,
    /// Factor applied to the grouped alpha_p only. Anything but 1 breaks
    /// the grouping on purpose.
    pub alpha_p_scale: f64,
    pub voltage_tolerance: f64,
    pub concentration_tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { full: None, alpha_p_scale: 1.0, voltage_tolerance: 1e-9, concentration_tolerance: 1e-10 }
    }
}

pub const SCENARIO_NAMES: [&str; 7] = ["0.2C", "0.33C", "0.5C", "1C", "3C", "pulse", "fluctuating"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySettings {
    pub n_base: usize,
    pub threshold: f64,
    /// Seed of the synthetic pulse and fluctuating profiles.
    pub profile_seed: u64,
    pub scenarios: Vec<String>,
    pub bounds: ParameterSpace,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        Self {
            n_base: 1024,
            threshold: 0.05,
            profile_seed: 7,
            scenarios: SCENARIO_NAMES.iter().map(|s| s.to_string()).collect(),
            bounds: ParameterSpace::literature_ranges(),
        }
    }
}

/// Where the estimation's measured voltage comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    /// The model parameters with the reduced-mode fixed values filled in.
    FixedValues,
    /// The model parameters as configured.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationSettings {
    pub mode: Mode,
    pub repeats: usize,
    pub swarm: SwarmSettings,
    pub fixed_values: FixedValues,
    pub bounds: ParameterSpace,
    pub c_rate: f64,
    pub duration: f64,
    pub truth: TruthSpec,
    /// Add seeded Gaussian noise of `noise_sigma` volts to the synthetic
    /// measurement.
    pub noise: bool,
    pub noise_sigma: f64,
    /// Measured `time_s,voltage_v` file on the profile grid; replaces the
    /// synthetic measurement.
    pub measured_csv: Option<PathBuf>,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            mode: Mode::High6,
            repeats: 10,
            swarm: SwarmSettings::default(),
            fixed_values: FixedValues::default(),
            bounds: ParameterSpace::literature_ranges(),
            c_rate: 0.5,
            duration: 3.0 * 3600.0,
            truth: TruthSpec::FixedValues,
            noise: false,
            noise_sigma: 0.002,
            measured_csv: None,
        }
    }
}

/// Command-line values that override config keys of the same name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(out) = &o.out {
            self.out.clone_from(out);
        }
        if let Some(m) = o.mode {
            self.estimation.mode = m;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !self.cutoff.is_finite() {
            return bad(format!("cutoff must be finite, got {}", self.cutoff));
        }
        if !(self.capacity_ah.is_finite() && self.capacity_ah > 0.0) {
            return bad(format!("capacity_ah must be positive, got {}", self.capacity_ah));
        }
        self.constants.validate().map_err(config_err)?;
        match &self.model {
            ModelSpec::Grouped(p) => p.validate().map_err(config_err)?,
            ModelSpec::Full(p) => p.validate().map_err(config_err)?,
        }
        if let Some(f) = &self.verify.full {
            f.validate().map_err(config_err)?;
        }
        if !(self.verify.alpha_p_scale.is_finite() && self.verify.alpha_p_scale > 0.0) {
            return bad("verify.alpha_p_scale must be positive".into());
        }
        let s = &self.sensitivity;
        if s.n_base < 2 || !s.n_base.is_power_of_two() {
            return bad(format!("sensitivity.n_base must be a power of two >= 2, got {}", s.n_base));
        }
        if !(0.0..=1.0).contains(&s.threshold) {
            return bad(format!("sensitivity.threshold must lie in [0, 1], got {}", s.threshold));
        }
        if s.scenarios.is_empty() {
            return bad("sensitivity.scenarios is empty".into());
        }
        if let Some(name) = s.scenarios.iter().find(|n| !SCENARIO_NAMES.contains(&n.as_str())) {
            return bad(format!("unknown scenario {name:?}; known: {}", SCENARIO_NAMES.join(", ")));
        }
        s.bounds.validate().map_err(config_err)?;
        let e = &self.estimation;
        if e.repeats == 0 {
            return bad("estimation.repeats must be >= 1".into());
        }
        if !(e.c_rate.is_finite() && e.c_rate > 0.0 && e.duration.is_finite() && e.duration > 0.0) {
            return bad("estimation.c_rate and estimation.duration must be positive".into());
        }
        if !(e.noise_sigma.is_finite() && e.noise_sigma >= 0.0) {
            return bad("estimation.noise_sigma must be >= 0".into());
        }
        self.pso_config().validate().map_err(config_err)?;
        Ok(())
    }

    pub fn grouped_params(&self) -> GroupedParameters {
        match &self.model {
            ModelSpec::Grouped(p) => *p,
            ModelSpec::Full(f) => spm_core::group_parameters(f, &self.constants),
        }
    }

    pub fn build_profile(&self) -> Result<CurrentProfile, CliError> {
        let cap = self.capacity_ah;
        let p = match &self.profile {
            ProfileSpec::ConstantCurrent { c_rate, duration } => {
                CurrentProfile::constant_current(*c_rate, cap, *duration, self.step)
            }
            ProfileSpec::Pulse { seed, duration } => CurrentProfile::pulse(*seed, cap, *duration, self.step),
            ProfileSpec::Fluctuating { seed, duration } => {
                CurrentProfile::fluctuating(*seed, cap, *duration, self.step)
            }
            ProfileSpec::Csv { path } => CurrentProfile::load_csv(path).and_then(|p| p.with_capacity(cap)),
        };
        p.map_err(config_err)
    }

    pub fn pso_config(&self) -> PsoConfig {
        PsoConfig {
            swarm: self.estimation.swarm,
            seed: self.seed,
            bounds: self.estimation.bounds.clone(),
            mode: self.estimation.mode,
            fixed: self.estimation.fixed_values,
        }
    }

    /// Canonical JSON of the effective configuration, without the keys
    /// that cannot change results (`out`, `jobs`).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.jobs = 0;
        serde_json::to_string(&c).expect("config serializes")
    }
}

fn config_err(e: spm_core::SpmError) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 3
            step = 0.5
            [profile]
            kind = "pulse"
            seed = 9
            duration = 600.0
            [model.grouped]
            alpha_n = 1000.0
            alpha_p = 500.0
            q_n = 10000.0
            q_p = 11000.0
            d_n = 1e-4
            d_p = 2e-4
            soc_n0 = 0.85
            soc_p0 = 0.05
            r0 = 0.01
            [estimation]
            mode = "full9"
            repeats = 2
            [estimation.swarm]
            swarm_size = 10
            [estimation.fixed_values]
            alpha_p = 1000.0
            d_n = 6e-5
            d_p = 4e-4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.profile, ProfileSpec::Pulse { seed: 9, duration: 600.0 });
        assert_eq!(cfg.grouped_params().alpha_n, 1000.0);
        assert_eq!(cfg.estimation.mode, Mode::Full9);
        assert_eq!(cfg.estimation.swarm.swarm_size, 10);
        assert_eq!(cfg.estimation.swarm.max_iterations, 500);
        assert_eq!(cfg.estimation.fixed_values.d_n, 6e-5);
        assert_eq!(cfg.build_profile().unwrap().len(), 1201);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "sed = 1",
            "[profile]\nkind = \"constant_current\"\nc_rate = 1.0\nduration = 10.0\nextra = 1",
            "[estimation]\nrepeat = 3",
            "[estimation.swarm]\nparticles = 3",
            "[model.grouped]\nalpha = 1.0",
            "[sensitivity]\nnbase = 8",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "step = 0.0",
            "[sensitivity]\nn_base = 1000",
            "[sensitivity]\nthreshold = 2.0",
            "[sensitivity]\nscenarios = [\"7C\"]",
            "[estimation]\nrepeats = 0",
            "[estimation.swarm]\nswarm_size = 1",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_mirror_keys() {
        let o = Overrides { seed: Some(5), jobs: Some(2), out: Some("x".into()), mode: Some(Mode::Full9) };
        let cfg = RunConfig::default().apply(&o).unwrap();
        assert_eq!((cfg.seed, cfg.jobs, cfg.out.as_path(), cfg.estimation.mode), (5, 2, Path::new("x"), Mode::Full9));
        assert_eq!(cfg.pso_config().seed, 5);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}

//! `spm` command-line front end: configuration, subcommands and their
//! output files.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spm_core::analysis::{build_report, rank_report, ReportInputs};
use spm_core::estimation::{
    make_objective, repeated_estimation, synthetic_measurement, write_trace_csv, EstimationSummary,
    FixedValues, Mode,
};
use spm_core::sensitivity::{
    default_scenarios, indices_for, ishigami, ishigami_total_indices, run_sensitivity, sample_matrices, screen,
    write_indices_csv, Screening, SobolIndices,
};
use spm_core::sim::{compare_models, Condition, Deviation};
use spm_core::{
    group_parameters, multi_condition_rmse, simulate, BoundExit, CurrentProfile, Electrode, FullParameters,
    GroupedModel, GroupedParameters, PregroupedModel, SpmError, Termination,
};

use config::{ModelSpec, Overrides, RunConfig, TruthSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(#[from] SpmError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Io(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spm", version, about = "Grouped single particle model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Estimation mode.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// With `sensitivity`: check the estimator on the Ishigami function.
    #[arg(long, global = true)]
    pub self_test: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("expected full9 or high6, got {s:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate the grouped model over the configured profile.
    Simulate,
    /// Compare grouped and ungrouped models step by step.
    Verify,
    /// Total Sobol indices of the grouped parameters.
    Sensitivity,
    /// Repeated particle swarm estimation.
    Estimate,
    /// Assemble the report bundle from earlier outputs.
    Report,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Sensitivity => "sensitivity",
            Command::Estimate => "estimate",
            Command::Report => "report",
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    base.apply(&Overrides { seed: cli.seed, jobs: cli.jobs, out: cli.out.clone(), mode: cli.mode })
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse the configuration, size the worker pool and run the command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_command(cli.command, &cfg, cli.self_test))
}

pub fn run_command(command: Command, cfg: &RunConfig, self_test: bool) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)?;
    let files = match command {
        Command::Simulate => cmd_simulate(cfg)?,
        Command::Verify => cmd_verify(cfg)?,
        Command::Sensitivity if self_test => cmd_self_test(cfg)?,
        Command::Sensitivity => cmd_sensitivity(cfg)?,
        Command::Estimate => cmd_estimate(cfg)?,
        Command::Report => cmd_report(cfg)?,
    };
    let manifest = RunManifest {
        command: command.as_str().to_string(),
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        version: VERSION.to_string(),
        files,
    };
    write_json(&cfg.out.join(format!("manifest_{}.json", command.as_str())), &manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub files: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(SpmError::from)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub params: GroupedParameters,
    pub samples: usize,
    pub end_time: f64,
    pub final_voltage: f64,
    pub min_voltage: f64,
    pub terminated_by: Termination,
    pub bound_exit: Option<BoundExit>,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let params = cfg.grouped_params();
    let profile = cfg.build_profile()?;
    let model = GroupedModel::new(params, cfg.constants)?;
    let r = simulate(&model, &profile, cfg.cutoff, cfg.step)?;
    if r.is_empty() {
        return Err(SpmError::Empty("simulation produced no samples").into());
    }
    r.save_csv(cfg.out.join("simulation.csv"))?;
    let summary = SimulationSummary {
        params,
        samples: r.len(),
        end_time: *r.time.last().unwrap_or(&0.0),
        final_voltage: *r.voltage.last().unwrap_or(&f64::NAN),
        min_voltage: r.voltage.iter().copied().fold(f64::INFINITY, f64::min),
        terminated_by: r.terminated_by,
        bound_exit: r.bound_exit,
    };
    write_json(&cfg.out.join("simulation.json"), &summary)?;
    println!(
        "simulated {} samples to t = {} s, terminated_by = {}, final voltage {:.6} V",
        summary.samples,
        summary.end_time,
        summary.terminated_by.as_str(),
        summary.final_voltage
    );
    Ok(vec!["simulation.csv".into(), "simulation.json".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub full: FullParameters,
    pub alpha_p_scale: f64,
    pub deviation: Deviation,
    pub voltage_tolerance: f64,
    pub concentration_tolerance: f64,
    pub pass: bool,
}

fn cmd_verify(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let full = match (&cfg.model, &cfg.verify.full) {
        (_, Some(f)) => *f,
        (ModelSpec::Full(f), None) => *f,
        (ModelSpec::Grouped(_), None) => FullParameters::example(),
    };
    let profile = cfg.build_profile()?;
    let mut grouped = group_parameters(&full, &cfg.constants);
    grouped.alpha_p *= cfg.verify.alpha_p_scale;
    let g = GroupedModel::new(grouped, cfg.constants)?;
    let p = PregroupedModel::new(full, cfg.constants)?;
    let deviation = compare_models(&g, &p, &profile, cfg.cutoff, cfg.step)?;
    let v = &cfg.verify;
    let pass = deviation.within(v.voltage_tolerance, v.concentration_tolerance);
    let report = VerifyReport {
        full,
        alpha_p_scale: v.alpha_p_scale,
        deviation,
        voltage_tolerance: v.voltage_tolerance,
        concentration_tolerance: v.concentration_tolerance,
        pass,
    };
    write_json(&cfg.out.join("verify.json"), &report)?;
    println!("max voltage deviation: {:e} V (tolerance {:e})", deviation.max_voltage, v.voltage_tolerance);
    println!(
        "max normalized concentration deviation: {:e} (tolerance {:e})",
        deviation.max_concentration, v.concentration_tolerance
    );
    println!("samples: grouped {}, ungrouped {}", deviation.samples_left, deviation.samples_right);
    if pass {
        println!("verify: pass");
        Ok(vec!["verify.json".into()])
    } else {
        Err(CliError::CheckFailed("grouped and ungrouped models differ beyond tolerance".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub n_base: usize,
    pub estimated: Vec<f64>,
    pub analytic: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerance of the Ishigami self-test on each total index.
pub const SELF_TEST_TOLERANCE: f64 = 0.05;

fn cmd_self_test(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let pi = std::f64::consts::PI;
    let samples = sample_matrices(&[(-pi, pi); 3], cfg.sensitivity.n_base, cfg.seed)?;
    let names: Vec<String> = ["x1", "x2", "x3"].iter().map(|s| s.to_string()).collect();
    let idx = indices_for(&names, &samples, |x| ishigami(x, 7.0, 0.1))?;
    let analytic = ishigami_total_indices(7.0, 0.1).to_vec();
    let pass = idx.s_total.iter().zip(&analytic).all(|(e, a)| (e - a).abs() <= SELF_TEST_TOLERANCE);
    for ((n, e), a) in names.iter().zip(&idx.s_total).zip(&analytic) {
        println!("{n}: S_T = {e:.4} (analytic {a:.4})");
    }
    let report =
        SelfTestReport { n_base: idx.base_sample_count, estimated: idx.s_total, analytic, tolerance: SELF_TEST_TOLERANCE, pass };
    write_json(&cfg.out.join("self_test.json"), &report)?;
    if pass {
        println!("self-test: pass");
        Ok(vec!["self_test.json".into()])
    } else {
        Err(CliError::CheckFailed("Ishigami indices outside tolerance".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub n_base: usize,
    pub seed: u64,
    pub reference_params: GroupedParameters,
    pub scenarios: Vec<(String, SobolIndices)>,
    pub screening: Screening,
}

fn cmd_sensitivity(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let s = &cfg.sensitivity;
    let reference = cfg.grouped_params();
    let scenarios: Vec<_> =
        default_scenarios(&reference, cfg.constants, cfg.capacity_ah, cfg.cutoff, cfg.step, s.profile_seed)?
            .into_iter()
            .filter(|sc| s.scenarios.contains(&sc.name))
            .collect();
    let space = s.bounds.clone().with_base(reference);
    let results = run_sensitivity(&space, &scenarios, s.n_base, cfg.seed)?;
    let indices: Vec<SobolIndices> = results.iter().map(|r| r.1.clone()).collect();
    let screening = screen(&indices, s.threshold)?;
    let mut csv = Vec::new();
    write_indices_csv(&mut csv, &results)?;
    fs::write(cfg.out.join("sensitivity.csv"), csv)?;
    for (name, idx) in &results {
        let cells: Vec<String> =
            idx.names.iter().zip(&idx.s_total).map(|(n, v)| format!("{n}={v:.4}")).collect();
        println!("{name}: {}", cells.join(" "));
        if !idx.out_of_range.is_empty() {
            println!("  outside [0, 1]: {}", idx.out_of_range.join(", "));
        }
        if !idx.penalized.is_empty() {
            println!("  penalized samples: {}", idx.penalized.len());
        }
    }
    println!("high sensitivity: {}", screening.high.join(", "));
    println!("low sensitivity: {}", screening.low.join(", "));
    let record = SensitivityRecord { n_base: s.n_base, seed: cfg.seed, reference_params: reference, scenarios: results, screening };
    write_json(&cfg.out.join("sensitivity.json"), &record)?;
    Ok(vec!["sensitivity.csv".into(), "sensitivity.json".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    /// Parameters of the synthetic measurement; absent for measured data.
    pub truth: Option<GroupedParameters>,
    pub fixed_values: FixedValues,
    pub noise_sigma: Option<f64>,
    pub summary: EstimationSummary,
}

fn read_measured(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "voltage_v"] {
        return Err(CliError::Config(format!("{}: expected header time_s,voltage_v", path.display())));
    }
    let mut out = vec![];
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("{}: bad voltage {:?}: {e}", path.display(), &rec[1])))?;
        out.push(v);
    }
    Ok(out)
}

fn estimation_profile(cfg: &RunConfig) -> Result<CurrentProfile, CliError> {
    let e = &cfg.estimation;
    Ok(CurrentProfile::constant_current(e.c_rate, cfg.capacity_ah, e.duration, cfg.step)?)
}

fn estimation_truth(cfg: &RunConfig) -> GroupedParameters {
    match cfg.estimation.truth {
        TruthSpec::FixedValues => cfg.estimation.fixed_values.apply(cfg.grouped_params()),
        TruthSpec::Model => cfg.grouped_params(),
    }
}

pub fn estimation_file(mode: Mode) -> String {
    format!("estimation_{mode}.json")
}

fn cmd_estimate(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let e = &cfg.estimation;
    let profile = estimation_profile(cfg)?;
    let measured = match &e.measured_csv {
        Some(path) => Some(read_measured(path)?),
        None => None,
    };
    let truth = estimation_truth(cfg);
    let sigma = if e.noise { e.noise_sigma } else { 0.0 };
    let factory = |seed: u64| {
        let trace = match &measured {
            Some(m) => m.clone(),
            None => synthetic_measurement(&truth, cfg.constants, &profile, cfg.cutoff, cfg.step, sigma, seed)?,
        };
        make_objective(profile.clone(), trace, cfg.cutoff, cfg.step, e.mode, e.fixed_values, &e.bounds, cfg.constants)
    };
    let summary = repeated_estimation(factory, &cfg.pso_config(), e.repeats)?;
    println!(
        "{} over {} runs: mean {:.6} V, std {:.6} V, min {:.6} V, max {:.6} V",
        e.mode,
        summary.runs.len(),
        summary.mean_cost,
        summary.std_cost,
        summary.min_cost,
        summary.max_cost
    );
    let trace_file = format!("convergence_{}.csv", e.mode);
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &summary.mean_trace)?;
    fs::write(cfg.out.join(&trace_file), buf)?;
    let record = EstimationRecord {
        truth: measured.is_none().then_some(truth),
        fixed_values: e.fixed_values,
        noise_sigma: (measured.is_none() && e.noise).then_some(sigma),
        summary,
    };
    let file = estimation_file(e.mode);
    write_json(&cfg.out.join(&file), &record)?;
    Ok(vec![trace_file, file])
}

/// Constant-current conditions of the RMSE table.
pub const RMSE_CONDITIONS: [(&str, f64); 5] = [("0.2C", 0.2), ("0.33C", 0.33), ("0.5C", 0.5), ("1C", 1.0), ("3C", 3.0)];

fn cmd_report(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let mut inputs = ReportInputs::default();
    let params = cfg.grouped_params();
    for e in Electrode::BOTH {
        inputs.ranks.push(rank_report(&params, e)?);
    }
    let sens = cfg.out.join("sensitivity.json");
    if sens.exists() {
        let record: SensitivityRecord = read_json(&sens)?;
        inputs.sensitivity = record.scenarios;
    }
    let mut records = vec![];
    for mode in [Mode::High6, Mode::Full9] {
        let path = cfg.out.join(estimation_file(mode));
        if path.exists() {
            records.push(read_json::<EstimationRecord>(&path)?);
        }
    }
    if let Some(first) = records.first() {
        inputs.fixed_values = Some(first.fixed_values);
        if let Some(truth) = first.truth {
            let best = first
                .summary
                .runs
                .iter()
                .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
                .ok_or(SpmError::Empty("estimation runs"))?;
            let mut conditions = vec![];
            for (name, c_rate) in RMSE_CONDITIONS {
                let profile = CurrentProfile::constant_current(c_rate, cfg.capacity_ah, 1.5 * 3600.0 / c_rate, cfg.step)?;
                let measured = synthetic_measurement(&truth, cfg.constants, &profile, cfg.cutoff, cfg.step, 0.0, 0)?;
                conditions.push(Condition { name: name.into(), profile, measured });
            }
            inputs.rmse = Some(multi_condition_rmse(&best.best_params, &cfg.constants, &conditions, cfg.cutoff, cfg.step)?);
        }
    }
    inputs.estimations = records.into_iter().map(|r| r.summary).collect();
    inputs.metadata = BTreeMap::from([
        ("config_sha256".to_string(), config_hash(cfg)),
        ("seed".to_string(), cfg.seed.to_string()),
        ("version".to_string(), VERSION.to_string()),
    ]);
    let report = build_report(&inputs)?;
    let dir = cfg.out.join("report");
    report.write_to(&dir)?;
    println!("report written to {}: {}", dir.display(), report.manifest.files.join(", "));
    Ok(report.files.keys().map(|k| format!("report/{k}")).collect())
}

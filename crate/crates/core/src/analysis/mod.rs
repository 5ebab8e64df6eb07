//! Structural checks on the grouped model and the report bundle.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpmError};
use crate::estimation::{EstimationSummary, FixedValues};
use crate::model::{Electrode, ElectrodeMatrices, GroupedParameters};
use crate::sensitivity::{write_indices_csv, SobolIndices};
use crate::sim::MultiConditionRmse;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub electrode: Electrode,
    /// `[C; C A]`, 4x2, row-major.
    pub observability_matrix: [[f64; 2]; 4],
    /// `[B, A B]`, 2x2, row-major.
    pub controllability_matrix: [[f64; 2]; 2],
    pub rank_obs: usize,
    pub rank_ctrl: usize,
}

fn electrode_matrices(params: &GroupedParameters, electrode: Electrode) -> Result<ElectrodeMatrices> {
    let alpha = params.alpha(electrode);
    let q = params.capacity(electrode);
    for (name, v) in [("alpha", alpha), ("capacity", q)] {
        if v == 0.0 || !v.is_finite() {
            return Err(SpmError::Degenerate(format!("{} {name} is {v}", electrode.as_str())));
        }
    }
    Ok(ElectrodeMatrices::new(alpha, q))
}

/// Count of singular values above `RANK_TOLERANCE * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Observability matrix of one electrode and its numeric rank.
pub fn observability_check(params: &GroupedParameters, electrode: Electrode) -> Result<([[f64; 2]; 4], usize)> {
    let m = electrode_matrices(params, electrode)?;
    let (a, c) = (m.a, m.c);
    let ca = |i: usize, j: usize| c[i][0] * a[0][j] + c[i][1] * a[1][j];
    let o = [c[0], c[1], [ca(0, 0), ca(0, 1)], [ca(1, 0), ca(1, 1)]];
    let rank = numeric_rank(&DMatrix::from_fn(4, 2, |i, j| o[i][j]));
    Ok((o, rank))
}

/// Controllability matrix of one electrode and its numeric rank.
pub fn controllability_check(params: &GroupedParameters, electrode: Electrode) -> Result<([[f64; 2]; 2], usize)> {
    let m = electrode_matrices(params, electrode)?;
    let (a, b) = (m.a, m.b);
    let ab = [a[0][0] * b[0] + a[0][1] * b[1], a[1][0] * b[0] + a[1][1] * b[1]];
    let ctrl = [[b[0], ab[0]], [b[1], ab[1]]];
    let rank = numeric_rank(&DMatrix::from_fn(2, 2, |i, j| ctrl[i][j]));
    Ok((ctrl, rank))
}

pub fn rank_report(params: &GroupedParameters, electrode: Electrode) -> Result<RankReport> {
    let (observability_matrix, rank_obs) = observability_check(params, electrode)?;
    let (controllability_matrix, rank_ctrl) = controllability_check(params, electrode)?;
    Ok(RankReport { electrode, observability_matrix, controllability_matrix, rank_obs, rank_ctrl })
}

/// Inputs of a report. Empty sections are left out of the bundle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportInputs {
    pub rmse: Option<MultiConditionRmse>,
    pub sensitivity: Vec<(String, SobolIndices)>,
    pub estimations: Vec<EstimationSummary>,
    pub ranks: Vec<RankReport>,
    /// Fixed values used by any reduced-mode estimation.
    pub fixed_values: Option<FixedValues>,
    /// Free-form provenance (config hash, seed, tool version, ...).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub repeats: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<String>,
    pub fixed_values: Option<FixedValues>,
    pub estimation_summary: Vec<SummaryRow>,
    pub metadata: BTreeMap<String, String>,
}

/// In-memory report: file name to contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: BTreeMap<String, Vec<u8>>,
    pub manifest: Manifest,
}

pub fn build_report(inputs: &ReportInputs) -> Result<Report> {
    let mut files = BTreeMap::new();
    if let Some(r) = &inputs.rmse {
        let mut buf = Vec::new();
        writeln!(buf, "condition,rmse_v")?;
        for (name, v) in r.names.iter().zip(&r.per_condition) {
            writeln!(buf, "{name},{v}")?;
        }
        writeln!(buf, "mean,{}", r.mean)?;
        files.insert("rmse.csv".to_string(), buf);
    }
    if !inputs.sensitivity.is_empty() {
        let mut buf = Vec::new();
        write_indices_csv(&mut buf, &inputs.sensitivity)?;
        files.insert("sensitivity.csv".to_string(), buf);
    }
    if !inputs.estimations.is_empty() {
        let mut buf = Vec::new();
        writeln!(buf, "mode,series,iteration,best_cost_v")?;
        for s in &inputs.estimations {
            for (k, c) in s.mean_trace.iter().enumerate() {
                writeln!(buf, "{},mean,{},{c}", s.mode, k + 1)?;
            }
            for r in &s.runs {
                for (k, c) in r.cost_trace.iter().enumerate() {
                    writeln!(buf, "{},seed_{},{},{c}", s.mode, r.seed, k + 1)?;
                }
            }
        }
        files.insert("convergence.csv".to_string(), buf);
    }
    if !inputs.ranks.is_empty() {
        let mut buf = serde_json::to_vec_pretty(&inputs.ranks)?;
        buf.push(b'\n');
        files.insert("ranks.json".to_string(), buf);
    }
    if files.is_empty() {
        return Err(SpmError::Empty("report artifacts"));
    }
    let manifest = Manifest {
        files: files.keys().cloned().collect(),
        fixed_values: inputs.fixed_values,
        estimation_summary: inputs
            .estimations
            .iter()
            .map(|s| SummaryRow {
                mode: s.mode.to_string(),
                repeats: s.runs.len(),
                mean: s.mean_cost,
                std: s.std_cost,
                min: s.min_cost,
                max: s.max_cost,
            })
            .collect(),
        metadata: inputs.metadata.clone(),
    };
    let mut buf = serde_json::to_vec_pretty(&manifest)?;
    buf.push(b'\n');
    files.insert("manifest.json".to_string(), buf);
    Ok(Report { files, manifest })
}

impl Report {
    /// Write every file into `dir`, creating it if needed. Returns the
    /// written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = vec![];
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            out.push(path);
        }
        Ok(out)
    }
}

//! Rate-curve CSVs for the occupancy model at several ratios `p/q`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::joint::{JointLaw, Mark};
use crate::lattice::LatticeDistribution;
use crate::policy;
use crate::rates::{ldp_rate, RateCurve};
use crate::report::write_atomic;

pub const DEFAULT_RATIOS: [f64; 3] = [0.4, 1.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FigureJob {
    pub lambda: f64,
    pub ratios: Vec<f64>,
    /// `None` uses the default inset grid over `[0, 1]`.
    pub grid: Option<Vec<f64>>,
    pub out_dir: PathBuf,
}

/// Sidecar written next to each CSV, which itself holds only `y,rate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureMetadata {
    pub lambda: f64,
    pub ratio: f64,
    pub tau: f64,
    pub gibbs_point: f64,
    pub alpha2: f64,
    pub curvature_at_min: f64,
    pub grid_policy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub curve: RateCurve,
}

/// `rate_ratio_<r>.csv` with `r` in shortest round-trip form.
pub fn csv_name(ratio: f64) -> String {
    format!("rate_ratio_{ratio}.csv")
}

fn grid_policy(job: &FigureJob) -> String {
    match &job.grid {
        Some(g) => format!("user grid of {} points", g.len()),
        None => format!(
            "{} equispaced points on [{d}, 1 - {d}]",
            policy::DEFAULT_GRID_POINTS,
            d = policy::GRID_INSET
        ),
    }
}

pub fn figure_emit(job: &FigureJob) -> Result<Vec<FigureOutput>> {
    let law = JointLaw::marked(LatticeDistribution::poisson(job.lambda)?, Mark::IndicatorZero);
    std::fs::create_dir_all(&job.out_dir)?;
    let policy = grid_policy(job);
    job.ratios
        .par_iter()
        .map(|&ratio| {
            let curve = ldp_rate(&law, ratio, job.grid.as_deref())?;
            let csv = job.out_dir.join(csv_name(ratio));
            let metadata = csv.with_extension("json");
            write_atomic(&csv, curve.to_csv().as_bytes())?;
            let meta = FigureMetadata {
                lambda: job.lambda,
                ratio,
                tau: curve.tau,
                gibbs_point: curve.gibbs_point,
                alpha2: curve.alpha2,
                curvature_at_min: curve.curvature_at_min,
                grid_policy: policy.clone(),
            };
            let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
            write_atomic(&metadata, text.as_bytes())?;
            Ok(FigureOutput { csv, metadata, curve })
        })
        .collect()
}

/// Reads a `y,rate` CSV back; `inf` entries become `f64::INFINITY`.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|l| {
            let (y, r) = l
                .split_once(',')
                .ok_or_else(|| crate::Error::Io(format!("malformed line '{l}' in {}", path.display())))?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| crate::Error::Io(format!("'{s}' in {}: {e}", path.display())))
            };
            Ok((parse(y)?, parse(r)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_one_curve_per_ratio() {
        let dir = tempfile::tempdir().unwrap();
        let job = FigureJob { lambda: 1.0, ratios: vec![1.0, 3.0], grid: None, out_dir: dir.path().into() };
        let out = figure_emit(&job).unwrap();
        assert_eq!(out.len(), 2);
        let pts = read_curve(&out[1].csv).unwrap();
        assert_eq!(pts.len(), policy::DEFAULT_GRID_POINTS);
        assert_eq!(out[1].csv.file_name().unwrap(), "rate_ratio_3.csv");
        let text = std::fs::read_to_string(&out[0].csv).unwrap();
        assert!(text.starts_with("y,rate\n"));
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out[0].metadata).unwrap()).unwrap();
        assert!((meta["gibbs_point"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let job = FigureJob { lambda: 1.0, ratios: vec![0.4], grid: None, out_dir: dir.path().into() };
        let a = std::fs::read(&figure_emit(&job).unwrap()[0].csv).unwrap();
        let b = std::fs::read(&figure_emit(&job).unwrap()[0].csv).unwrap();
        assert_eq!(a, b);
    }
}

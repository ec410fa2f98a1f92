//! CSV hole reports and JSON summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::inspect::InspectionReport;

/// One CSV line: a measured hole in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub hole_id: usize,
    pub speed_mps: f64,
    pub trial: usize,
    pub r_mm: f64,
    #[serde(rename = "R_mm")]
    pub big_r_mm: f64,
    pub depth_mm: f64,
    pub center_u: f64,
    pub center_v: f64,
}

impl ReportRow {
    pub fn from_report(report: &InspectionReport, speed_mps: f64, trial: usize) -> Vec<Self> {
        report
            .per_hole()
            .into_iter()
            .map(|m| ReportRow {
                hole_id: m.hole_id,
                speed_mps,
                trial,
                r_mm: m.r_mm,
                big_r_mm: m.big_r_mm,
                depth_mm: m.depth_mm,
                center_u: m.center_px.0,
                center_v: m.center_px.1,
            })
            .collect()
    }
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<(), IoError> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| IoError::parse(path.display().to_string(), e))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| IoError::parse(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>, IoError> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| IoError::parse(path.display().to_string(), e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::parse(path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| IoError::parse("json output", e))?;
    std::fs::write(path, text + "\n").map_err(|e| IoError::file(path, e))
}

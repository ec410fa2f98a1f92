//! Ground-truth manifests as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::sim::{GroundTruth, HoleSpec, HoleTruth};
use crate::types::CircleFitParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHole {
    pub id: usize,
    pub center_mm: [f64; 2],
    pub pilot_radius_mm: f64,
    pub csk_radius_mm: f64,
    pub csk_angle_deg: f64,
    pub true_depth_mm: f64,
    pub center_crossing_t_ns: u64,
    pub near_center_ns: Option<(u64, u64)>,
    pub truth_px: CircleFitParams,
    pub start_px: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub duration_ns: u64,
    pub speed_mps: f64,
    pub seed: Option<u64>,
    pub holes: Vec<ManifestHole>,
}

impl Manifest {
    pub fn new(truth: &GroundTruth, seed: Option<u64>) -> Self {
        Self {
            duration_ns: truth.duration_ns,
            speed_mps: truth.speed_mps,
            seed,
            holes: truth
                .holes
                .iter()
                .map(|h| ManifestHole {
                    id: h.id,
                    center_mm: h.hole.center_mm,
                    pilot_radius_mm: h.hole.pilot_radius_mm,
                    csk_radius_mm: h.hole.csk_radius_mm,
                    csk_angle_deg: h.hole.csk_angle_deg,
                    true_depth_mm: h.true_depth_mm,
                    center_crossing_t_ns: h.center_crossing_t_ns,
                    near_center_ns: h.near_center_ns,
                    truth_px: h.truth_px,
                    start_px: h.start_px,
                })
                .collect(),
        }
    }

    pub fn to_truth(&self) -> GroundTruth {
        GroundTruth {
            duration_ns: self.duration_ns,
            speed_mps: self.speed_mps,
            holes: self
                .holes
                .iter()
                .map(|h| HoleTruth {
                    id: h.id,
                    hole: HoleSpec {
                        center_mm: h.center_mm,
                        pilot_radius_mm: h.pilot_radius_mm,
                        csk_radius_mm: h.csk_radius_mm,
                        csk_angle_deg: h.csk_angle_deg,
                    },
                    true_depth_mm: h.true_depth_mm,
                    center_crossing_t_ns: h.center_crossing_t_ns,
                    near_center_ns: h.near_center_ns,
                    truth_px: h.truth_px,
                    start_px: h.start_px,
                })
                .collect(),
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| IoError::parse("manifest", e))?;
    std::fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path.display().to_string(), e))
}

//! Windowed inspection pipeline, metric conversion, depth and precision
//! statistics.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circle_fit::{fit_circles, FitConfig, FitReport};
use crate::cluster::{
    mean_shift, select_inspection_cluster, select_within_radius, Cluster, DEFAULT_BANDWIDTH_PX,
};
use crate::motion::{
    extract_sae_in, flow_from_twist, warp_into, Flow, Iwe, MotionError, PixelRect,
};
use crate::sim::GroundTruth;
use crate::types::{
    validate_window, CameraModel, CircleFitParams, CoreError, EventStream, HoleMeasurement, Twist,
    DEFAULT_MIN_WINDOW_EVENTS,
};

#[derive(Debug, Error, PartialEq)]
pub enum InspectError {
    #[error("countersink angle must be in (0, 180) degrees, got {0}")]
    InvalidAngle(f64),
    #[error("outer radius {big_r_mm} mm is smaller than inner radius {r_mm} mm")]
    InvertedRadii { r_mm: f64, big_r_mm: f64 },
    #[error("need at least {min} trials, got {got}")]
    InsufficientTrials { got: usize, min: usize },
    #[error("stream does not match the camera: {0}")]
    InvalidStream(#[from] CoreError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
}

/// Distance used both to merge repeated detections of a hole and to match
/// detections to ground truth.
pub const MATCH_RADIUS_PX: f64 = 15.0;

/// Default gate on the selected cluster's distance from the principal point.
/// Wider gates admit clusters holding only one arc of a hole that is still
/// entering or leaving the center.
pub const DEFAULT_GATE_RADIUS_PX: f64 = 20.0;

/// The gate plus the largest preset countersink radius (about 40 px) plus
/// margin.
pub const DEFAULT_ROI_HALF_WIDTH_PX: f64 = 90.0;

/// `(Z / F) · px` for both radii.
pub fn pixels_to_mm(params: &CircleFitParams, cam: &CameraModel) -> (f64, f64) {
    let s = cam.mm_per_px();
    (params.r * s, params.big_r * s)
}

/// Depth of a countersink with included angle `angle_deg` from its inner
/// and outer radii.
pub fn estimate_depth(r_mm: f64, big_r_mm: f64, angle_deg: f64) -> Result<f64, InspectError> {
    if !(angle_deg > 0.0 && angle_deg < 180.0) {
        return Err(InspectError::InvalidAngle(angle_deg));
    }
    if big_r_mm < r_mm {
        return Err(InspectError::InvertedRadii { r_mm, big_r_mm });
    }
    Ok((big_r_mm - r_mm) / (angle_deg.to_radians() / 2.0).tan())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub min_window_events: usize,
    pub activation_threshold: u32,
    pub opening_radius_px: usize,
    pub bandwidth_px: f64,
    /// A cluster is inspected only if its centroid lies this close to the
    /// principal point.
    pub gate_radius_px: f64,
    pub min_cluster_points: usize,
    /// SAE extraction and clustering see only the square of this half-width
    /// around the principal point. `None` processes the whole image.
    pub roi_half_width_px: Option<f64>,
    /// Fit every gated cluster rather than only the nearest one.
    pub multi_select: bool,
    pub csk_angle_deg: f64,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_window_events: DEFAULT_MIN_WINDOW_EVENTS,
            activation_threshold: 1,
            opening_radius_px: 1,
            bandwidth_px: DEFAULT_BANDWIDTH_PX,
            gate_radius_px: DEFAULT_GATE_RADIUS_PX,
            min_cluster_points: 40,
            roi_half_width_px: Some(DEFAULT_ROI_HALF_WIDTH_PX),
            multi_select: false,
            csk_angle_deg: 100.0,
            fit: FitConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), InspectError> {
        let bad = |m: String| Err(InspectError::InvalidConfig(m));
        if self.min_window_events < 2 {
            return bad("min_window_events must be at least 2".into());
        }
        if self.activation_threshold < 1 {
            return bad("activation_threshold must be at least 1".into());
        }
        if !(self.bandwidth_px > 0.0 && self.bandwidth_px.is_finite()) {
            return bad(format!(
                "bandwidth_px must be positive, got {}",
                self.bandwidth_px
            ));
        }
        if !(self.gate_radius_px >= 0.0) {
            return bad(format!(
                "gate_radius_px must be non-negative, got {}",
                self.gate_radius_px
            ));
        }
        if let Some(r) = self.roi_half_width_px {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("roi_half_width_px must be positive, got {r}"));
            }
        }
        if !(self.csk_angle_deg > 0.0 && self.csk_angle_deg < 180.0) {
            return Err(InspectError::InvalidAngle(self.csk_angle_deg));
        }
        self.fit
            .validate()
            .map_err(|e| InspectError::InvalidConfig(e.to_string()))
    }
}

/// Accumulated wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub iwe_s: f64,
    pub sae_s: f64,
    pub clustering_s: f64,
    pub fit_s: f64,
    pub depth_s: f64,
}

impl StageTimings {
    pub fn total_s(&self) -> f64 {
        self.iwe_s + self.sae_s + self.clustering_s + self.fit_s + self.depth_s
    }

    fn add(&mut self, o: &StageTimings) {
        self.iwe_s += o.iwe_s;
        self.sae_s += o.sae_s;
        self.clustering_s += o.clustering_s;
        self.fit_s += o.fit_s;
        self.depth_s += o.depth_s;
    }

    pub fn scaled(&self, k: f64) -> StageTimings {
        StageTimings {
            iwe_s: self.iwe_s * k,
            sae_s: self.sae_s * k,
            clustering_s: self.clustering_s * k,
            fit_s: self.fit_s * k,
            depth_s: self.depth_s * k,
        }
    }
}

/// One hole as measured in the window that saw it closest to the
/// principal point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectedHole {
    pub measurement: HoleMeasurement,
    pub fit: FitReport,
    pub window_index: usize,
    pub t_i_ns: u64,
    /// Fitted center moved back along the flow to t = 0.
    pub canonical_px: (f64, f64),
    pub centroid_distance_px: f64,
    pub cluster_points: usize,
    /// Stage times of the window this measurement came from.
    pub window_timing: StageTimings,
}

impl InspectedHole {
    /// Wall time of the whole chain for this hole's window.
    pub fn chain_time_s(&self) -> f64 {
        self.window_timing.total_s()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InspectionReport {
    pub holes: Vec<InspectedHole>,
    pub windows: usize,
    pub flow: Flow,
    pub timing: StageTimings,
    /// Set by [`evaluate`]; `None` until compared with ground truth.
    pub detection_rate: Option<f64>,
}

impl InspectionReport {
    pub fn per_hole(&self) -> Vec<HoleMeasurement> {
        self.holes.iter().map(|h| h.measurement).collect()
    }

    /// Mean chain time of the reported holes.
    pub fn mean_hole_time_s(&self) -> f64 {
        if self.holes.is_empty() {
            0.0
        } else {
            self.holes.iter().map(|h| h.chain_time_s()).sum::<f64>() / self.holes.len() as f64
        }
    }

    /// Total pipeline time divided by the number of reported holes.
    pub fn amortized_hole_time_s(&self) -> f64 {
        if self.holes.is_empty() {
            0.0
        } else {
            self.timing.total_s() / self.holes.len() as f64
        }
    }
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn canonical(h: f64, k: f64, flow: Flow, t_ns: u64) -> (f64, f64) {
    let t = t_ns as f64 * 1e-9;
    (h - flow.du * t, k - flow.dv * t)
}

/// Runs every window of `stream` through warp, opening, mean-shift, fit and
/// depth. Windows whose cluster fails to fit are skipped.
pub fn run_pipeline(
    stream: &EventStream,
    cam: &CameraModel,
    twist: &Twist,
    config: &PipelineConfig,
) -> Result<InspectionReport, InspectError> {
    config.validate()?;
    if stream.width != cam.width || stream.height != cam.height {
        return Err(InspectError::InvalidStream(CoreError::InvalidCamera(
            format!(
                "stream is {}x{}, camera is {}x{}",
                stream.width, stream.height, cam.width, cam.height
            ),
        )));
    }
    validate_window(crate::types::EventWindow::new(&stream.events), cam, 0)?;
    let flow = flow_from_twist(twist, cam)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let (u0, v0) = cam.principal_point();
    let mut iwe = Iwe::zeros(w, h, 0, flow);
    let mut timing = StageTimings::default();
    let mut holes: Vec<InspectedHole> = Vec::new();
    let windows = stream.windows(config.min_window_events);
    let roi = match config.roi_half_width_px {
        Some(half) => PixelRect::around(u0, v0, half, w, h),
        None => PixelRect::full(w, h),
    };

    for (wi, window) in windows.iter().enumerate() {
        let mut t = StageTimings::default();
        let start = Instant::now();
        warp_into(window, flow, &mut iwe);
        t.iwe_s = secs(start);

        let start = Instant::now();
        let sae = extract_sae_in(
            &iwe,
            config.activation_threshold,
            config.opening_radius_px,
            roi,
        )?;
        t.sae_s = secs(start);
        // no cluster could reach the size needed for a fit
        if sae.len() < config.min_cluster_points.max(1) {
            timing.add(&t);
            continue;
        }

        let start = Instant::now();
        let clusters =
            mean_shift(&sae, config.bandwidth_px).expect("non-empty SAE and validated bandwidth");
        let chosen: Vec<&Cluster> = if config.multi_select {
            select_within_radius(&clusters, cam, config.gate_radius_px)
        } else {
            select_inspection_cluster(&clusters, cam)
                .into_iter()
                .filter(|c| (c.centroid.0 - u0).hypot(c.centroid.1 - v0) <= config.gate_radius_px)
                .collect()
        };
        t.clustering_s = secs(start);

        for cluster in chosen {
            if cluster.len() < config.min_cluster_points {
                continue;
            }
            let start = Instant::now();
            let fit = fit_circles(&cluster.points_f64(), &config.fit);
            t.fit_s += secs(start);
            let Ok(fit) = fit else {
                continue;
            };
            let start = Instant::now();
            let p = fit.params;
            let (r_mm, big_r_mm) = pixels_to_mm(&p, cam);
            let depth = estimate_depth(r_mm, big_r_mm, config.csk_angle_deg);
            t.depth_s += secs(start);
            let Ok(depth) = depth else {
                continue;
            };
            let Ok(measurement) = HoleMeasurement::new(0, r_mm, big_r_mm, depth, (p.h, p.k)) else {
                continue;
            };
            let hole = InspectedHole {
                measurement,
                canonical_px: canonical(p.h, p.k, flow, window.t_i_ns()),
                centroid_distance_px: (cluster.centroid.0 - u0).hypot(cluster.centroid.1 - v0),
                cluster_points: cluster.len(),
                fit,
                window_index: wi,
                t_i_ns: window.t_i_ns(),
                window_timing: StageTimings::default(),
            };
            merge_detection(&mut holes, hole);
        }
        // every hole measured in this window is charged the whole chain
        for hole in holes.iter_mut().filter(|h| h.window_index == wi) {
            hole.window_timing = t;
        }
        timing.add(&t);
    }

    holes.sort_by(|a, b| {
        a.t_i_ns
            .cmp(&b.t_i_ns)
            .then(a.canonical_px.0.total_cmp(&b.canonical_px.0))
    });
    for (i, hole) in holes.iter_mut().enumerate() {
        hole.measurement.hole_id = i;
    }
    Ok(InspectionReport {
        holes,
        windows: windows.len(),
        flow,
        timing,
        detection_rate: None,
    })
}

/// Keeps one measurement per physical hole: the one whose cluster centroid
/// was nearest the principal point.
fn merge_detection(holes: &mut Vec<InspectedHole>, new: InspectedHole) {
    let near = holes.iter_mut().find(|h| {
        (h.canonical_px.0 - new.canonical_px.0).hypot(h.canonical_px.1 - new.canonical_px.1)
            < MATCH_RADIUS_PX
    });
    match near {
        Some(old) if new.centroid_distance_px < old.centroid_distance_px => *old = new,
        Some(_) => {}
        None => holes.push(new),
    }
}

/// Outcome of comparing a report with simulator ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMatch {
    pub detection_rate: f64,
    /// For every truth hole, the index into `report.holes` that matched it.
    pub matched: Vec<Option<usize>>,
    /// Measurements that matched no truth hole.
    pub false_positives: usize,
}

/// Matches detections to truth holes by their motion-compensated center,
/// relabels matched measurements with the truth id and sets
/// `report.detection_rate`.
pub fn evaluate(report: &mut InspectionReport, truth: &GroundTruth) -> TruthMatch {
    let mut matched = vec![None; truth.holes.len()];
    let mut used = vec![false; report.holes.len()];
    for (ti, th) in truth.holes.iter().enumerate() {
        let best = report
            .holes
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, h)| {
                let d = (h.canonical_px.0 - th.start_px.0).hypot(h.canonical_px.1 - th.start_px.1);
                (i, d)
            })
            .filter(|&(_, d)| d < MATCH_RADIUS_PX)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = best {
            used[i] = true;
            matched[ti] = Some(i);
            report.holes[i].measurement.hole_id = th.id;
        }
    }
    let detected = matched.iter().filter(|m| m.is_some()).count();
    let rate = if truth.holes.is_empty() {
        0.0
    } else {
        detected as f64 / truth.holes.len() as f64
    };
    report.detection_rate = Some(rate);
    TruthMatch {
        detection_rate: rate,
        matched,
        false_positives: used.iter().filter(|u| !**u).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaEstimator {
    /// Divide by n. Reproduces the published per-hole σ_d values.
    #[default]
    Population,
    /// Divide by n − 1.
    Sample,
}

pub fn std_dev(values: &[f64], estimator: SigmaEstimator) -> Result<f64, InspectError> {
    if values.len() < 2 {
        return Err(InspectError::InsufficientTrials {
            got: values.len(),
            min: 2,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let dof = match estimator {
        SigmaEstimator::Population => n,
        SigmaEstimator::Sample => n - 1.0,
    };
    Ok((ss / dof).sqrt())
}

/// Depths of every trial at one speed, indexed `[trial][hole]`; `None` for
/// holes missed in that trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedTrials {
    pub speed_mps: f64,
    pub depths: Vec<Vec<Option<f64>>>,
}

/// Per-hole precision tables shaped like the published ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTable {
    pub estimator: SigmaEstimator,
    pub speeds_mps: Vec<f64>,
    /// `[speed][hole]` σ_d in mm; `None` if fewer than two detections.
    pub sigma_d: Vec<Vec<Option<f64>>>,
    /// Per hole, pooled over speeds: `sqrt(mean σ_d²)`.
    pub sigma_r: Vec<Option<f64>>,
    /// Mean of `sigma_r` over holes.
    pub aggregate: f64,
}

impl PrecisionTable {
    pub fn max_sigma_d(&self) -> f64 {
        self.sigma_d
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |a, &b| a.max(b))
    }
}

pub fn aggregate_precision(
    trials: &[SpeedTrials],
    estimator: SigmaEstimator,
) -> Result<PrecisionTable, InspectError> {
    let holes = trials
        .iter()
        .flat_map(|s| s.depths.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    for s in trials {
        if s.depths.len() < 2 {
            return Err(InspectError::InsufficientTrials {
                got: s.depths.len(),
                min: 2,
            });
        }
    }
    if trials.is_empty() {
        return Err(InspectError::InsufficientTrials { got: 0, min: 2 });
    }
    let sigma_d: Vec<Vec<Option<f64>>> = trials
        .iter()
        .map(|s| {
            (0..holes)
                .map(|h| {
                    let v: Vec<f64> = s
                        .depths
                        .iter()
                        .filter_map(|t| t.get(h).copied().flatten())
                        .collect();
                    std_dev(&v, estimator).ok()
                })
                .collect()
        })
        .collect();
    let sigma_r: Vec<Option<f64>> = (0..holes)
        .map(|h| {
            let v: Vec<f64> = sigma_d.iter().filter_map(|row| row[h]).collect();
            (!v.is_empty()).then(|| (v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64).sqrt())
        })
        .collect();
    let present: Vec<f64> = sigma_r.iter().flatten().copied().collect();
    let aggregate = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(PrecisionTable {
        estimator,
        speeds_mps: trials.iter().map(|s| s.speed_mps).collect(),
        sigma_d,
        sigma_r,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE_1A: [f64; 10] = [
        0.728, 0.829, 0.777, 0.800, 0.790, 0.813, 0.771, 0.823, 0.830, 0.773,
    ];

    #[test]
    fn pixel_conversion() {
        let cam = CameraModel::default_sweep_camera();
        let p = CircleFitParams::from_array([50.0, 60.0, 0.0, 0.0]);
        let (r, big_r) = pixels_to_mm(&p, &cam);
        assert!((r - 4.5).abs() < 1e-12 && (big_r - 5.4).abs() < 1e-12);
        assert_eq!(
            pixels_to_mm(&CircleFitParams::from_array([0.0, 1.0, 0.0, 0.0]), &cam).0,
            0.0
        );
        for mm in [0.3, 2.0, 3.55] {
            let px = mm * cam.focal_px() / cam.z_standoff_mm;
            let back = pixels_to_mm(&CircleFitParams::from_array([px, px + 1.0, 0.0, 0.0]), &cam).0;
            assert!((back - mm).abs() < 1e-9);
        }
    }

    #[test]
    fn depth_examples() {
        assert_eq!(estimate_depth(2.0, 2.0, 100.0).unwrap(), 0.0);
        assert!((estimate_depth(2.0, 2.5, 90.0).unwrap() - 0.5).abs() < 1e-12);
        // 0.5 / tan(50°)
        assert!((estimate_depth(2.0, 2.5, 100.0).unwrap() - 0.419_549_815_3).abs() < 1e-9);
        assert_eq!(
            estimate_depth(1.0, 2.0, 0.0),
            Err(InspectError::InvalidAngle(0.0))
        );
        assert_eq!(
            estimate_depth(1.0, 2.0, 180.0),
            Err(InspectError::InvalidAngle(180.0))
        );
        assert!(matches!(
            estimate_depth(2.0, 1.0, 100.0),
            Err(InspectError::InvertedRadii { .. })
        ));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(
            std_dev(&[0.5; 10], SigmaEstimator::Population).unwrap(),
            0.0
        );
        let s = std_dev(&TABLE_1A, SigmaEstimator::Population).unwrap();
        assert!((s - 0.031).abs() <= 0.0005, "{s}");
        let two = std_dev(&[1.0, 1.1], SigmaEstimator::Sample).unwrap();
        assert!((two - 0.070_710_678).abs() < 1e-8);
        assert!(matches!(
            std_dev(&[1.0], SigmaEstimator::Sample),
            Err(InspectError::InsufficientTrials { got: 1, .. })
        ));
    }

    #[test]
    fn aggregate_from_constant_trials_is_zero() {
        let trials = [
            SpeedTrials {
                speed_mps: 0.1,
                depths: vec![vec![Some(0.8), Some(0.5)]; 10],
            },
            SpeedTrials {
                speed_mps: 0.5,
                depths: vec![vec![Some(0.8), Some(0.5)]; 10],
            },
        ];
        let t = aggregate_precision(&trials, SigmaEstimator::Sample).unwrap();
        assert!(t.aggregate < 1e-12);
        assert!(t
            .sigma_d
            .iter()
            .flatten()
            .all(|s| s.is_some_and(|s| s < 1e-12)));
        let one = [SpeedTrials {
            speed_mps: 0.1,
            depths: vec![vec![Some(0.8)]],
        }];
        assert!(aggregate_precision(&one, SigmaEstimator::Sample).is_err());
    }

    #[test]
    fn aggregate_pools_speeds_and_averages_holes() {
        let trials = [
            SpeedTrials {
                speed_mps: 0.1,
                depths: vec![vec![Some(1.0), Some(0.0)], vec![Some(1.1), Some(0.0)]],
            },
            SpeedTrials {
                speed_mps: 0.5,
                depths: vec![vec![Some(1.0), Some(0.0)], vec![Some(1.0), Some(0.3)]],
            },
        ];
        let t = aggregate_precision(&trials, SigmaEstimator::Sample).unwrap();
        let s = 0.1 / 2f64.sqrt();
        assert!((t.sigma_d[0][0].unwrap() - s).abs() < 1e-12);
        assert!((t.sigma_r[0].unwrap() - (s * s / 2.0).sqrt()).abs() < 1e-12);
        let s1 = 0.3 / 2f64.sqrt();
        let expected = ((s * s / 2.0).sqrt() + (s1 * s1 / 2.0).sqrt()) / 2.0;
        assert!((t.aggregate - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_stream_gives_empty_report() {
        let cam = CameraModel::default_sweep_camera();
        let stream = EventStream::new(cam.width, cam.height, Vec::new());
        let mut rep = run_pipeline(
            &stream,
            &cam,
            &Twist::planar(0.1, 0.0),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert!(rep.holes.is_empty());
        let truth = GroundTruth {
            duration_ns: 0,
            speed_mps: 0.1,
            holes: Vec::new(),
        };
        assert_eq!(evaluate(&mut rep, &truth).detection_rate, 0.0);
        assert_eq!(rep.detection_rate, Some(0.0));
    }

    proptest! {
        #[test]
        fn depth_is_monotone(r in 0.1f64..5.0, gap in 0.0f64..2.0, d in 0.001f64..0.5, phi in 10.0f64..170.0) {
            let base = estimate_depth(r, r + gap, phi).unwrap();
            prop_assert!(estimate_depth(r, r + gap + d, phi).unwrap() > base);
            if gap >= d {
                prop_assert!(estimate_depth(r + d, r + gap, phi).unwrap() < base);
            }
            if gap > 0.0 {
                prop_assert!(estimate_depth(r, r + gap, (phi + 5.0).min(179.0)).unwrap() < base);
            }
        }

        #[test]
        fn focal_and_radius_scale_cancel(r in 5.0f64..60.0, gap in 1.0f64..20.0, k in 1.5f64..4.0) {
            let cam = CameraModel::default_sweep_camera();
            let scaled = CameraModel::new(cam.fx * k, cam.fy * k, cam.skew * k, cam.u0, cam.v0, cam.width, cam.height, cam.z_standoff_mm).unwrap();
            let (a, b) = pixels_to_mm(&CircleFitParams::from_array([r, r + gap, 0.0, 0.0]), &cam);
            let (c, d) = pixels_to_mm(&CircleFitParams::from_array([r * k, (r + gap) * k, 0.0, 0.0]), &scaled);
            let z0 = estimate_depth(a, b, 100.0).unwrap();
            let z1 = estimate_depth(c, d, 100.0).unwrap();
            prop_assert!((z0 - z1).abs() < 1e-12);
        }
    }
}

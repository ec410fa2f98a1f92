use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::plan_sweep_velocity;
use crate::types::{CameraModel, Twist};

/// One countersunk hole on the workpiece plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub center_mm: [f64; 2],
    pub pilot_radius_mm: f64,
    pub csk_radius_mm: f64,
    pub csk_angle_deg: f64,
}

impl HoleSpec {
    pub fn new(
        center_mm: [f64; 2],
        pilot_radius_mm: f64,
        csk_radius_mm: f64,
        csk_angle_deg: f64,
    ) -> Result<Self, SimError> {
        let h = Self {
            center_mm,
            pilot_radius_mm,
            csk_radius_mm,
            csk_angle_deg,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.center_mm.iter().all(|v| v.is_finite())
            && self.pilot_radius_mm > 0.0
            && self.pilot_radius_mm < self.csk_radius_mm
            && self.csk_radius_mm.is_finite()
            && self.csk_angle_deg > 0.0
            && self.csk_angle_deg < 180.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidScene(format!(
                "hole needs 0 < pilot < csk radius and 0 < angle < 180 ({self:?})"
            )))
        }
    }

    /// Depth of the cone between the pilot and countersink radii.
    pub fn true_depth_mm(&self) -> f64 {
        (self.csk_radius_mm - self.pilot_radius_mm) / (self.csk_angle_deg.to_radians() / 2.0).tan()
    }
}

/// Sensor noise and outlier sources added on top of the clean event model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub background_rate_hz_per_px: f64,
    pub edge_jitter_px: f64,
    pub reflection_arc_fraction: f64,
    pub timestamp_jitter_ns: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            background_rate_hz_per_px: 0.05,
            edge_jitter_px: 0.3,
            reflection_arc_fraction: 0.02,
            timestamp_jitter_ns: 20_000.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            background_rate_hz_per_px: 0.0,
            edge_jitter_px: 0.0,
            reflection_arc_fraction: 0.0,
            timestamp_jitter_ns: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_silent(&self) -> bool {
        self.background_rate_hz_per_px == 0.0
            && self.edge_jitter_px == 0.0
            && self.reflection_arc_fraction == 0.0
            && self.timestamp_jitter_ns == 0.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let non_negative = [
            self.background_rate_hz_per_px,
            self.edge_jitter_px,
            self.timestamp_jitter_ns,
        ]
        .iter()
        .all(|v| *v >= 0.0 && v.is_finite());
        if non_negative && (0.0..1.0).contains(&self.reflection_arc_fraction) {
            Ok(())
        } else {
            Err(SimError::InvalidScene(format!("bad noise spec {self:?}")))
        }
    }
}

/// Shading of the workpiece and optical blur. Intensities are linear
/// irradiance in arbitrary units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optics {
    pub blur_px: f64,
    pub surface_intensity: f64,
    /// Countersink wall at its outer rim.
    pub wall_outer_intensity: f64,
    /// Countersink wall where it meets the pilot bore.
    pub wall_inner_intensity: f64,
    pub bore_intensity: f64,
}

impl Default for Optics {
    fn default() -> Self {
        Self {
            blur_px: 0.9,
            surface_intensity: 0.8,
            wall_outer_intensity: 0.2395,
            wall_inner_intensity: 0.2395,
            bore_intensity: 0.0717,
        }
    }
}

impl Optics {
    pub fn validate(&self) -> Result<(), SimError> {
        let levels = [
            self.surface_intensity,
            self.wall_outer_intensity,
            self.wall_inner_intensity,
            self.bore_intensity,
        ];
        if self.blur_px > 0.0 && levels.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(SimError::InvalidScene(format!("bad optics {self:?}")))
        }
    }
}

/// Workpiece presets with descending countersink depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Workpiece {
    A,
    B,
    C,
}

impl Workpiece {
    pub const ALL: [Workpiece; 3] = [Workpiece::A, Workpiece::B, Workpiece::C];

    /// (pilot radius, countersink radius) in mm.
    pub fn radii_mm(self) -> (f64, f64) {
        match self {
            Workpiece::A => (2.0, 3.0),
            Workpiece::B => (2.5, 3.15),
            Workpiece::C => (3.0, 3.55),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Workpiece::A => "A",
            Workpiece::B => "B",
            Workpiece::C => "C",
        }
    }
}

impl std::str::FromStr for Workpiece {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Workpiece::A),
            "B" => Ok(Workpiece::B),
            "C" => Ok(Workpiece::C),
            other => Err(SimError::InvalidScene(format!(
                "unknown workpiece '{other}'"
            ))),
        }
    }
}

pub const DEFAULT_CSK_ANGLE_DEG: f64 = 100.0;
pub const DEFAULT_SPAN_M: f64 = 1.5;
pub const DEFAULT_HOLE_COUNT: usize = 10;
pub const DEFAULT_CONTRAST_THRESHOLD: f64 = 0.2;
pub const SWEEP_SPEEDS_MPS: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];

/// Complete description of one simulated sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub holes: Vec<HoleSpec>,
    pub workpiece_span_m: f64,
    pub camera: CameraModel,
    pub twist: Twist,
    /// Where the optical axis meets the workpiece at t = 0.
    #[serde(default)]
    pub start_mm: [f64; 2],
    pub contrast_threshold: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub optics: Optics,
}

impl SceneSpec {
    /// Ten holes evenly spaced along x over the span; the camera starts
    /// centered on the first hole and reaches the last one after
    /// `span / speed` seconds.
    pub fn preset(workpiece: Workpiece, speed_mps: f64) -> Result<Self, SimError> {
        let (pilot, csk) = workpiece.radii_mm();
        let span_mm = DEFAULT_SPAN_M * 1000.0;
        let pitch = span_mm / (DEFAULT_HOLE_COUNT - 1) as f64;
        let holes = (0..DEFAULT_HOLE_COUNT)
            .map(|i| HoleSpec::new([i as f64 * pitch, 0.0], pilot, csk, DEFAULT_CSK_ANGLE_DEG))
            .collect::<Result<Vec<_>, _>>()?;
        let twist = plan_sweep_velocity(
            &Vector3::zeros(),
            &Vector3::new(DEFAULT_SPAN_M, 0.0, 0.0),
            speed_mps,
        )
        .map_err(|e| SimError::InvalidScene(e.to_string()))?;
        let scene = Self {
            holes,
            workpiece_span_m: DEFAULT_SPAN_M,
            camera: CameraModel::default_sweep_camera(),
            twist,
            start_mm: [0.0, 0.0],
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
            noise: NoiseSpec::default(),
            optics: Optics::default(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_speed(&self, speed_mps: f64) -> Result<Self, SimError> {
        let current = self.twist.linear_speed();
        if !(speed_mps > 0.0) || current == 0.0 {
            return Err(SimError::InvalidScene(
                "speed rescaling needs a moving scene and a positive speed".into(),
            ));
        }
        let s = speed_mps / current;
        let mut out = self.clone();
        out.twist.vx *= s;
        out.twist.vy *= s;
        out.twist.vz *= s;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for h in &self.holes {
            h.validate()?;
        }
        for (i, a) in self.holes.iter().enumerate() {
            for b in &self.holes[i + 1..] {
                let d = ((a.center_mm[0] - b.center_mm[0]).powi(2)
                    + (a.center_mm[1] - b.center_mm[1]).powi(2))
                .sqrt();
                if d <= a.csk_radius_mm + b.csk_radius_mm {
                    return Err(SimError::InvalidScene(format!(
                        "holes at {:?} and {:?} overlap",
                        a.center_mm, b.center_mm
                    )));
                }
            }
        }
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(SimError::InvalidScene(
                "contrast threshold must be > 0".into(),
            ));
        }
        if !(self.workpiece_span_m > 0.0) {
            return Err(SimError::InvalidScene("workpiece span must be > 0".into()));
        }
        if self.twist.vz != 0.0
            || self.twist.wx != 0.0
            || self.twist.wy != 0.0
            || self.twist.wz != 0.0
        {
            return Err(SimError::InvalidScene(
                "only planar translation (vx, vy) is simulated".into(),
            ));
        }
        self.noise.validate()?;
        self.optics.validate()
    }

    /// Camera velocity on the workpiece plane in mm/s.
    pub fn velocity_mm_s(&self) -> [f64; 2] {
        [self.twist.vx * 1000.0, self.twist.vy * 1000.0]
    }

    /// Sweep duration `span / speed`.
    pub fn sweep_duration_s(&self) -> f64 {
        self.workpiece_span_m / self.twist.linear_speed()
    }

    /// Image-plane speed of the scene in px/s (upper bound over both axes).
    pub fn flow_speed_px_s(&self) -> f64 {
        let [vx, vy] = self.velocity_mm_s();
        let z = self.camera.z_standoff_mm;
        let du = (self.camera.fx * vx + self.camera.skew * vy) / z;
        let dv = self.camera.fy * vy / z;
        (du * du + dv * dv).sqrt()
    }

    /// Largest time step keeping inter-sample motion at half a pixel.
    pub fn max_sim_step_s(&self) -> f64 {
        let f = self.flow_speed_px_s();
        if f == 0.0 {
            f64::INFINITY
        } else {
            0.5 / f
        }
    }
}

//! Domain types shared by every pipeline stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum number of events in one processing window.
pub const DEFAULT_MIN_WINDOW_EVENTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("event {index} at ({x}, {y}) is outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("event {index} has timestamp {t_ns} earlier than its predecessor")]
    Unsorted { index: usize, t_ns: u64 },
    #[error("window holds {count} events, at least {min} required (first missing index {count})")]
    TooFewEvents { count: usize, min: usize },
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid twist: {0}")]
    InvalidTwist(String),
    #[error("invalid circle parameters: {0}")]
    InvalidCircle(String),
    #[error("invalid hole measurement: {0}")]
    InvalidMeasurement(String),
}

/// Sign of a log-intensity change. There is no zero polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn from_i8(value: i8) -> Option<Self> {
        match value {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }

    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn as_i32(self) -> i32 {
        self.as_i8() as i32
    }
}

/// A single pixel activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t_ns: u64,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t_ns: u64, polarity: Polarity) -> Self {
        Self {
            x,
            y,
            t_ns,
            polarity,
        }
    }
}

/// A full recording: sensor size plus time-ordered events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Self {
        Self {
            width,
            height,
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Count-based windows of `min_events` events, consecutive windows
    /// overlapping by half. The final window is aligned to the end of the
    /// stream so no trailing events are skipped. Streams shorter than
    /// `min_events` yield no windows.
    pub fn windows(&self, min_events: usize) -> Vec<EventWindow<'_>> {
        window_ranges(self.events.len(), min_events)
            .into_iter()
            .map(|(start, end)| EventWindow::new(&self.events[start..end]))
            .collect()
    }
}

/// Start/end index pairs of the half-overlapping windows over `len` events.
pub fn window_ranges(len: usize, min_events: usize) -> Vec<(usize, usize)> {
    let min_events = min_events.max(1);
    if len < min_events {
        return Vec::new();
    }
    let stride = (min_events / 2).max(1);
    let mut ranges = Vec::new();
    let mut start = 0;
    while start + min_events <= len {
        ranges.push((start, start + min_events));
        start += stride;
    }
    let last_start = len - min_events;
    if ranges.last().map(|&(s, _)| s) != Some(last_start) {
        ranges.push((last_start, len));
    }
    ranges
}

/// Contiguous slice of a stream, referenced to its first timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventWindow<'a> {
    events: &'a [Event],
    t_i_ns: u64,
}

impl<'a> EventWindow<'a> {
    pub fn new(events: &'a [Event]) -> Self {
        let t_i_ns = events.first().map_or(0, |e| e.t_ns);
        Self { events, t_i_ns }
    }

    pub fn events(&self) -> &'a [Event] {
        self.events
    }

    pub fn t_i_ns(&self) -> u64 {
        self.t_i_ns
    }

    pub fn count(&self) -> usize {
        self.events.len()
    }
}

/// Checks bounds, ordering and size of a window. Idempotent.
pub fn validate_window<'a>(
    window: EventWindow<'a>,
    cam: &CameraModel,
    min_events: usize,
) -> Result<EventWindow<'a>, CoreError> {
    let mut prev = 0u64;
    for (index, e) in window.events.iter().enumerate() {
        if e.x >= cam.width || e.y >= cam.height {
            return Err(CoreError::OutOfBounds {
                index,
                x: e.x,
                y: e.y,
                width: cam.width,
                height: cam.height,
            });
        }
        if index > 0 && e.t_ns < prev {
            return Err(CoreError::Unsorted {
                index,
                t_ns: e.t_ns,
            });
        }
        prev = e.t_ns;
    }
    if window.count() < min_events {
        return Err(CoreError::TooFewEvents {
            count: window.count(),
            min: min_events,
        });
    }
    Ok(window)
}

/// Pinhole intrinsics, resolution and the standoff to the workpiece plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraFields", into = "CameraFields")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub skew: f64,
    pub u0: f64,
    pub v0: f64,
    pub width: u16,
    pub height: u16,
    pub z_standoff_mm: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFields {
    fx_px: f64,
    fy_px: f64,
    #[serde(default)]
    skew_px: f64,
    u0_px: f64,
    v0_px: f64,
    width_px: u16,
    height_px: u16,
    z_standoff_mm: f64,
}

impl TryFrom<CameraFields> for CameraModel {
    type Error = CoreError;

    fn try_from(f: CameraFields) -> Result<Self, Self::Error> {
        CameraModel::new(
            f.fx_px,
            f.fy_px,
            f.skew_px,
            f.u0_px,
            f.v0_px,
            f.width_px,
            f.height_px,
            f.z_standoff_mm,
        )
    }
}

impl From<CameraModel> for CameraFields {
    fn from(c: CameraModel) -> Self {
        CameraFields {
            fx_px: c.fx,
            fy_px: c.fy,
            skew_px: c.skew,
            u0_px: c.u0,
            v0_px: c.v0,
            width_px: c.width,
            height_px: c.height,
            z_standoff_mm: c.z_standoff_mm,
        }
    }
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        skew: f64,
        u0: f64,
        v0: f64,
        width: u16,
        height: u16,
        z_standoff_mm: f64,
    ) -> Result<Self, CoreError> {
        let all_finite = [fx, fy, skew, u0, v0, z_standoff_mm]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(CoreError::InvalidCamera("non-finite parameter".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(CoreError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(CoreError::InvalidCamera("zero resolution".into()));
        }
        if z_standoff_mm <= 0.0 {
            return Err(CoreError::InvalidCamera(format!(
                "standoff must be positive (z={z_standoff_mm} mm)"
            )));
        }
        if !(0.0..width as f64).contains(&u0) || !(0.0..height as f64).contains(&v0) {
            return Err(CoreError::InvalidCamera(format!(
                "principal point ({u0}, {v0}) outside {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            skew,
            u0,
            v0,
            width,
            height,
            z_standoff_mm,
        })
    }

    /// 640x480 sensor, F = 1000 px, 90 mm standoff, principal point at the
    /// image center.
    pub fn default_sweep_camera() -> Self {
        Self {
            fx: 1000.0,
            fy: 1000.0,
            skew: 0.0,
            u0: 320.0,
            v0: 240.0,
            width: 640,
            height: 480,
            z_standoff_mm: 90.0,
        }
    }

    /// Single focal length used for metric conversions.
    pub fn focal_px(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn mm_per_px(&self) -> f64 {
        self.z_standoff_mm / self.focal_px()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.u0, self.v0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Camera twist in its own frame: linear m/s, angular rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twist {
    #[serde(rename = "vx_mps", default)]
    pub vx: f64,
    #[serde(rename = "vy_mps", default)]
    pub vy: f64,
    #[serde(rename = "vz_mps", default)]
    pub vz: f64,
    #[serde(rename = "wx_radps", default)]
    pub wx: f64,
    #[serde(rename = "wy_radps", default)]
    pub wy: f64,
    #[serde(rename = "wz_radps", default)]
    pub wz: f64,
}

impl Twist {
    pub fn new(vx: f64, vy: f64, vz: f64, wx: f64, wy: f64, wz: f64) -> Result<Self, CoreError> {
        let t = Self {
            vx,
            vy,
            vz,
            wx,
            wy,
            wz,
        };
        if t.as_array().iter().all(|v| v.is_finite()) {
            Ok(t)
        } else {
            Err(CoreError::InvalidTwist("non-finite component".into()))
        }
    }

    pub fn planar(vx: f64, vy: f64) -> Self {
        Self {
            vx,
            vy,
            ..Self::default()
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.vx, self.vy, self.vz, self.wx, self.wy, self.wz]
    }

    pub fn linear_speed(&self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.vz * self.vz).sqrt()
    }

    /// True when only vx, vy are non-zero (within `tol`).
    pub fn is_planar(&self, tol: f64) -> bool {
        [self.vz, self.wx, self.wy, self.wz]
            .iter()
            .all(|v| v.abs() <= tol)
    }
}

/// Concentric countersink circles in pixels: inner (pilot) radius, outer
/// (countersink) radius and the shared center `(h, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFitParams {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub h: f64,
    pub k: f64,
}

impl CircleFitParams {
    pub fn new(r: f64, big_r: f64, h: f64, k: f64) -> Result<Self, CoreError> {
        if ![r, big_r, h, k].iter().all(|v| v.is_finite()) {
            return Err(CoreError::InvalidCircle("non-finite parameter".into()));
        }
        if !(r > 0.0 && r < big_r) {
            return Err(CoreError::InvalidCircle(format!(
                "radii must satisfy 0 < r < R (r={r}, R={big_r})"
            )));
        }
        Ok(Self { r, big_r, h, k })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.r, self.big_r, self.h, self.k]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            r: a[0],
            big_r: a[1],
            h: a[2],
            k: a[3],
        }
    }

    /// Whether the center lies inside the sensor extended by `R` on each side.
    pub fn center_within(&self, cam: &CameraModel) -> bool {
        let m = self.big_r;
        self.h >= -m
            && self.h <= cam.width as f64 + m
            && self.k >= -m
            && self.k <= cam.height as f64 + m
    }
}

/// Metric result for one inspected countersink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleMeasurement {
    pub hole_id: usize,
    pub r_mm: f64,
    #[serde(rename = "R_mm")]
    pub big_r_mm: f64,
    pub depth_mm: f64,
    pub center_px: (f64, f64),
}

impl HoleMeasurement {
    pub fn new(
        hole_id: usize,
        r_mm: f64,
        big_r_mm: f64,
        depth_mm: f64,
        center_px: (f64, f64),
    ) -> Result<Self, CoreError> {
        if !(r_mm >= 0.0 && big_r_mm > r_mm && depth_mm >= 0.0) {
            return Err(CoreError::InvalidMeasurement(format!(
                "need R > r >= 0 and depth >= 0 (r={r_mm}, R={big_r_mm}, depth={depth_mm})"
            )));
        }
        Ok(Self {
            hole_id,
            r_mm,
            big_r_mm,
            depth_mm,
            center_px,
        })
    }
}

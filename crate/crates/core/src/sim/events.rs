//! Contrast-threshold event generation for a camera translating over the
//! workpiece.
//!
//! Every pixel integrates the log intensity of the plane point it sees and
//! emits an event each time the change since its last event reaches the
//! contrast threshold. Samples are taken on a global time grid, but only
//! inside the time bands where a hole edge passes under the pixel; the
//! flat surface, the bore floor and the shallow wall ramp are bridged by
//! linear interpolation between band samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{edge_margin_px, hole_profiles, HoleProfile};
use super::scene::{HoleSpec, SceneSpec};
use super::SimError;
use crate::geometry::back_project;
use crate::types::{CircleFitParams, Event, EventStream, Polarity};

/// Ground truth of a single hole for one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleTruth {
    pub id: usize,
    pub hole: HoleSpec,
    pub true_depth_mm: f64,
    /// Time of closest approach of the projected center to the principal
    /// point.
    pub center_crossing_t_ns: u64,
    /// Interval during which the projected center is within 10 px of the
    /// principal point, if it ever is.
    pub near_center_ns: Option<(u64, u64)>,
    /// Projected geometry at the crossing instant.
    pub truth_px: CircleFitParams,
    /// Projected center at t = 0 (motion-compensated reference position).
    pub start_px: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub duration_ns: u64,
    pub speed_mps: f64,
    pub holes: Vec<HoleTruth>,
}

/// Noise-free sweep: events, ground truth and the number of events each
/// hole produced.
#[derive(Debug, Clone)]
pub struct CleanSweep {
    pub stream: EventStream,
    pub truth: GroundTruth,
    pub hole_event_counts: Vec<usize>,
    pub duration_s: f64,
}

const NEAR_CENTER_PX: f64 = 10.0;

struct Kinematics {
    start: [f64; 2],
    vel: [f64; 2],
    duration: f64,
    dt: f64,
    steps: u64,
}

impl Kinematics {
    fn sample_time(&self, n: u64) -> f64 {
        if n >= self.steps {
            self.duration
        } else {
            n as f64 * self.dt
        }
    }
}

/// Projected pixel position of plane point `c` when the optical axis is at
/// `cam_mm`.
pub(crate) fn plane_to_pixel(scene: &SceneSpec, c: [f64; 2], cam_mm: [f64; 2]) -> (f64, f64) {
    let cam = &scene.camera;
    let z = cam.z_standoff_mm;
    let x = (c[0] - cam_mm[0]) / z;
    let y = (c[1] - cam_mm[1]) / z;
    (cam.fx * x + cam.skew * y + cam.u0, cam.fy * y + cam.v0)
}

pub(crate) fn camera_at(scene: &SceneSpec, t: f64) -> [f64; 2] {
    let v = scene.velocity_mm_s();
    [scene.start_mm[0] + v[0] * t, scene.start_mm[1] + v[1] * t]
}

fn to_ns(t: f64) -> u64 {
    (t * 1e9).round().max(0.0) as u64
}

/// Times in `[0, duration]` where `|d + v t| <= radius`, if any.
fn disc_interval(d: [f64; 2], v: [f64; 2], radius: f64) -> Option<(f64, f64)> {
    let a = v[0] * v[0] + v[1] * v[1];
    let b = 2.0 * (d[0] * v[0] + d[1] * v[1]);
    let c = d[0] * d[0] + d[1] * d[1] - radius * radius;
    if a == 0.0 {
        return (c <= 0.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / (2.0 * a), (-b + s) / (2.0 * a)))
}

/// Time bands where the line `d + v t` is within `margin` of the circle of
/// radius `radius`.
fn band_intervals(d: [f64; 2], v: [f64; 2], radius: f64, margin: f64, out: &mut Vec<(f64, f64)>) {
    let Some((a0, b0)) = disc_interval(d, v, radius + margin) else {
        return;
    };
    match (radius - margin > 0.0)
        .then(|| disc_interval(d, v, radius - margin))
        .flatten()
    {
        Some((a1, b1)) => {
            out.push((a0, a1));
            out.push((b1, b0));
        }
        None => out.push((a0, b0)),
    }
}

struct PixelScratch {
    bands: Vec<(f64, f64, usize)>,
    local: Vec<usize>,
}

fn pixel_events(
    x: u16,
    y: u16,
    origin: [f64; 2],
    profiles: &[HoleProfile],
    surface: f64,
    kin: &Kinematics,
    margin_mm: f64,
    threshold: f64,
    scratch: &mut PixelScratch,
    out: &mut Vec<(Event, usize)>,
) {
    scratch.bands.clear();
    scratch.local.clear();
    let speed = (kin.vel[0] * kin.vel[0] + kin.vel[1] * kin.vel[1]).sqrt();
    let mut tmp = Vec::with_capacity(4);
    for (hi, prof) in profiles.iter().enumerate() {
        let d = [origin[0] - prof.center_mm[0], origin[1] - prof.center_mm[1]];
        // perpendicular distance of the pixel's ground track to the center
        let perp = (d[0] * kin.vel[1] - d[1] * kin.vel[0]).abs() / speed;
        if perp > prof.reach_mm {
            continue;
        }
        scratch.local.push(hi);
        tmp.clear();
        band_intervals(d, kin.vel, prof.outer_mm(), margin_mm, &mut tmp);
        band_intervals(d, kin.vel, prof.inner_mm(), margin_mm, &mut tmp);
        for &(a, b) in &tmp {
            let (a, b) = (a.max(0.0), b.min(kin.duration));
            if a <= b {
                scratch.bands.push((a, b, hi));
            }
        }
    }
    if scratch.bands.is_empty() {
        return;
    }
    scratch
        .bands
        .sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let log_intensity = |t: f64| -> f64 {
        let p = [origin[0] + kin.vel[0] * t, origin[1] + kin.vel[1] * t];
        let i = surface
            + scratch
                .local
                .iter()
                .map(|&h| profiles[h].contribution(p))
                .sum::<f64>();
        i.ln()
    };

    let mut prev_t = 0.0;
    let mut prev_l = log_intensity(0.0);
    let mut reference = prev_l;
    let mut last_n: Option<u64> = None;
    for &(a, b, hole) in &scratch.bands {
        let first = (a / kin.dt).floor() as u64;
        let last = ((b / kin.dt).ceil() as u64).min(kin.steps);
        let start = match last_n {
            Some(n) if n >= first => n + 1,
            _ => first,
        };
        for n in start..=last {
            let t = kin.sample_time(n);
            if t <= prev_t {
                continue;
            }
            let l = log_intensity(t);
            while l - reference >= threshold {
                reference += threshold;
                let frac = (reference - prev_l) / (l - prev_l);
                let te = prev_t + frac * (t - prev_t);
                out.push((Event::new(x, y, to_ns(te), Polarity::Positive), hole));
            }
            while reference - l >= threshold {
                reference -= threshold;
                let frac = (reference - prev_l) / (l - prev_l);
                let te = prev_t + frac * (t - prev_t);
                out.push((Event::new(x, y, to_ns(te), Polarity::Negative), hole));
            }
            prev_t = t;
            prev_l = l;
            last_n = Some(n);
        }
    }
}

fn hole_truth(scene: &SceneSpec, id: usize, hole: &HoleSpec, duration: f64) -> HoleTruth {
    let cam = &scene.camera;
    let (u0, v0) = cam.principal_point();
    let (su, sv) = plane_to_pixel(scene, hole.center_mm, camera_at(scene, 0.0));
    let (eu, ev) = plane_to_pixel(scene, hole.center_mm, camera_at(scene, 1.0));
    // center(t) = a + b t in pixels
    let a = [su - u0, sv - v0];
    let b = [eu - su, ev - sv];
    let bb = b[0] * b[0] + b[1] * b[1];
    let t_cross = if bb == 0.0 {
        0.0
    } else {
        (-(a[0] * b[0] + a[1] * b[1]) / bb).clamp(0.0, duration)
    };
    let near = disc_interval(a, b, NEAR_CENTER_PX).and_then(|(lo, hi)| {
        let (lo, hi) = (lo.max(0.0), hi.min(duration));
        (lo <= hi).then(|| (to_ns(lo), to_ns(hi)))
    });
    let px_per_mm = cam.focal_px() / cam.z_standoff_mm;
    HoleTruth {
        id,
        hole: *hole,
        true_depth_mm: hole.true_depth_mm(),
        center_crossing_t_ns: to_ns(t_cross),
        near_center_ns: near,
        truth_px: CircleFitParams {
            r: hole.pilot_radius_mm * px_per_mm,
            big_r: hole.csk_radius_mm * px_per_mm,
            h: su + b[0] * t_cross,
            k: sv + b[1] * t_cross,
        },
        start_px: (su, sv),
    }
}

/// Ground truth for every hole of the scene over a sweep of `duration_s`.
pub fn ground_truth(scene: &SceneSpec, duration_s: f64) -> GroundTruth {
    GroundTruth {
        duration_ns: to_ns(duration_s),
        speed_mps: scene.twist.linear_speed(),
        holes: scene
            .holes
            .iter()
            .enumerate()
            .map(|(i, h)| hole_truth(scene, i, h, duration_s))
            .collect(),
    }
}

/// Noise-free events for a sweep of `duration_s` sampled every `dt_sim_s`.
pub fn simulate_clean(
    scene: &SceneSpec,
    duration_s: f64,
    dt_sim_s: f64,
) -> Result<CleanSweep, SimError> {
    scene.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SimError::InvalidScene(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if !(dt_sim_s > 0.0) {
        return Err(SimError::InvalidScene(format!(
            "time step must be positive, got {dt_sim_s}"
        )));
    }
    let max_dt = scene.max_sim_step_s();
    if dt_sim_s > max_dt {
        return Err(SimError::SubsamplingTooCoarse {
            dt_s: dt_sim_s,
            max_dt_s: max_dt,
        });
    }
    let cam = scene.camera;
    let truth = ground_truth(scene, duration_s);
    let mut counts = vec![0usize; scene.holes.len()];
    let vel = scene.velocity_mm_s();
    if vel == [0.0, 0.0] {
        return Ok(CleanSweep {
            stream: EventStream::new(cam.width, cam.height, Vec::new()),
            truth,
            hole_event_counts: counts,
            duration_s,
        });
    }

    let mm_per_px = cam.mm_per_px();
    let profiles = hole_profiles(scene, mm_per_px);
    let margin_mm = edge_margin_px(&scene.optics) * mm_per_px;
    let kin = Kinematics {
        start: scene.start_mm,
        vel,
        duration: duration_s,
        dt: dt_sim_s,
        steps: (duration_s / dt_sim_s).ceil() as u64,
    };
    let surface = scene.optics.surface_intensity;
    let threshold = scene.contrast_threshold;

    let rows: Vec<Vec<(Event, usize)>> = (0..cam.height)
        .into_par_iter()
        .map(|y| {
            let mut out = Vec::new();
            let mut scratch = PixelScratch {
                bands: Vec::new(),
                local: Vec::new(),
            };
            for x in 0..cam.width {
                let ray = back_project(x as f64, y as f64, cam.z_standoff_mm, &cam);
                let origin = [kin.start[0] + ray.x, kin.start[1] + ray.y];
                pixel_events(
                    x,
                    y,
                    origin,
                    &profiles,
                    surface,
                    &kin,
                    margin_mm,
                    threshold,
                    &mut scratch,
                    &mut out,
                );
            }
            out
        })
        .collect();

    let total = rows.iter().map(Vec::len).sum();
    let mut events = Vec::with_capacity(total);
    for row in rows {
        for (e, hole) in row {
            counts[hole] += 1;
            events.push(e);
        }
    }
    sort_events(&mut events);
    Ok(CleanSweep {
        stream: EventStream::new(cam.width, cam.height, events),
        truth,
        hole_event_counts: counts,
        duration_s,
    })
}

/// Canonical event order: time, then row, column and polarity.
pub fn sort_events(events: &mut [Event]) {
    events.par_sort_unstable_by_key(|e| (e.t_ns, e.y, e.x, e.polarity));
}

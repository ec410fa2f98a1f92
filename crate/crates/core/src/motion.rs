//! Motion compensation: flow from the camera twist, image of warped events
//! (IWE) and the surface of active events (SAE).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::BitMask;
use crate::types::{CameraModel, EventWindow, Twist};

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("twist is not planar: vz, wx, wy, wz = {0:?}")]
    NonPlanarTwist([f64; 4]),
    #[error("activation threshold must be at least 1")]
    InvalidThreshold,
}

const PLANAR_TOL: f64 = 1e-9;

/// Image-plane velocity in pixels per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Flow {
    pub du: f64,
    pub dv: f64,
}

impl Flow {
    pub fn new(du: f64, dv: f64) -> Self {
        Self { du, dv }
    }

    pub fn speed(&self) -> f64 {
        self.du.hypot(self.dv)
    }
}

/// Flow of a fronto-parallel plane at the standoff distance under a planar
/// translation. The image Jacobian reduces to `-F/Z` on the translation
/// terms once `vz` and all rotations vanish; skew couples `vy` into `u`.
pub fn flow_from_twist(twist: &Twist, cam: &CameraModel) -> Result<Flow, MotionError> {
    let off = [twist.vz, twist.wx, twist.wy, twist.wz];
    if off.iter().any(|v| v.abs() > PLANAR_TOL) {
        return Err(MotionError::NonPlanarTwist(off));
    }
    let z_m = cam.z_standoff_mm / 1000.0;
    Ok(Flow {
        du: -(cam.fx * twist.vx + cam.skew * twist.vy) / z_m,
        dv: -cam.fy * twist.vy / z_m,
    })
}

/// Signed polarity sums of the events of one window after warping them to
/// the window reference time.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwe {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<i32>,
    pub t_i_ns: u64,
    pub flow: Flow,
    /// Events whose warped position fell outside the image.
    pub dropped: usize,
}

impl Iwe {
    pub fn zeros(width: usize, height: usize, t_i_ns: u64, flow: Flow) -> Self {
        Self {
            width,
            height,
            grid: vec![0; width * height],
            t_i_ns,
            flow,
            dropped: 0,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.grid[y * self.width + x]
    }

    /// Variance of the grid, the contrast measure of the warp.
    pub fn variance(&self) -> f64 {
        let n = self.grid.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let (mut s, mut s2) = (0.0f64, 0.0f64);
        for &g in &self.grid {
            let g = g as f64;
            s += g;
            s2 += g * g;
        }
        let mean = s / n;
        (s2 / n - mean * mean).max(0.0)
    }

    pub fn abs_sum(&self) -> u64 {
        self.grid.iter().map(|g| g.unsigned_abs() as u64).sum()
    }
}

/// Warped pixel of an event at `(x, y)` observed `dt_s` after the reference
/// time. Rounds to nearest, ties away from zero.
#[inline]
pub fn warp_point(x: f64, y: f64, dt_s: f64, flow: Flow) -> (f64, f64) {
    (
        round_half_away(x - flow.du * dt_s),
        round_half_away(y - flow.dv * dt_s),
    )
}

/// `f64::round` without the library call it compiles to on baseline x86-64.
/// Exact for |v| < 2^52; larger values are already integers.
#[inline(always)]
fn round_half_away(v: f64) -> f64 {
    if !(v.abs() < 4.5e15) {
        return v;
    }
    let t = v as i64 as f64;
    let frac = v - t;
    if frac >= 0.5 {
        t + 1.0
    } else if frac <= -0.5 {
        t - 1.0
    } else {
        t
    }
}

pub fn warp_events(window: &EventWindow<'_>, flow: Flow, width: usize, height: usize) -> Iwe {
    let mut iwe = Iwe::zeros(width, height, window.t_i_ns(), flow);
    warp_into(window, flow, &mut iwe);
    iwe
}

/// Accumulates into an existing grid, which is cleared first. Lets callers
/// reuse the allocation across windows.
pub fn warp_into(window: &EventWindow<'_>, flow: Flow, iwe: &mut Iwe) {
    iwe.grid.iter_mut().for_each(|g| *g = 0);
    iwe.t_i_ns = window.t_i_ns();
    iwe.flow = flow;
    iwe.dropped = 0;
    let t_i = window.t_i_ns() as i64;
    let (w, h) = (iwe.width as f64, iwe.height as f64);
    for e in window.events() {
        let dt = (e.t_ns as i64 - t_i) as f64 * 1e-9;
        let (x, y) = warp_point(e.x as f64, e.y as f64, dt, flow);
        if x < 0.0 || y < 0.0 || x >= w || y >= h {
            iwe.dropped += 1;
            continue;
        }
        iwe.grid[y as usize * iwe.width + x as usize] += e.polarity.as_i32();
    }
}

/// Activated pixels that survive the opening.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SaePoints {
    /// Row-major `(x, y)` coordinates.
    pub points: Vec<(u16, u16)>,
}

impl SaePoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    /// Square of half-width `half` centered on `(cx, cy)`, clipped to the image.
    pub fn around(cx: f64, cy: f64, half: f64, width: usize, height: usize) -> Self {
        let lo = |c: f64, n: usize| ((c - half).floor().max(0.0) as usize).min(n);
        let hi = |c: f64, n: usize| ((c + half).ceil().max(0.0) as usize + 1).min(n);
        Self {
            x0: lo(cx, width),
            y0: lo(cy, height),
            x1: hi(cx, width),
            y1: hi(cy, height),
        }
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }
}

pub fn activation_mask(iwe: &Iwe, threshold: u32) -> BitMask {
    activation_mask_in(iwe, threshold, PixelRect::full(iwe.width, iwe.height))
}

/// Activation of the pixels in `rect`, in rect-local coordinates.
fn activation_mask_in(iwe: &Iwe, threshold: u32, rect: PixelRect) -> BitMask {
    let mut mask = BitMask::new(rect.width(), rect.height());
    for y in rect.y0..rect.y1 {
        let row = &iwe.grid[y * iwe.width + rect.x0..y * iwe.width + rect.x1];
        for (x, g) in row.iter().enumerate() {
            if g.unsigned_abs() >= threshold {
                mask.set(x, y - rect.y0);
            }
        }
    }
    mask
}

pub fn extract_sae(
    iwe: &Iwe,
    threshold: u32,
    opening_radius: usize,
) -> Result<SaePoints, MotionError> {
    extract_sae_in(
        iwe,
        threshold,
        opening_radius,
        PixelRect::full(iwe.width, iwe.height),
    )
}

/// SAE restricted to `rect`. Pixels outside the rectangle are treated as
/// background by the opening, exactly like pixels outside the image.
pub fn extract_sae_in(
    iwe: &Iwe,
    threshold: u32,
    opening_radius: usize,
    rect: PixelRect,
) -> Result<SaePoints, MotionError> {
    if threshold < 1 {
        return Err(MotionError::InvalidThreshold);
    }
    let rect = PixelRect {
        x1: rect.x1.min(iwe.width),
        y1: rect.y1.min(iwe.height),
        ..rect
    };
    let opened = activation_mask_in(iwe, threshold, rect).open(opening_radius);
    let (dx, dy) = (rect.x0 as u16, rect.y0 as u16);
    Ok(SaePoints {
        points: opened
            .ones()
            .into_iter()
            .map(|(x, y)| (x + dx, y + dy))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_clean, SceneSpec, Workpiece};
    use crate::types::{Event, Polarity};
    use nalgebra::{Matrix2x6, Vector6};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraModel {
        CameraModel::default_sweep_camera()
    }

    #[test]
    fn flow_examples() {
        let f = flow_from_twist(&Twist::planar(0.5, 0.0), &cam()).unwrap();
        assert!((f.du + 5555.56).abs() < 0.01);
        assert_eq!(f.dv, 0.0);
        assert_eq!(
            flow_from_twist(&Twist::default(), &cam()).unwrap(),
            Flow::new(0.0, 0.0)
        );
        let bad = Twist::new(0.1, 0.0, 0.0, 0.0, 0.0, 1e-6).unwrap();
        assert!(matches!(
            flow_from_twist(&bad, &cam()),
            Err(MotionError::NonPlanarTwist(_))
        ));
    }

    // Interaction matrix in normalized coordinates, mapped to pixels by the
    // intrinsic matrix.
    fn full_jacobian_flow(cam: &CameraModel, u: f64, v: f64, z: f64, twist: &Twist) -> (f64, f64) {
        let y = (v - cam.v0) / cam.fy;
        let x = (u - cam.u0 - cam.skew * y) / cam.fx;
        let l = Matrix2x6::new(
            -1.0 / z,
            0.0,
            x / z,
            x * y,
            -(1.0 + x * x),
            y,
            0.0,
            -1.0 / z,
            y / z,
            1.0 + y * y,
            -x * y,
            -x,
        );
        let xd = l * Vector6::from_row_slice(&twist.as_array());
        (cam.fx * xd[0] + cam.skew * xd[1], cam.fy * xd[1])
    }

    #[test]
    fn flow_matches_full_jacobian() {
        let c = CameraModel::new(980.0, 1015.0, 2.5, 318.0, 242.0, 640, 480, 90.0).unwrap();
        for (vx, vy) in [(0.5, 0.0), (-0.13, 0.27), (0.0, -0.05)] {
            let t = Twist::planar(vx, vy);
            let f = flow_from_twist(&t, &c).unwrap();
            for (u, v) in [(0.0, 0.0), (320.0, 240.0), (600.0, 17.0)] {
                let (du, dv) = full_jacobian_flow(&c, u, v, 0.09, &t);
                assert!((du - f.du).abs() < 1e-9 * du.abs().max(1.0));
                assert!((dv - f.dv).abs() < 1e-9 * dv.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_event_warp() {
        let events = [
            Event::new(0, 0, 0, Polarity::Positive),
            Event::new(100, 50, 100_000_000, Polarity::Negative),
        ];
        let w = EventWindow::new(&events);
        let iwe = warp_events(&w, Flow::new(10.0, 0.0), 200, 100);
        assert_eq!(iwe.get(99, 50), -1);
        assert_eq!(iwe.get(0, 0), 1);
        assert_eq!(iwe.dropped, 0);
    }

    #[test]
    fn ties_round_away_from_zero() {
        assert_eq!(
            warp_point(10.0, 10.0, 0.5, Flow::new(1.0, -1.0)),
            (10.0, 11.0)
        );
        assert_eq!(
            warp_point(10.0, 10.0, 0.5, Flow::new(-1.0, 3.0)),
            (11.0, 9.0)
        );
    }

    #[test]
    fn out_of_bounds_warps_are_counted() {
        let events = [
            Event::new(0, 0, 0, Polarity::Positive),
            Event::new(1, 0, 1_000_000_000, Polarity::Positive),
        ];
        let iwe = warp_events(&EventWindow::new(&events), Flow::new(5.0, 0.0), 10, 10);
        assert_eq!(iwe.dropped, 1);
        assert_eq!(iwe.abs_sum(), 1);
    }

    #[test]
    fn sae_examples() {
        let empty = Iwe::zeros(20, 20, 0, Flow::default());
        assert!(extract_sae(&empty, 1, 1).unwrap().is_empty());

        let mut lone = empty.clone();
        lone.grid[10 * 20 + 10] = -3;
        assert!(extract_sae(&lone, 1, 1).unwrap().is_empty());

        let mut block = empty.clone();
        let mut expected = Vec::new();
        for y in 5..10 {
            for x in 5..10 {
                block.grid[y * 20 + x] = if (x + y) % 2 == 0 { 1 } else { -2 };
                expected.push((x as u16, y as u16));
            }
        }
        assert_eq!(extract_sae(&block, 1, 1).unwrap().points, expected);
        assert_eq!(
            extract_sae(&block, 0, 1),
            Err(MotionError::InvalidThreshold)
        );
    }

    #[test]
    fn rect_sae_equals_masked_full_sae() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut iwe = Iwe::zeros(70, 50, 0, Flow::default());
        for g in iwe.grid.iter_mut() {
            *g = if rng.random_bool(0.55) {
                rng.random_range(-2..=2)
            } else {
                0
            };
        }
        // a solid block straddling the rectangle's corner
        for y in 4..14 {
            for x in 38..48 {
                iwe.grid[y * 70 + x] = 1;
            }
        }
        let rect = PixelRect::around(30.0, 20.0, 12.0, 70, 50);
        assert_eq!((rect.x0, rect.x1, rect.y0, rect.y1), (18, 43, 8, 33));
        let mut masked = iwe.clone();
        for y in 0..50 {
            for x in 0..70 {
                if !(rect.x0..rect.x1).contains(&x) || !(rect.y0..rect.y1).contains(&y) {
                    masked.grid[y * 70 + x] = 0;
                }
            }
        }
        let got = extract_sae_in(&iwe, 1, 1, rect).unwrap();
        assert!(!got.is_empty());
        assert_eq!(got, extract_sae(&masked, 1, 1).unwrap());
        let edge = PixelRect::around(65.0, 2.0, 12.0, 70, 50);
        assert_eq!((edge.x0, edge.x1, edge.y0, edge.y1), (53, 70, 0, 15));
    }

    #[test]
    fn correct_flow_sharpens_simulated_edges() {
        let scene = SceneSpec::preset(Workpiece::A, 0.5).unwrap();
        let clean = simulate_clean(&scene, 0.12, scene.max_sim_step_s()).unwrap();
        let windows = clean.stream.windows(10_000);
        let w = windows.iter().max_by_key(|w| w.count()).unwrap();
        let (wd, ht) = (640, 480);
        let flow = flow_from_twist(&scene.twist, &scene.camera).unwrap();
        let sharp = warp_events(w, flow, wd, ht).variance();
        let blurred = warp_events(w, Flow::default(), wd, ht).variance();
        assert!(sharp > blurred, "sharp {sharp} blurred {blurred}");
    }

    fn arb_events() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec(
            (0u16..64, 0u16..48, 0u64..50_000_000, any::<bool>()),
            1..200,
        )
        .prop_map(|mut v| {
            v.sort_by_key(|e| e.2);
            v.into_iter()
                .map(|(x, y, t, p)| Event::new(x, y, t, Polarity::from_sign(p)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn rounding_matches_std(v in -1e7f64..1e7, k in -2000i32..2000) {
            prop_assert_eq!(round_half_away(v), v.round());
            let half = k as f64 + 0.5;
            prop_assert_eq!(round_half_away(half), half.round());
            prop_assert_eq!(round_half_away(-half), (-half).round());
        }

        #[test]
        fn zero_flow_is_plain_accumulation(events in arb_events()) {
            let iwe = warp_events(&EventWindow::new(&events), Flow::default(), 64, 48);
            let mut acc = vec![0i32; 64 * 48];
            for e in &events {
                acc[e.y as usize * 64 + e.x as usize] += e.polarity.as_i32();
            }
            prop_assert_eq!(iwe.grid, acc);
            prop_assert_eq!(iwe.dropped, 0);
        }

        #[test]
        fn warp_is_linear_in_time_shift(
            events in arb_events(),
            du in -400.0f64..400.0,
            dv in -400.0f64..400.0,
            shift_ms in 1u64..20,
        ) {
            // Shifting every timestamp by dt moves the reference by dt too,
            // so the warp must not change; equivalently each warped position
            // equals the pre-shifted position warped over the original dt.
            let flow = Flow::new(du, dv);
            let shift = shift_ms * 1_000_000;
            let shifted: Vec<Event> = events
                .iter()
                .map(|e| Event::new(e.x, e.y, e.t_ns + shift, e.polarity))
                .collect();
            let a = warp_events(&EventWindow::new(&events), flow, 64, 48);
            let b = warp_events(&EventWindow::new(&shifted), flow, 64, 48);
            prop_assert_eq!(&a.grid, &b.grid);
            // Shifting timestamps with the reference held fixed is the same
            // as pre-shifting positions by the flow.
            let t_i = events[0].t_ns as f64 * 1e-9;
            let dt_s = shift as f64 * 1e-9;
            for e in &events {
                let t = e.t_ns as f64 * 1e-9;
                let (x, y) = (e.x as f64, e.y as f64);
                let full = (x - du * (t + dt_s - t_i), y - dv * (t + dt_s - t_i));
                let pre = (x - du * dt_s, y - dv * dt_s);
                let split = (pre.0 - du * (t - t_i), pre.1 - dv * (t - t_i));
                prop_assert!((full.0 - split.0).abs() < 1e-9 && (full.1 - split.1).abs() < 1e-9);
                let near_tie = |a: f64| (a.fract().abs() - 0.5).abs() < 1e-6;
                if !near_tie(full.0) && !near_tie(full.1) {
                    prop_assert_eq!((full.0.round(), full.1.round()), (split.0.round(), split.1.round()));
                }
            }
        }

        #[test]
        fn grid_mass_is_bounded_by_event_count(events in arb_events(), du in -2000.0f64..2000.0) {
            let iwe = warp_events(&EventWindow::new(&events), Flow::new(du, 0.0), 64, 48);
            prop_assert!(iwe.abs_sum() + iwe.dropped as u64 <= events.len() as u64);
        }

        #[test]
        fn sae_is_subset_of_activation(events in arb_events(), thr in 1u32..3) {
            let iwe = warp_events(&EventWindow::new(&events), Flow::default(), 64, 48);
            let sae = extract_sae(&iwe, thr, 1).unwrap();
            for (x, y) in sae.points {
                prop_assert!(iwe.get(x as usize, y as usize).unsigned_abs() >= thr);
            }
        }
    }
}

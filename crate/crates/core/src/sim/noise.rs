//! Sensor noise and inner-wall reflection outliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::events::{camera_at, plane_to_pixel, sort_events, CleanSweep};
use super::scene::{NoiseSpec, SceneSpec};
use super::SimError;
use crate::types::{Event, EventStream, Polarity};

/// Reflections occupy this band of the pilot radius.
const REFLECTION_RHO: (f64, f64) = (0.55, 0.85);
const REFLECTION_ARC_RAD: f64 = std::f64::consts::FRAC_PI_2;

/// Applies `noise` to a clean sweep. Deterministic for a fixed seed.
pub fn add_noise(
    clean: &CleanSweep,
    scene: &SceneSpec,
    noise: &NoiseSpec,
) -> Result<EventStream, SimError> {
    noise.validate()?;
    let cam = &scene.camera;
    let (w, h) = (cam.width, cam.height);
    if noise.is_silent() {
        return Ok(clean.stream.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let duration_ns = clean.truth.duration_ns;
    let mut events = Vec::with_capacity(clean.stream.len() + clean.stream.len() / 8);

    let pos = (noise.edge_jitter_px > 0.0).then(|| Normal::new(0.0, noise.edge_jitter_px).unwrap());
    let time = (noise.timestamp_jitter_ns > 0.0)
        .then(|| Normal::new(0.0, noise.timestamp_jitter_ns).unwrap());
    for e in &clean.stream.events {
        let mut out = *e;
        if let Some(n) = &pos {
            let x = (e.x as f64 + n.sample(&mut rng)).round();
            let y = (e.y as f64 + n.sample(&mut rng)).round();
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                continue;
            }
            out.x = x as u16;
            out.y = y as u16;
        }
        if let Some(n) = &time {
            let t = (e.t_ns as f64 + n.sample(&mut rng)).round();
            out.t_ns = (t.max(0.0) as u64).min(duration_ns);
        }
        events.push(out);
    }

    if noise.reflection_arc_fraction > 0.0 {
        let f = noise.reflection_arc_fraction;
        for (hole, &count) in scene.holes.iter().zip(&clean.hole_event_counts) {
            let n = (f / (1.0 - f) * count as f64).round() as usize;
            let Some((t0, t1)) = visible_interval(scene, hole.center_mm, clean.duration_s) else {
                continue;
            };
            let theta0 = rng.random_range(0.0..std::f64::consts::TAU);
            for _ in 0..n {
                let rho =
                    hole.pilot_radius_mm * rng.random_range(REFLECTION_RHO.0..REFLECTION_RHO.1);
                let theta = theta0 + rng.random_range(0.0..REFLECTION_ARC_RAD);
                let p = [
                    hole.center_mm[0] + rho * theta.cos(),
                    hole.center_mm[1] + rho * theta.sin(),
                ];
                let t = rng.random_range(t0..=t1);
                let (u, v) = plane_to_pixel(scene, p, camera_at(scene, t));
                let (u, v) = (u.round(), v.round());
                if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
                    continue;
                }
                events.push(Event::new(
                    u as u16,
                    v as u16,
                    (t * 1e9).round() as u64,
                    Polarity::Positive,
                ));
            }
        }
    }

    if noise.background_rate_hz_per_px > 0.0 {
        let lambda = noise.background_rate_hz_per_px * cam.pixel_count() as f64 * clean.duration_s;
        let count = if lambda > 0.0 {
            Poisson::new(lambda).unwrap().sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            events.push(Event::new(
                rng.random_range(0..w),
                rng.random_range(0..h),
                rng.random_range(0..=duration_ns),
                Polarity::from_sign(rng.random_bool(0.5)),
            ));
        }
    }

    sort_events(&mut events);
    Ok(EventStream::new(w, h, events))
}

/// Time span during which the projected hole center lies on the sensor.
fn visible_interval(scene: &SceneSpec, center: [f64; 2], duration: f64) -> Option<(f64, f64)> {
    let cam = &scene.camera;
    let (su, sv) = plane_to_pixel(scene, center, camera_at(scene, 0.0));
    let (eu, ev) = plane_to_pixel(scene, center, camera_at(scene, 1.0));
    let (du, dv) = (eu - su, ev - sv);
    let mut lo = 0.0f64;
    let mut hi = duration;
    for (start, rate, limit) in [
        (su, du, cam.width as f64 - 1.0),
        (sv, dv, cam.height as f64 - 1.0),
    ] {
        if rate == 0.0 {
            if start < 0.0 || start > limit {
                return None;
            }
            continue;
        }
        let (a, b) = ((0.0 - start) / rate, (limit - start) / rate);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo <= hi).then_some((lo, hi))
}

//! Radial shading model of a countersunk hole and frame rendering.

use nalgebra::Vector3;

use super::scene::{HoleSpec, Optics, SceneSpec};
use super::SimError;
use crate::geometry::back_project;

/// Blurred step: the standard normal CDF, via the Abramowitz-Stegun 7.1.26
/// erfc (absolute error below 1.5e-7, one `exp`).
#[inline]
fn soft_step(x: f64) -> f64 {
    let z = x.abs() * std::f64::consts::FRAC_1_SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * z);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let tail = 0.5 * poly * (-z * z).exp();
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Standard deviation of the edge spread in pixels: optical blur combined
/// with the box footprint of a pixel.
pub fn edge_sigma_px(optics: &Optics) -> f64 {
    (optics.blur_px * optics.blur_px + 1.0 / 12.0).sqrt()
}

/// Radius beyond an edge where its blur no longer changes the intensity
/// measurably, in pixels.
pub fn edge_margin_px(optics: &Optics) -> f64 {
    5.0 * edge_sigma_px(optics) + 0.5
}

/// Shading of one hole as a function of distance from its center.
#[derive(Debug, Clone, Copy)]
pub struct HoleProfile {
    pub center_mm: [f64; 2],
    inner: f64,
    outer: f64,
    sigma: f64,
    optics: Optics,
    /// Beyond this radius the profile equals the surface intensity.
    pub reach_mm: f64,
}

impl HoleProfile {
    pub fn new(hole: &HoleSpec, optics: &Optics, mm_per_px: f64) -> Self {
        Self {
            center_mm: hole.center_mm,
            inner: hole.pilot_radius_mm,
            outer: hole.csk_radius_mm,
            sigma: edge_sigma_px(optics) * mm_per_px,
            optics: *optics,
            reach_mm: hole.csk_radius_mm + edge_margin_px(optics) * mm_per_px,
        }
    }

    pub fn inner_mm(&self) -> f64 {
        self.inner
    }

    pub fn outer_mm(&self) -> f64 {
        self.outer
    }

    /// Intensity at distance `rho` (mm) from the center.
    #[inline]
    pub fn intensity(&self, rho: f64) -> f64 {
        let o = &self.optics;
        let t = ((rho - self.inner) / (self.outer - self.inner)).clamp(0.0, 1.0);
        let wall = o.wall_inner_intensity + t * (o.wall_outer_intensity - o.wall_inner_intensity);
        let s_in = soft_step((rho - self.inner) / self.sigma);
        let s_out = soft_step((rho - self.outer) / self.sigma);
        o.bore_intensity
            + s_in * (wall - o.bore_intensity)
            + s_out * (o.surface_intensity - o.wall_outer_intensity)
    }

    /// Offset of the profile from the flat surface at plane point `p`.
    #[inline]
    pub fn contribution(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center_mm[0];
        let dy = p[1] - self.center_mm[1];
        let d2 = dx * dx + dy * dy;
        if d2 >= self.reach_mm * self.reach_mm {
            0.0
        } else {
            self.intensity(d2.sqrt()) - self.optics.surface_intensity
        }
    }
}

pub fn hole_profiles(scene: &SceneSpec, mm_per_px: f64) -> Vec<HoleProfile> {
    scene
        .holes
        .iter()
        .map(|h| HoleProfile::new(h, &scene.optics, mm_per_px))
        .collect()
}

/// Scene intensity at a workpiece plane point.
pub fn intensity_at(profiles: &[HoleProfile], surface: f64, p: [f64; 2]) -> f64 {
    surface + profiles.iter().map(|h| h.contribution(p)).sum::<f64>()
}

/// Row-major grayscale frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Renders the frame seen by the camera whose optical axis is at
/// `cam_position_m` (x, y on the workpiece plane; z = height above it).
pub fn render_intensity(
    scene: &SceneSpec,
    cam_position_m: &Vector3<f64>,
) -> Result<GrayImage, SimError> {
    let z_mm = cam_position_m.z * 1000.0;
    if !(z_mm > 0.0) {
        return Err(SimError::InvalidScene(
            "camera must be above the workpiece plane".into(),
        ));
    }
    let cam = &scene.camera;
    let mm_per_px = z_mm / cam.focal_px();
    let profiles = hole_profiles(scene, mm_per_px);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let cx = cam_position_m.x * 1000.0;
    let cy = cam_position_m.y * 1000.0;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let ray = back_project(x as f64, y as f64, z_mm, cam);
            data.push(intensity_at(
                &profiles,
                scene.optics.surface_intensity,
                [cx + ray.x, cy + ray.y],
            ));
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data,
    })
}

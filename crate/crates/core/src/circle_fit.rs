//! Concentric two-circle fit with radial hard association and a
//! Huber-weighted Levenberg-Marquardt solver.
//!
//! Residuals are squared-distance, `ρ² − r²` for inner points and
//! `ρ² − R²` for outer ones, so the Huber threshold is in px². The
//! association is recomputed at every trial parameter vector; a step is
//! accepted only if the cost evaluated that way decreases.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::CircleFitParams;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("initial annulus too thin: R0 - r0 = {0:.3} px")]
    DegenerateAnnulus(f64),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}

pub const MIN_POINTS: usize = 8;
const MIN_ANNULUS_PX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Huber threshold in px². `f64::INFINITY` gives ordinary least squares.
    pub delta: f64,
    pub max_iters: usize,
    pub lambda_init: f64,
    pub rel_cost_tol: f64,
    pub grad_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            max_iters: 100,
            lambda_init: 1e-3,
            rel_cost_tol: 1e-9,
            grad_tol: 1e-9,
        }
    }
}

impl FitConfig {
    pub fn ols() -> Self {
        Self {
            delta: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.delta > 0.0) {
            return Err(FitError::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.max_iters == 0 {
            return Err(FitError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return Err(FitError::InvalidConfig(format!(
                "lambda_init must be positive, got {}",
                self.lambda_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: CircleFitParams,
    pub iterations: usize,
    pub final_cost: f64,
    pub converged: bool,
    /// Fraction of residuals with `|ξ| ≤ δ` at the solution.
    pub inlier_fraction: f64,
    /// Cost after initialization and after every accepted step.
    pub cost_history: Vec<f64>,
}

/// Indices into the fitted point slice, each in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RadialAssignment {
    pub inner: Vec<usize>,
    pub outer: Vec<usize>,
}

pub fn huber(xi: f64, delta: f64) -> f64 {
    let a = xi.abs();
    if a <= delta {
        xi * xi
    } else {
        2.0 * delta * a - delta * delta
    }
}

/// IRLS weight making `w ξ²` match the Huber gradient.
#[inline]
fn huber_weight(xi: f64, delta: f64) -> f64 {
    let a = xi.abs();
    if a <= delta {
        1.0
    } else {
        delta / a
    }
}

/// Centroid start with radii split at the median radial distance.
pub fn init_params(points: &[(f64, f64)]) -> Result<[f64; 4], FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints {
            got: points.len(),
            min: MIN_POINTS,
        });
    }
    let n = points.len() as f64;
    let h = points.iter().map(|p| p.0).sum::<f64>() / n;
    let k = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut rho: Vec<f64> = points.iter().map(|p| (p.0 - h).hypot(p.1 - k)).collect();
    rho.sort_by(f64::total_cmp);
    let half = rho.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok([mean(&rho[..half]), mean(&rho[half..]), h, k])
}

/// Inner iff `|ρ − r| ≤ |ρ − R|`.
pub fn associate_radial(points: &[(f64, f64)], p: &[f64; 4]) -> RadialAssignment {
    let mut a = RadialAssignment::default();
    for (i, &(x, y)) in points.iter().enumerate() {
        let rho = (x - p[2]).hypot(y - p[3]);
        if (rho - p[0]).abs() <= (rho - p[1]).abs() {
            a.inner.push(i);
        } else {
            a.outer.push(i);
        }
    }
    a
}

#[inline]
fn sq_dist(pt: (f64, f64), p: &[f64; 4]) -> f64 {
    let (dx, dy) = (pt.0 - p[2], pt.1 - p[3]);
    dx * dx + dy * dy
}

/// Inner residuals in input order, then outer.
pub fn residuals(points: &[(f64, f64)], assign: &RadialAssignment, p: &[f64; 4]) -> Vec<f64> {
    let inner = assign
        .inner
        .iter()
        .map(|&i| sq_dist(points[i], p) - p[0] * p[0]);
    let outer = assign
        .outer
        .iter()
        .map(|&i| sq_dist(points[i], p) - p[1] * p[1]);
    inner.chain(outer).collect()
}

/// Rows of `∂ξ/∂[r, R, h, k]` in the order of [`residuals`].
pub fn jacobian(points: &[(f64, f64)], assign: &RadialAssignment, p: &[f64; 4]) -> Vec<[f64; 4]> {
    let row = |i: usize, outer: bool| {
        let (x, y) = points[i];
        let (dr, dbig) = if outer {
            (0.0, -2.0 * p[1])
        } else {
            (-2.0 * p[0], 0.0)
        };
        [dr, dbig, -2.0 * (x - p[2]), -2.0 * (y - p[3])]
    };
    assign
        .inner
        .iter()
        .map(|&i| row(i, false))
        .chain(assign.outer.iter().map(|&i| row(i, true)))
        .collect()
}

/// Huber cost with the association recomputed at `p`.
pub fn cost(points: &[(f64, f64)], p: &[f64; 4], delta: f64) -> f64 {
    let mut c = 0.0;
    for &pt in points {
        let d2 = sq_dist(pt, p);
        let rho = d2.sqrt();
        let target = if (rho - p[0]).abs() <= (rho - p[1]).abs() {
            p[0]
        } else {
            p[1]
        };
        c += huber(d2 - target * target, delta);
    }
    c
}

struct Normal {
    a: Matrix4<f64>,
    g: Vector4<f64>,
}

fn normal_equations(points: &[(f64, f64)], p: &[f64; 4], delta: f64) -> Normal {
    let assign = associate_radial(points, p);
    let xi = residuals(points, &assign, p);
    let jac = jacobian(points, &assign, p);
    let mut a = Matrix4::zeros();
    let mut g = Vector4::zeros();
    for (row, &e) in jac.iter().zip(&xi) {
        let w = huber_weight(e, delta);
        let j = Vector4::from_row_slice(row);
        a += w * j * j.transpose();
        g += w * e * j;
    }
    Normal { a, g }
}

pub fn fit_circles(points: &[(f64, f64)], config: &FitConfig) -> Result<FitReport, FitError> {
    config.validate()?;
    let init = init_params(points)?;
    if init[1] - init[0] < MIN_ANNULUS_PX {
        return Err(FitError::DegenerateAnnulus(init[1] - init[0]));
    }
    Ok(fit_from(points, init, config))
}

/// LM iterations from a given start; the start must satisfy `r < R`.
pub fn fit_from(points: &[(f64, f64)], init: [f64; 4], config: &FitConfig) -> FitReport {
    let delta = config.delta;
    let mut p = init;
    let mut c = cost(points, &p, delta);
    let mut history = vec![c];
    let mut lambda = config.lambda_init;
    let mut converged = c == 0.0;
    let mut iterations = 0;

    while !converged && iterations < config.max_iters {
        iterations += 1;
        let Normal { a, g } = normal_equations(points, &p, delta);
        if g.amax() < config.grad_tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a;
            for d in 0..4 {
                damped[(d, d)] += lambda * a[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-g)) else {
                lambda *= 5.0;
                continue;
            };
            let mut trial = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            trial[0] = trial[0].abs();
            trial[1] = trial[1].abs();
            if trial[0] > trial[1] {
                trial.swap(0, 1);
            }
            let tc = cost(points, &trial, delta);
            if tc < c {
                let rel = (c - tc) / c;
                p = trial;
                c = tc;
                history.push(c);
                lambda *= 0.2;
                accepted = true;
                if rel < config.rel_cost_tol || c == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 5.0;
        }
        if !accepted {
            // no descent direction left at any damping: a stationary point
            converged = true;
            break;
        }
    }

    let assign = associate_radial(points, &p);
    let xi = residuals(points, &assign, &p);
    let inliers = xi.iter().filter(|e| e.abs() <= delta).count();
    FitReport {
        params: CircleFitParams::from_array(p),
        iterations,
        final_cost: c,
        converged,
        inlier_fraction: if xi.is_empty() {
            0.0
        } else {
            inliers as f64 / xi.len() as f64
        },
        cost_history: history,
    }
}

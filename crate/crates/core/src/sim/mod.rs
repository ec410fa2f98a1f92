//! Synthetic event streams of a camera sweeping a countersunk workpiece.

mod events;
mod noise;
mod render;
mod scene;

use thiserror::Error;

pub use events::{ground_truth, simulate_clean, sort_events, CleanSweep, GroundTruth, HoleTruth};
pub use noise::add_noise;
pub use render::{render_intensity, GrayImage, HoleProfile};
pub use scene::{
    HoleSpec, NoiseSpec, Optics, SceneSpec, Workpiece, DEFAULT_CONTRAST_THRESHOLD,
    DEFAULT_CSK_ANGLE_DEG, DEFAULT_HOLE_COUNT, DEFAULT_SPAN_M, SWEEP_SPEEDS_MPS,
};

use crate::types::EventStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("simulation step {dt_s:e} s exceeds the half-pixel limit {max_dt_s:e} s")]
    SubsamplingTooCoarse { dt_s: f64, max_dt_s: f64 },
}

/// A simulated recording with its ground truth.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stream: EventStream,
    pub truth: GroundTruth,
}

/// Clean events plus the scene's noise.
pub fn generate_events(
    scene: &SceneSpec,
    duration_s: f64,
    dt_sim_s: f64,
) -> Result<SimOutput, SimError> {
    let clean = simulate_clean(scene, duration_s, dt_sim_s)?;
    let stream = add_noise(&clean, scene, &scene.noise)?;
    Ok(SimOutput {
        stream,
        truth: clean.truth,
    })
}

/// Full sweep of the scene at the coarsest admissible time step.
pub fn simulate_sweep(scene: &SceneSpec) -> Result<SimOutput, SimError> {
    generate_events(scene, scene.sweep_duration_s(), scene.max_sim_step_s())
}

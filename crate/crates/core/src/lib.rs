//! Event-camera inspection of countersunk holes.
//!
//! A camera sweeps a workpiece at constant speed; its events are warped by
//! the flow implied by the known twist into sharp images, denoised with a
//! morphological opening, split into holes by mean-shift and fitted with
//! two concentric circles under a Huber loss. The radii then give the
//! countersink depth.

pub mod bench;
pub mod circle_fit;
pub mod cluster;
pub mod geometry;
pub mod inspect;
pub mod io;
pub mod morphology;
pub mod motion;
pub mod sim;
pub mod types;

pub use types::*;

//! TOML scene, camera and pipeline configs. Keys carry their units
//! (`z_standoff_mm`, `fx_px`, `vx_mps`, ...).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::IoError;
use crate::sim::SceneSpec;

pub fn parse_toml<T: DeserializeOwned>(text: &str, context: &str) -> Result<T, IoError> {
    toml::from_str(text).map_err(|e| IoError::parse(context, e))
}

pub fn to_toml_string<T: Serialize>(value: &T) -> Result<String, IoError> {
    toml::to_string(value).map_err(|e| IoError::parse("toml output", e))
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_toml(&text, &path.display().to_string())
}

pub fn save_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    std::fs::write(path, to_toml_string(value)?).map_err(|e| IoError::file(path, e))
}

/// Loads and validates a scene.
pub fn load_scene(path: &Path) -> Result<SceneSpec, IoError> {
    let scene: SceneSpec = load_toml(path)?;
    scene
        .validate()
        .map_err(|e| IoError::parse(path.display().to_string(), e))?;
    Ok(scene)
}

//! Binary PGM (P5) output of IWE grids: 16-bit big-endian samples with the
//! signed sum offset by 32768.

use std::path::Path;

use super::IoError;
use crate::motion::Iwe;

pub const PGM_OFFSET: i32 = 32768;

pub fn iwe_to_pgm(iwe: &Iwe) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", iwe.width, iwe.height).into_bytes();
    out.reserve(iwe.grid.len() * 2);
    for &v in &iwe.grid {
        let s = (v.saturating_add(PGM_OFFSET)).clamp(0, 65535) as u16;
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn write_pgm(path: &Path, iwe: &Iwe) -> Result<(), IoError> {
    std::fs::write(path, iwe_to_pgm(iwe)).map_err(|e| IoError::file(path, e))
}

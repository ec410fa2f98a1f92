//! File formats: EVS1 event files, TOML configs, ground-truth manifests,
//! CSV/JSON reports and PGM images.

pub mod config;
pub mod evs1;
pub mod manifest;
pub mod pgm;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{load_toml, parse_toml, save_toml, to_toml_string};
pub use evs1::{read_events, write_events};
pub use manifest::{read_manifest, write_manifest, Manifest};
pub use pgm::{iwe_to_pgm, write_pgm};
pub use report::{read_csv, write_csv, write_json, ReportRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("bad magic {0:?}, expected \"EVS1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported EVS1 version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("header declares {header} records but the body holds {body_bytes} bytes")]
    CountMismatch { header: u64, body_bytes: u64 },
    #[error("record {index}: bad polarity {value} at byte offset {offset}")]
    BadPolarity { index: u64, offset: u64, value: i8 },
    #[error("record {index}: negative timestamp {t_ns} at byte offset {offset}")]
    NegativeTimestamp { index: u64, offset: u64, t_ns: i64 },
    #[error("record {index}: pixel ({x}, {y}) outside the sensor at byte offset {offset}")]
    OutOfBounds {
        index: u64,
        offset: u64,
        x: u16,
        y: u16,
    },
    #[error("record {index}: timestamp goes backwards at byte offset {offset}")]
    Unsorted { index: u64, offset: u64 },
    #[error("timestamp {0} ns does not fit in i64")]
    TimestampOverflow(u64),
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
}

impl IoError {
    pub fn file(path: &Path, err: std::io::Error) -> Self {
        Self::File {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub fn parse(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self::Parse {
            context: context.into(),
            message: err.to_string(),
        }
    }
}

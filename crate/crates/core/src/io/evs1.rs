//! EVS1: little-endian event files with fixed 16-byte records.
//!
//! ```text
//! header (18 bytes)
//!   0  magic    b"EVS1"
//!   4  u16      version (1)
//!   6  u16      width
//!   8  u16      height
//!  10  u64      record count
//! record (16 bytes)
//!   0  i64      t_ns
//!   8  u16      x
//!  10  u16      y
//!  12  i8       polarity (+1 / -1)
//!  13  [u8; 3]  zero padding
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::IoError;
use crate::types::{Event, EventStream, Polarity};

pub const MAGIC: [u8; 4] = *b"EVS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;
pub const RECORD_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evs1Header {
    pub version: u16,
    pub width: u16,
    pub height: u16,
    pub count: u64,
}

impl Evs1Header {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&self.width.to_le_bytes());
        b[8..10].copy_from_slice(&self.height.to_le_bytes());
        b[10..18].copy_from_slice(&self.count.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, IoError> {
        if bytes.len() < HEADER_LEN {
            return Err(IoError::TruncatedFile {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        if bytes[0..4] != MAGIC {
            return Err(IoError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let version = u16_at(4);
        if version != VERSION {
            return Err(IoError::UnsupportedVersion(version));
        }
        Ok(Self {
            version,
            width: u16_at(6),
            height: u16_at(8),
            count: u64::from_le_bytes(bytes[10..18].try_into().unwrap()),
        })
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN as u64 + self.count * RECORD_LEN as u64
    }
}

fn encode_record(e: &Event, out: &mut [u8]) -> Result<(), IoError> {
    let t = i64::try_from(e.t_ns).map_err(|_| IoError::TimestampOverflow(e.t_ns))?;
    out[0..8].copy_from_slice(&t.to_le_bytes());
    out[8..10].copy_from_slice(&e.x.to_le_bytes());
    out[10..12].copy_from_slice(&e.y.to_le_bytes());
    out[12] = e.polarity.as_i8() as u8;
    out[13..16].fill(0);
    Ok(())
}

fn decode_record(b: &[u8], index: u64, header: &Evs1Header) -> Result<Event, IoError> {
    let offset = HEADER_LEN as u64 + index * RECORD_LEN as u64;
    let t = i64::from_le_bytes(b[0..8].try_into().unwrap());
    let x = u16::from_le_bytes([b[8], b[9]]);
    let y = u16::from_le_bytes([b[10], b[11]]);
    let p = b[12] as i8;
    let polarity = Polarity::from_i8(p).ok_or(IoError::BadPolarity {
        index,
        offset: offset + 12,
        value: p,
    })?;
    if t < 0 {
        return Err(IoError::NegativeTimestamp {
            index,
            offset,
            t_ns: t,
        });
    }
    if x >= header.width || y >= header.height {
        return Err(IoError::OutOfBounds {
            index,
            offset: offset + 8,
            x,
            y,
        });
    }
    Ok(Event::new(x, y, t as u64, polarity))
}

/// Serializes a stream to EVS1 bytes.
pub fn encode(stream: &EventStream) -> Result<Vec<u8>, IoError> {
    let header = Evs1Header {
        version: VERSION,
        width: stream.width,
        height: stream.height,
        count: stream.len() as u64,
    };
    let mut out = vec![0u8; header.file_len() as usize];
    out[..HEADER_LEN].copy_from_slice(&header.to_bytes());
    for (e, chunk) in stream
        .events
        .iter()
        .zip(out[HEADER_LEN..].chunks_exact_mut(RECORD_LEN))
    {
        encode_record(e, chunk)?;
    }
    Ok(out)
}

/// Parses EVS1 bytes. Events must be in-bounds and in time order.
pub fn decode(bytes: &[u8]) -> Result<EventStream, IoError> {
    let header = Evs1Header::parse(bytes)?;
    let body = (bytes.len() - HEADER_LEN) as u64;
    let expected = header.count * RECORD_LEN as u64;
    if body < expected {
        return Err(IoError::TruncatedFile {
            expected: header.file_len(),
            actual: bytes.len() as u64,
        });
    }
    if body > expected {
        return Err(IoError::CountMismatch {
            header: header.count,
            body_bytes: body,
        });
    }
    let mut events = Vec::with_capacity(header.count as usize);
    let mut prev = 0u64;
    for (i, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let e = decode_record(rec, i as u64, &header)?;
        if e.t_ns < prev {
            return Err(IoError::Unsorted {
                index: i as u64,
                offset: (HEADER_LEN + i * RECORD_LEN) as u64,
            });
        }
        prev = e.t_ns;
        events.push(e);
    }
    Ok(EventStream::new(header.width, header.height, events))
}

pub fn write_events(path: &Path, stream: &EventStream) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(file);
    let header = Evs1Header {
        version: VERSION,
        width: stream.width,
        height: stream.height,
        count: stream.len() as u64,
    };
    w.write_all(&header.to_bytes())
        .map_err(|e| IoError::file(path, e))?;
    let mut rec = [0u8; RECORD_LEN];
    for e in &stream.events {
        encode_record(e, &mut rec)?;
        w.write_all(&rec).map_err(|e| IoError::file(path, e))?;
    }
    w.flush().map_err(|e| IoError::file(path, e))
}

pub fn read_events(path: &Path) -> Result<EventStream, IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| IoError::file(path, e))?;
    decode(&bytes)
}

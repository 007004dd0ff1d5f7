//! Binary timestamp files: 8-byte magic, u64 resolution in ps, then sorted
//! i64 little-endian records.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::atomic_write;

pub const TIMESTAMP_MAGIC: &[u8; 8] = b"SWTSTMP1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampFile {
    pub resolution_ps: u64,
    pub records: Vec<i64>,
}

impl TimestampFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.records.len());
        out.extend_from_slice(TIMESTAMP_MAGIC);
        out.extend_from_slice(&self.resolution_ps.to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != TIMESTAMP_MAGIC {
            return Err(Error::Domain("not a timestamp file (bad magic)".into()));
        }
        if (bytes.len() - 16) % 8 != 0 {
            return Err(Error::Domain("timestamp file truncated mid-record".into()));
        }
        let resolution_ps = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let records: Vec<i64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if records.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain("timestamp records are not sorted".into()));
        }
        Ok(TimestampFile { resolution_ps, records })
    }
}

pub fn write_timestamps(path: &Path, records: &[i64], resolution_ps: u64) -> Result<()> {
    if records.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("timestamp records must be sorted".into()));
    }
    let f = TimestampFile {
        resolution_ps,
        records: records.to_vec(),
    };
    atomic_write(path, &f.to_bytes())
}

pub fn read_timestamps(path: &Path) -> Result<TimestampFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TimestampFile::from_bytes(&bytes)
}

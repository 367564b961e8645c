//! Per-tick rollout trace records (JSONL).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Role;

/// One line per (tick, vehicle). The ego row carries the meta-action in
/// force and the reward of the policy step the tick belongs to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub time: f64,
    pub vehicle_id: u32,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub v1: f64,
    pub lane: u32,
    pub heading: f64,
    pub action: Option<u8>,
    pub reward: f64,
    pub done: bool,
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)
            .map_err(|e| Error::Format(format!("trace serialization: {e}")))?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Format(format!("trace line: {e}"))))
        .collect()
}

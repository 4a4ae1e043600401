//! Snapshot file format.
//!
//! ```text
//! [u64 LE: header length n][n bytes JSON header][f64 LE payload]
//! ```
//!
//! The payload holds the arrays listed in the header, row-major, in order.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ChannelGrid, FlowField, GridSpec};
use crate::error::{Error, Result};
use crate::io::atomic_write;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub version: u32,
    pub grid: GridSpec,
    pub time: f64,
    pub nu: f64,
    pub step: u64,
    pub arrays: Vec<ArrayEntry>,
}

pub fn encode(field: &FlowField, nu: f64, step: u64) -> Vec<u8> {
    let arrays: Vec<(&str, &Array2<f64>)> = vec![("u", &field.u), ("v", &field.v), ("p", &field.p)];
    let header = SnapshotHeader {
        version: FORMAT_VERSION,
        grid: field.grid.spec,
        time: field.time,
        nu,
        step,
        arrays: arrays
            .iter()
            .map(|(n, a)| ArrayEntry {
                name: n.to_string(),
                rows: a.nrows(),
                cols: a.ncols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let payload: usize = arrays.iter().map(|(_, a)| a.len()).sum();
    let mut out = Vec::with_capacity(8 + json.len() + 8 * payload);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, a) in arrays {
        for x in a.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn write(path: &Path, field: &FlowField, nu: f64, step: u64) -> Result<()> {
    atomic_write(path, &encode(field, nu, step))
}

/// Decodes a snapshot; `grid` is reused when its spec matches the header.
pub fn decode(path: &Path, bytes: &[u8], grid: Option<&Arc<ChannelGrid>>) -> Result<(FlowField, SnapshotHeader)> {
    let bad = |r: &str| Error::format(path, r.to_string());
    if bytes.len() < 8 {
        return Err(bad("truncated length prefix"));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + n {
        return Err(bad("truncated header"));
    }
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[8..8 + n]).map_err(|e| bad(&format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    let grid = match grid {
        Some(g) if g.spec == header.grid => g.clone(),
        _ => Arc::new(ChannelGrid::new(header.grid)?),
    };
    let mut offset = 8 + n;
    let mut take = |entry: &ArrayEntry| -> Result<Array2<f64>> {
        let len = entry.rows * entry.cols;
        let end = offset + 8 * len;
        if bytes.len() < end {
            return Err(bad(&format!("payload for {} truncated", entry.name)));
        }
        let vals: Vec<f64> = bytes[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset = end;
        Array2::from_shape_vec((entry.rows, entry.cols), vals).map_err(|e| bad(&e.to_string()))
    };
    let mut u = None;
    let mut v = None;
    let mut p = None;
    for e in &header.arrays {
        let a = take(e)?;
        match e.name.as_str() {
            "u" => u = Some(a),
            "v" => v = Some(a),
            "p" => p = Some(a),
            _ => {}
        }
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let u = u.ok_or_else(|| bad("missing u"))?;
    let v = v.ok_or_else(|| bad("missing v"))?;
    let p = p.ok_or_else(|| bad("missing p"))?;
    if u.dim() != (ny, nx) || v.dim() != (ny + 1, nx) || p.dim() != (ny, nx) {
        return Err(bad("array shapes do not match grid"));
    }
    let time = header.time;
    Ok((FlowField { grid, u, v, p, time }, header))
}

pub fn read(path: &Path, grid: Option<&Arc<ChannelGrid>>) -> Result<(FlowField, SnapshotHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes, grid)
}

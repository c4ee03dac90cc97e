//! SPF1 snapshot files.
//!
//! Layout (little-endian): the magic `SPF` followed by the format version
//! byte `1`, `u32 N`, `f64 L`, `f64 timestamp`, then `2 N^2` complex
//! coefficients as interleaved `(re, im)` `f64`, component-major and
//! row-major over the lattice index map. A JSON sidecar next to the file
//! (same stem, `.json`) carries the run metadata.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_atomic;
use crate::error::{Result, SimError};
use crate::spectral::{Lattice, SpectralField};

const MAGIC: &[u8; 3] = b"SPF";
const VERSION: u8 = b'1';
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

/// Metadata stored in the sidecar (and, for the timestamp, the header).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub timestamp: f64,
    pub nu: f64,
    pub alpha: f64,
    pub seed: u64,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    nu: f64,
    alpha: f64,
    seed: u64,
    step: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Serialized SPF1 bytes of a field.
pub fn encode(field: &SpectralField, timestamp: f64) -> Vec<u8> {
    let lat = field.lattice();
    let mut out = Vec::with_capacity(HEADER_LEN + 32 * lat.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(lat.n() as u32).to_le_bytes());
    out.extend_from_slice(&lat.box_length().to_le_bytes());
    out.extend_from_slice(&timestamp.to_le_bytes());
    for c in 0..2 {
        for z in field.component(c) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn snapshot_error(path: &Path, reason: impl Into<String>) -> SimError {
    SimError::Snapshot {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses SPF1 bytes into a field and its timestamp.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(SpectralField, f64)> {
    if bytes.len() < 4 || &bytes[..3] != MAGIC {
        return Err(snapshot_error(path, "bad magic (not an SPF file)"));
    }
    if bytes[3] != VERSION {
        return Err(snapshot_error(
            path,
            format!("unsupported format version {:?}", bytes[3] as char),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(snapshot_error(path, "truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let n = u32_at(4) as usize;
    let length = f64_at(8);
    let timestamp = f64_at(16);
    let lattice = Lattice::new(n, length).map_err(|e| snapshot_error(path, e.to_string()))?;
    let expected = HEADER_LEN + 32 * lattice.len();
    if bytes.len() != expected {
        return Err(snapshot_error(
            path,
            format!("expected {expected} bytes for N = {n}, found {}", bytes.len()),
        ));
    }
    let mut comps = [Vec::with_capacity(lattice.len()), Vec::with_capacity(lattice.len())];
    let mut o = HEADER_LEN;
    for comp in &mut comps {
        for _ in 0..lattice.len() {
            comp.push(Complex64::new(f64_at(o), f64_at(o + 8)));
            o += 16;
        }
    }
    let [c0, c1] = comps;
    Ok((SpectralField::from_components(lattice, c0, c1)?, timestamp))
}

/// Writes the snapshot and its sidecar atomically; returns both paths.
pub fn write_snapshot(field: &SpectralField, meta: &SnapshotMeta, path: &Path) -> Result<[PathBuf; 2]> {
    write_atomic(path, &encode(field, meta.timestamp))?;
    let sidecar = Sidecar {
        nu: meta.nu,
        alpha: meta.alpha,
        seed: meta.seed,
        step: meta.step,
    };
    let side = sidecar_path(path);
    write_atomic(&side, crate::artifacts::to_json(&sidecar)?.as_bytes())?;
    Ok([path.to_path_buf(), side])
}

pub fn read_snapshot(path: &Path) -> Result<(SpectralField, SnapshotMeta)> {
    let bytes = std::fs::read(path)?;
    let (field, timestamp) = decode(&bytes, path)?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| snapshot_error(&side, e.to_string()))?;
    let s: Sidecar = serde_json::from_str(&text).map_err(|e| snapshot_error(&side, e.to_string()))?;
    Ok((
        field,
        SnapshotMeta {
            timestamp,
            nu: s.nu,
            alpha: s.alpha,
            seed: s.seed,
            step: s.step,
        },
    ))
}

/// Reads a snapshot that must live on `lattice`.
pub fn read_snapshot_into(path: &Path, lattice: &Lattice) -> Result<(SpectralField, SnapshotMeta)> {
    let (field, meta) = read_snapshot(path)?;
    lattice.ensure_same(field.lattice())?;
    Ok((field, meta))
}

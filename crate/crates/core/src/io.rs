//! File formats.
//!
//! Batch and grid files share a layout: one line of JSON header terminated by
//! `\n`, followed by a little-endian f64 payload. Batches store (x, φ) pairs;
//! grids store values row-major (q index outer). Every write goes to a
//! temporary sibling first and is renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{GridMeta, WignerGrid};
use crate::sampling::{BatchMeta, QuadratureBatch, QuadratureSample};
use crate::states::CatState;

pub const SCHEMA_VERSION: u32 = 1;
const BATCH_KIND: &str = "quadrature-batch";
const GRID_KIND: &str = "wigner-grid";

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".{}.partial", std::process::id()));
    path.with_file_name(name)
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn encode(header: &impl Serialize, payload: impl Iterator<Item = f64>, len: usize) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    out.reserve(8 * len);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode<H: for<'de> Deserialize<'de>>(path: &Path) -> Result<(H, Vec<f64>, String)> {
    let hash = sha256_file(path)?;
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format(format!("{}: missing header line", path.display())));
    }
    let header: H = serde_json::from_slice(&line)
        .map_err(|e| Error::Format(format!("{}: bad header: {e}", path.display())))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: payload of {} bytes is not a whole number of f64 values",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values, hash))
}

fn check_kind(path: &Path, schema: u32, kind: &str, expected: &str) -> Result<()> {
    if kind != expected {
        return Err(Error::Format(format!("{}: expected a {expected} file, found {kind}", path.display())));
    }
    if schema != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported schema version {schema}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchHeader {
    schema: u32,
    kind: String,
    alpha1: f64,
    alpha2: f64,
    eta: f64,
    n: usize,
    seed: u64,
    replicate_index: u32,
}

/// Write a batch; returns the SHA-256 of the written file.
pub fn write_batch(path: &Path, batch: &QuadratureBatch) -> Result<String> {
    let m = &batch.meta;
    let header = BatchHeader {
        schema: SCHEMA_VERSION,
        kind: BATCH_KIND.into(),
        alpha1: m.state.alpha1,
        alpha2: m.state.alpha2,
        eta: m.eta,
        n: batch.len(),
        seed: m.seed,
        replicate_index: m.replicate,
    };
    let payload = batch.samples.iter().flat_map(|s| [s.x, s.phi]);
    let bytes = encode(&header, payload, 2 * batch.len())?;
    atomic_write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Read a batch and the SHA-256 of its file.
pub fn read_batch(path: &Path) -> Result<(QuadratureBatch, String)> {
    let (h, values, hash): (BatchHeader, _, _) = decode(path)?;
    check_kind(path, h.schema, &h.kind, BATCH_KIND)?;
    if values.len() != 2 * h.n {
        return Err(Error::Format(format!(
            "{}: header announces {} pairs, payload holds {} values",
            path.display(),
            h.n,
            values.len()
        )));
    }
    let samples = values
        .chunks_exact(2)
        .map(|c| QuadratureSample { x: c[0], phi: c[1] })
        .collect();
    let meta = BatchMeta {
        state: CatState::new(h.alpha1, h.alpha2),
        eta: h.eta,
        n: h.n,
        seed: h.seed,
        replicate: h.replicate_index,
    };
    Ok((QuadratureBatch { samples, meta }, hash))
}

/// `x,phi` CSV with round-trip precision.
pub fn write_batch_csv(path: &Path, batch: &QuadratureBatch) -> Result<()> {
    let mut out = String::from("x,phi\n");
    for s in &batch.samples {
        out.push_str(&format!("{:.16e},{:.16e}\n", s.x, s.phi));
    }
    atomic_write(path, out.as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    schema: u32,
    kind: String,
    size: usize,
    extent: f64,
    radius: f64,
    meta: GridMeta,
}

/// Write a grid; returns the SHA-256 of the written file.
pub fn write_grid(path: &Path, grid: &WignerGrid) -> Result<String> {
    let header = GridHeader {
        schema: SCHEMA_VERSION,
        kind: GRID_KIND.into(),
        size: grid.size,
        extent: grid.extent,
        radius: grid.radius,
        meta: grid.meta.clone(),
    };
    let bytes = encode(&header, grid.values.iter().copied(), grid.values.len())?;
    atomic_write(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Read a grid and the SHA-256 of its file.
pub fn read_grid(path: &Path) -> Result<(WignerGrid, String)> {
    let (h, values, hash): (GridHeader, _, _) = decode(path)?;
    check_kind(path, h.schema, &h.kind, GRID_KIND)?;
    if h.size < 2 || values.len() != h.size * h.size {
        return Err(Error::Format(format!(
            "{}: {}x{} grid announced, payload holds {} values",
            path.display(),
            h.size,
            h.size,
            values.len()
        )));
    }
    Ok((
        WignerGrid {
            size: h.size,
            extent: h.extent,
            radius: h.radius,
            values,
            meta: h.meta,
        },
        hash,
    ))
}

/// `q,p,w` CSV, one line per node.
pub fn write_grid_csv(path: &Path, grid: &WignerGrid) -> Result<()> {
    let mut out = String::from("q,p,w\n");
    for i in 0..grid.size {
        for j in 0..grid.size {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                grid.coord(i),
                grid.coord(j),
                grid.get(i, j)
            ));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Serialize to pretty JSON and write atomically.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

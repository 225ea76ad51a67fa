//! Prediction grid files exchanged with a detector.
//!
//! Layout, little-endian:
//!
//! | bytes        | field                          |
//! |--------------|--------------------------------|
//! | 4            | magic `WPRD`                   |
//! | 2            | version (`u16`, currently 1)   |
//! | 2            | rows (`u16`)                   |
//! | 2            | cols (`u16`)                   |
//! | 4            | id length `L` (`u32`)          |
//! | L            | sample id, UTF-8               |
//! | 4·rows·cols  | `f32` probabilities, row-major |
//!
//! A prediction directory holds one `<id>.wprd` file per sample and may hold
//! a `run.json` naming the run and its focal-loss parameters.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WPRD";
pub const VERSION: u16 = 1;
pub const PREDICTION_EXTENSION: &str = "wprd";
pub const RUN_INFO_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    pub id: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major, each in `[0, 1]`.
    pub probs: Vec<f64>,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "prediction grid",
        reason: reason.into(),
    }
}

impl PredictionGrid {
    pub fn new(id: impl Into<String>, rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols}"),
                actual: format!("{} values", probs.len()),
            });
        }
        if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(bad(format!("probability {} at {i} outside [0, 1]", probs[i])));
        }
        Ok(PredictionGrid {
            id: id.into(),
            rows,
            cols,
            probs,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.id.len() + 4 * self.probs.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u16).to_le_bytes());
        out.extend_from_slice(&(self.cols as u16).to_le_bytes());
        out.extend_from_slice(&(self.id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.id.as_bytes());
        for &p in &self.probs {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 14 || &bytes[..4] != MAGIC {
            return Err(bad("missing WPRD header"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let version = u16_at(4) as u16;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (rows, cols) = (u16_at(6), u16_at(8));
        let id_len = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let expected = 14 + id_len + 4 * rows * cols;
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let id = std::str::from_utf8(&bytes[14..14 + id_len])
            .map_err(|_| bad("id is not UTF-8"))?
            .to_string();
        let probs = bytes[14 + id_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        PredictionGrid::new(id, rows, cols, probs)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.{PREDICTION_EXTENSION}", self.id));
        fs::write(&path, self.encode()).map_err(|e| Error::io(&path, e))
    }
}

/// Optional run description stored next to the prediction files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub label: Option<String>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl RunInfo {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RUN_INFO_FILE);
        fs::write(&path, serde_json::to_string_pretty(self).expect("run info serializes"))
            .map_err(|e| Error::io(&path, e))
    }
}

/// Reads every `*.wprd` file of `dir`, keyed by sample id, plus `run.json` if present.
pub fn read_prediction_dir(dir: &Path) -> Result<(HashMap<String, PredictionGrid>, RunInfo)> {
    let mut grids = HashMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(PREDICTION_EXTENSION) {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let grid = PredictionGrid::decode(&bytes)?;
        if grids.insert(grid.id.clone(), grid).is_some() {
            return Err(bad(format!("duplicate prediction id in {}", path.display())));
        }
    }
    let info_path = dir.join(RUN_INFO_FILE);
    let info = if info_path.exists() {
        let text = fs::read_to_string(&info_path).map_err(|e| Error::io(&info_path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "run info",
            reason: e.to_string(),
        })?
    } else {
        RunInfo::default()
    };
    Ok((grids, info))
}

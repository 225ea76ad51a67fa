//! Receiver time histories and their on-disk form.
//!
//! A record is written as two files: a raw tensor of little-endian `f32`
//! values ordered receiver-major, then time step, then component (`x`, `y`),
//! and a JSON sidecar with the step size, step count, receiver bindings and
//! the load that produced it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LoadSpec;
use crate::error::{Error, Result};

/// Receiver bound to a lattice particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverBinding {
    pub particle: usize,
    /// Nominal receiver location.
    pub target: [f64; 2],
    /// Position of the bound particle.
    pub position: [f64; 2],
}

impl ReceiverBinding {
    pub fn offset(&self) -> f64 {
        (self.position[0] - self.target[0]).hypot(self.position[1] - self.target[1])
    }
}

/// Displacements `u_x, u_y` of N receivers over T steps, shape `N x T x 2`.
///
/// Time index `t` holds the state after step `t + 1`, at time `(t + 1)·Δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFieldRecord {
    pub dt: f64,
    pub n_steps: usize,
    pub receivers: Vec<ReceiverBinding>,
    pub data: Vec<f64>,
}

impl WaveFieldRecord {
    pub fn zeros(dt: f64, n_steps: usize, receivers: Vec<ReceiverBinding>) -> Self {
        let data = vec![0.0; receivers.len() * n_steps * 2];
        WaveFieldRecord {
            dt,
            n_steps,
            receivers,
            data,
        }
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_receivers(), self.n_steps, 2]
    }

    #[inline]
    pub fn index(&self, receiver: usize, step: usize, component: usize) -> usize {
        (receiver * self.n_steps + step) * 2 + component
    }

    pub fn get(&self, receiver: usize, step: usize, component: usize) -> f64 {
        self.data[self.index(receiver, step, component)]
    }

    pub fn set(&mut self, receiver: usize, step: usize, component: usize, value: f64) {
        let i = self.index(receiver, step, component);
        self.data[i] = value;
    }

    /// `|u|` at each step for one receiver.
    pub fn magnitude(&self, receiver: usize) -> Vec<f64> {
        (0..self.n_steps)
            .map(|t| self.get(receiver, t, 0).hypot(self.get(receiver, t, 1)))
            .collect()
    }

    pub fn component(&self, receiver: usize, component: usize) -> Vec<f64> {
        (0..self.n_steps).map(|t| self.get(receiver, t, component)).collect()
    }

    pub fn to_f32_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub format: String,
    pub shape: [usize; 3],
    pub dt: f64,
    pub n_steps: usize,
    pub receivers: Vec<ReceiverBinding>,
    pub load: Option<LoadSpec>,
}

/// Writes `<stem>.f32` and `<stem>.json` into `dir`.
pub fn write_record(dir: &Path, stem: &str, record: &WaveFieldRecord, load: Option<&LoadSpec>) -> Result<()> {
    let raw = dir.join(format!("{stem}.f32"));
    fs::write(&raw, record.to_f32_bytes()).map_err(|e| Error::io(&raw, e))?;
    let meta = RecordMetadata {
        format: "f32le receiver-major [receiver, step, component]".into(),
        shape: record.shape(),
        dt: record.dt,
        n_steps: record.n_steps,
        receivers: record.receivers.clone(),
        load: load.cloned(),
    };
    let side = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

/// Reads a record written by [`write_record`]; values come back as `f32`-rounded `f64`.
pub fn read_record(dir: &Path, stem: &str) -> Result<(WaveFieldRecord, RecordMetadata)> {
    let side = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: RecordMetadata = serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "record metadata",
        reason: e.to_string(),
    })?;
    let raw = dir.join(format!("{stem}.f32"));
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = meta.shape.iter().product::<usize>() * 4;
    if bytes.len() != expected {
        return Err(Error::Format {
            what: "record tensor",
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let record = WaveFieldRecord {
        dt: meta.dt,
        n_steps: meta.n_steps,
        receivers: meta.receivers.clone(),
        data,
    };
    Ok((record, meta))
}

//! Single-scenario runs.

use std::fs;
use std::path::{Path, PathBuf};

use crackwave::crack::apply_crack;
use crackwave::dynamics::{
    bind_receivers, first_crossing, peak_magnitude, simulate_with, write_record, SimulationOptions, SimulationOutput,
    WaveFieldRecord, DEFAULT_ARRIVAL_FRACTION,
};
use crackwave::lattice::{generate_lattice, LatticeModel};
use crackwave::{Error, Result};
use serde::Serialize;

use crate::config::SimulateConfig;
use crate::render::{frame_image, save_png, PixelMap};

/// Side length of frame images in pixels.
pub const FRAME_PIXELS: u32 = 256;

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Snapshot every this many steps and write frame images.
    pub frames: Option<usize>,
    /// Run the uncracked and cracked plates side by side.
    pub with_crack: bool,
}

/// First arrivals at one receiver in a twin run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalRow {
    pub receiver: String,
    pub target: [f64; 2],
    /// Seconds; `None` when the shared level is never reached.
    pub uncracked: Option<f64>,
    pub cracked: Option<f64>,
}

impl ArrivalRow {
    /// Later or missing arrival with the crack.
    pub fn delayed(&self) -> bool {
        match (self.uncracked, self.cracked) {
            (Some(a), Some(b)) => b > a,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// Arrivals in both runs against one level per receiver: a fixed fraction
/// of the uncracked peak.
pub fn compare_arrivals(uncracked: &WaveFieldRecord, cracked: &WaveFieldRecord) -> Vec<ArrivalRow> {
    (0..uncracked.n_receivers())
        .map(|r| {
            let level = DEFAULT_ARRIVAL_FRACTION * peak_magnitude(uncracked, r);
            let pick = |rec: &WaveFieldRecord| if level > 0.0 { first_crossing(rec, r, level) } else { None };
            ArrivalRow {
                receiver: format!("R{}", r + 1),
                target: uncracked.receivers[r].target,
                uncracked: pick(uncracked),
                cracked: pick(cracked),
            }
        })
        .collect()
}

pub fn format_arrivals(rows: &[ArrivalRow]) -> String {
    let us = |t: Option<f64>| t.map_or_else(|| "-".to_string(), |t| format!("{:.2}", t * 1e6));
    let mut out = String::from("| receiver | x (m) | y (m) | uncracked (µs) | cracked (µs) | delay (µs) |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in rows {
        let delay = match (r.uncracked, r.cracked) {
            (Some(a), Some(b)) => format!("{:+.2}", (b - a) * 1e6),
            (Some(_), None) => "no arrival".to_string(),
            _ => "-".to_string(),
        };
        out.push_str(&format!(
            "| {} | {:.4} | {:.4} | {} | {} | {} |\n",
            r.receiver,
            r.target[0],
            r.target[1],
            us(r.uncracked),
            us(r.cracked),
            delay
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    /// Record stems written to the output directory.
    pub records: Vec<String>,
    pub frames: Vec<PathBuf>,
    pub arrivals: Option<Vec<ArrivalRow>>,
}

fn run_one(cfg: &SimulateConfig, model: &LatticeModel, options: &SimulateOptions) -> Result<SimulationOutput> {
    let load = cfg.load_for(model)?;
    let receivers = bind_receivers(model, &cfg.receiver_targets())?;
    simulate_with(
        model,
        &load,
        &cfg.params(),
        receivers,
        &SimulationOptions {
            snapshot_every: options.frames,
        },
    )
}

fn write_frames(out: &Path, stem: &str, model: &LatticeModel, sim: &SimulationOutput) -> Result<Vec<PathBuf>> {
    if sim.snapshots.is_empty() {
        return Ok(Vec::new());
    }
    let dir = out.join("frames").join(stem);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let map = PixelMap::new(model, FRAME_PIXELS, FRAME_PIXELS);
    sim.snapshots
        .iter()
        .map(|s| {
            let path = dir.join(format!("frame_{:06}.png", s.step));
            save_png(&frame_image(&map, &s.displacement), &path)?;
            Ok(path)
        })
        .collect()
}

/// Runs the configured scenario, or the uncracked/cracked pair with
/// `with_crack`, and writes records, frames and the arrival table to `out`.
pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path, options: &SimulateOptions) -> Result<SimulateReport> {
    cfg.validate()?;
    if options.frames == Some(0) {
        return Err(Error::Config("--frames must be at least 1".into()));
    }
    let plain = generate_lattice(&cfg.plate)?;
    let mut runs: Vec<(&str, LatticeModel)> = Vec::new();
    if options.with_crack {
        let cracked = apply_crack(&plain, &cfg.crack_segment())?;
        runs.push(("uncracked", plain));
        runs.push(("cracked", cracked));
    } else if cfg.layout.has_crack() {
        runs.push(("record", apply_crack(&plain, &cfg.crack_segment())?));
    } else {
        runs.push(("record", plain));
    }

    let mut outputs = Vec::new();
    for (stem, model) in &runs {
        log::info!("simulating {stem}: {} particles, {} steps", model.particles.len(), cfg.time.n_steps);
        outputs.push(run_one(cfg, model, options)?);
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let resolved = out.join("config.toml");
    fs::write(&resolved, toml::to_string(cfg).expect("config serializes")).map_err(|e| Error::io(&resolved, e))?;
    let mut report = SimulateReport {
        records: Vec::new(),
        frames: Vec::new(),
        arrivals: None,
    };
    for ((stem, model), sim) in runs.iter().zip(&outputs) {
        let load = cfg.load_for(model)?;
        write_record(out, stem, &sim.record, Some(&load))?;
        report.records.push(stem.to_string());
        report.frames.extend(write_frames(out, stem, model, sim)?);
    }
    if options.with_crack {
        let rows = compare_arrivals(&outputs[0].record, &outputs[1].record);
        let table = format_arrivals(&rows);
        let path = out.join("arrivals.md");
        fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
        let path = out.join("arrivals.json");
        fs::write(&path, serde_json::to_string_pretty(&rows).expect("rows serialize")).map_err(|e| Error::io(&path, e))?;
        print!("{table}");
        report.arrivals = Some(rows);
    }
    Ok(report)
}

//! Run configuration files.

use std::fs;
use std::path::Path;

use crackwave::crack::CrackSegment;
use crackwave::dataset::{DatasetConfig, ExcitationSite, TimeStepping};
use crackwave::dynamics::{CoefficientSet, LoadSpec, NewmarkParams};
use crackwave::lattice::{LatticeModel, PlateSpec};
use crackwave::{Error, Result};
use serde::{Deserialize, Serialize};

/// Boundary layouts for a single scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Horizontal excitation at the left edge, no crack.
    #[default]
    A,
    /// Horizontal excitation at the left edge, with the configured crack.
    B,
    /// Vertical excitation at the top edge, with the configured crack.
    C,
}

impl Layout {
    pub fn site(self) -> ExcitationSite {
        match self {
            Layout::A | Layout::B => ExcitationSite::LeftMid,
            Layout::C => ExcitationSite::TopMid,
        }
    }

    pub fn has_crack(self) -> bool {
        self != Layout::A
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimLoad {
    /// Newtons.
    pub magnitude: f64,
    pub duration_steps: usize,
}

/// Crack endpoints in plate coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCrack {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

/// One wave-propagation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub layout: Layout,
    pub plate: PlateSpec,
    pub time: TimeStepping,
    pub load: SimLoad,
    /// Used by layouts b and c and by twin runs.
    #[serde(default)]
    pub crack: Option<SimCrack>,
    /// Receiver targets; defaults to the 3x3 grid at quarter points.
    #[serde(default)]
    pub receivers: Option<Vec<[f64; 2]>>,
}

impl Default for SimulateConfig {
    /// 10 cm plate, 1 kN held for 10 steps of 10 ns, horizontal crack above the source.
    fn default() -> Self {
        let plate = PlateSpec::showcase_default();
        SimulateConfig {
            layout: Layout::A,
            crack: Some(default_crack(&plate)),
            plate,
            time: TimeStepping {
                dt: 1e-8,
                n_steps: 600,
                coefficients: CoefficientSet::Textbook,
            },
            load: SimLoad {
                magnitude: 1000.0,
                duration_steps: 10,
            },
            receivers: None,
        }
    }
}

fn default_crack(plate: &PlateSpec) -> SimCrack {
    SimCrack {
        start: [0.0, 0.62 * plate.height],
        end: [0.85 * plate.width, 0.62 * plate.height],
    }
}

/// Receivers `R1..R9` at quarter points, column by column from the left,
/// bottom to top within a column.
pub fn quarter_grid(plate: &PlateSpec) -> Vec<[f64; 2]> {
    (0..9)
        .map(|k| {
            [
                0.25 * plate.width * (1 + k / 3) as f64,
                0.25 * plate.height * (1 + k % 3) as f64,
            ]
        })
        .collect()
}

fn inside(plate: &PlateSpec, p: [f64; 2]) -> bool {
    (0.0..=plate.width).contains(&p[0]) && (0.0..=plate.height).contains(&p[1])
}

impl SimulateConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimulateConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plate.validate()?;
        self.params().validate()?;
        if !(self.load.magnitude > 0.0 && self.load.magnitude.is_finite()) {
            return Err(Error::Config(format!("load.magnitude must be positive, got {}", self.load.magnitude)));
        }
        if self.load.duration_steps == 0 || self.load.duration_steps > self.time.n_steps {
            return Err(Error::Config(format!(
                "load.duration_steps must lie in 1..={}, got {}",
                self.time.n_steps, self.load.duration_steps
            )));
        }
        if let Some(c) = &self.crack {
            if !inside(&self.plate, c.start) || !inside(&self.plate, c.end) {
                return Err(Error::Config("crack endpoints must lie on the plate".into()));
            }
        }
        if let Some(r) = &self.receivers {
            if r.is_empty() || r.iter().any(|&p| !inside(&self.plate, p)) {
                return Err(Error::Config("receivers must be non-empty and lie on the plate".into()));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> NewmarkParams {
        self.time.params()
    }

    pub fn crack_segment(&self) -> CrackSegment {
        let c = self.crack.clone().unwrap_or_else(|| default_crack(&self.plate));
        CrackSegment { a: c.start, b: c.end }
    }

    pub fn receiver_targets(&self) -> Vec<[f64; 2]> {
        self.receivers.clone().unwrap_or_else(|| quarter_grid(&self.plate))
    }

    /// Load at the particle nearest to the layout's excitation site.
    pub fn load_for(&self, model: &LatticeModel) -> Result<LoadSpec> {
        let (point, direction) = self.layout.site().point_and_direction(&self.plate);
        let excitation_particle = model
            .nearest_particle(point)
            .ok_or_else(|| Error::Config("no particle left near the excitation site".into()))?;
        Ok(LoadSpec {
            excitation_particle,
            direction,
            magnitude: self.load.magnitude,
            duration_steps: self.load.duration_steps,
        })
    }
}

/// Reads a file, mapping a missing file to a config error.
pub fn read_config_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))
}

pub fn load_simulate_config(path: Option<&Path>) -> Result<SimulateConfig> {
    match path {
        Some(p) => SimulateConfig::from_toml_str(&read_config_text(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => Ok(SimulateConfig::default()),
    }
}

pub fn load_dataset_config(path: &Path) -> Result<DatasetConfig> {
    DatasetConfig::from_toml_str(&read_config_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

//! Deterministic dataset factory: plans Type-N/R/S/C samples from a master
//! seed, simulates each one, and writes tensor blobs plus a JSON manifest.

mod build;
pub mod container;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crack::{sample_crack, Crack, CrackSegment, LabelImage};
use crate::dynamics::{CoefficientSet, LoadSpec, NewmarkParams};
use crate::error::{Error, Result};
use crate::lattice::geometry::Point;
use crate::lattice::PlateSpec;
pub use build::{
    build_dataset, checksum64, generate_sample, load_dataset, normalize_record, BuildOptions, BuildReport,
    DatasetManifest, DatasetReader, ManifestEntry, MANIFEST_FILE, PARTIAL_MANIFEST_FILE,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SampleType {
    /// Random plate, random crack.
    N,
    /// Random plate, no crack.
    R,
    /// Different plates, similar crack.
    S,
    /// Same plate, different cracks.
    C,
}

impl SampleType {
    pub const ALL: [SampleType; 4] = [SampleType::N, SampleType::R, SampleType::S, SampleType::C];

    pub fn tag(self) -> u8 {
        match self {
            SampleType::N => b'N',
            SampleType::R => b'R',
            SampleType::S => b'S',
            SampleType::C => b'C',
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == tag)
    }

    pub fn has_crack(self) -> bool {
        self != SampleType::R
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "C")]
    pub c: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.n + self.r + self.s + self.c
    }

    pub fn get(&self, t: SampleType) -> usize {
        match t {
            SampleType::N => self.n,
            SampleType::R => self.r,
            SampleType::S => self.s,
            SampleType::C => self.c,
        }
    }

    fn get_mut(&mut self, t: SampleType) -> &mut usize {
        match t {
            SampleType::N => &mut self.n,
            SampleType::R => &mut self.r,
            SampleType::S => &mut self.s,
            SampleType::C => &mut self.c,
        }
    }

    /// Reference test-split composition: 144 N, 8 R, 8 S, 160 C.
    pub fn paper_test() -> Self {
        SplitCounts { n: 144, r: 8, s: 8, c: 160 }
    }

    pub fn paper_train() -> Self {
        SplitCounts { n: 1368, r: 76, s: 76, c: 1520 }
    }

    /// Splits `total` in the proportions of `reference` by largest remainder
    /// (ties go to the earlier type in N, R, S, C order).
    pub fn apportion(total: usize, reference: &SplitCounts) -> Self {
        let whole = reference.total().max(1);
        let mut out = SplitCounts::default();
        let mut rema = Vec::new();
        for t in SampleType::ALL {
            let exact = total * reference.get(t);
            *out.get_mut(t) = exact / whole;
            rema.push((exact % whole, t));
        }
        rema.sort_by(|a, b| b.0.cmp(&a.0));
        let short = total - out.total();
        for &(_, t) in rema.iter().take(short) {
            *out.get_mut(t) += 1;
        }
        out
    }
}

/// Boundary point where the excitation is applied, loaded along the inward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitationSite {
    LeftMid,
    RightMid,
    TopMid,
}

impl ExcitationSite {
    pub fn point_and_direction(self, plate: &PlateSpec) -> (Point, [f64; 2]) {
        let (w, h) = (plate.width, plate.height);
        match self {
            ExcitationSite::LeftMid => ([0.0, h / 2.0], [1.0, 0.0]),
            ExcitationSite::RightMid => ([w, h / 2.0], [-1.0, 0.0]),
            ExcitationSite::TopMid => ([w / 2.0, h], [0.0, -1.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeStepping {
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub coefficients: CoefficientSet,
}

impl TimeStepping {
    pub fn params(&self) -> NewmarkParams {
        NewmarkParams {
            coefficients: self.coefficients,
            ..NewmarkParams::average_acceleration(self.dt, self.n_steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    /// Newtons.
    pub magnitude: f64,
    pub duration_steps: usize,
    /// Candidate excitation sites; each sample picks one uniformly.
    pub sites: Vec<ExcitationSite>,
}

/// Dataset recipe. Generation is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub version: u32,
    pub master_seed: u64,
    /// Plate template; its `seed` is replaced per sample.
    pub plate: PlateSpec,
    pub time: TimeStepping,
    pub load: LoadConfig,
    /// Receivers per side of the interior grid (9 gives 81 receivers).
    pub receivers_per_side: usize,
    pub train: SplitCounts,
    pub test: SplitCounts,
    /// Cracks per shared plate for Type-C.
    pub type_c_group: usize,
    /// Plates per shared reference crack for Type-S.
    pub type_s_group: usize,
    /// Type-S start jitter bound as a fraction of the receiver spacing.
    pub type_s_jitter: f64,
    /// Type-N cracks reused in both splits on different plates.
    pub special_cases: usize,
    /// Attempts per sample before a failure is surfaced.
    pub max_attempts: usize,
}

impl DatasetConfig {
    /// Full-size recipe: 3040 train / 320 test samples of 81 x 2000 x 2.
    pub fn paper_scale() -> Self {
        DatasetConfig {
            version: CONFIG_VERSION,
            master_seed: 0,
            plate: PlateSpec::dataset_default(),
            time: TimeStepping {
                dt: 1e-9,
                n_steps: 2000,
                coefficients: CoefficientSet::Textbook,
            },
            load: LoadConfig {
                magnitude: 1000.0,
                duration_steps: 1,
                sites: vec![ExcitationSite::LeftMid, ExcitationSite::RightMid, ExcitationSite::TopMid],
            },
            receivers_per_side: 9,
            train: SplitCounts::paper_train(),
            test: SplitCounts::paper_test(),
            type_c_group: 16,
            type_s_group: 4,
            type_s_jitter: 0.5,
            special_cases: 7,
            max_attempts: 8,
        }
    }

    /// Reduced recipe with the test-split type proportions in both splits.
    pub fn desk_scale(train: usize, test: usize, n_steps: usize, n_particles: usize) -> Self {
        let base = Self::paper_scale();
        DatasetConfig {
            plate: PlateSpec {
                n_particles,
                ..base.plate.clone()
            },
            time: TimeStepping { n_steps, ..base.time.clone() },
            train: SplitCounts::apportion(train, &SplitCounts::paper_test()),
            test: SplitCounts::apportion(test, &SplitCounts::paper_test()),
            special_cases: 0,
            ..base
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DatasetConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn counts(&self, split: Split) -> &SplitCounts {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Receiver spacing `(e_x, e_y) / (per_side + 1)`.
    pub fn spacing(&self) -> [f64; 2] {
        let k = (self.receivers_per_side + 1) as f64;
        [self.plate.width / k, self.plate.height / k]
    }

    /// Interior receiver grid, row-major from the bottom-left:
    /// index `j·n + i` sits at `((i+1)·s_x, (j+1)·s_y)`.
    pub fn receiver_positions(&self) -> Vec<Point> {
        let n = self.receivers_per_side;
        let [sx, sy] = self.spacing();
        (0..n * n)
            .map(|k| [((k % n) + 1) as f64 * sx, ((k / n) + 1) as f64 * sy])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.plate.validate()?;
        self.time.params().validate()?;
        if self.load.sites.is_empty() {
            return Err(Error::Config("load.sites must name at least one excitation site".into()));
        }
        if !(self.load.magnitude.is_finite() && self.load.magnitude != 0.0) {
            return Err(Error::Config("load.magnitude must be finite and nonzero".into()));
        }
        if self.load.duration_steps == 0 || self.load.duration_steps > self.time.n_steps {
            return Err(Error::Config(format!(
                "load.duration_steps must lie in 1..={}",
                self.time.n_steps
            )));
        }
        if self.receivers_per_side == 0 {
            return Err(Error::Config("receivers_per_side must be at least 1".into()));
        }
        if self.type_c_group == 0 || self.type_s_group == 0 || self.max_attempts == 0 {
            return Err(Error::Config("type_c_group, type_s_group and max_attempts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.type_s_jitter) {
            return Err(Error::Config("type_s_jitter must lie in [0, 1]".into()));
        }
        if self.special_cases > self.train.n.min(self.test.n) {
            return Err(Error::Config(format!(
                "special_cases = {} exceeds the Type-N count of a split",
                self.special_cases
            )));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a labelled path below `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |h, &p| splitmix(h ^ splitmix(p)))
}

const PLATE: u64 = 1;
const CRACK: u64 = 2;
const EXCITATION: u64 = 3;
const JITTER: u64 = 4;
const GROUP: u64 = 5;
const PAIR: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSeeds {
    pub plate: u64,
    pub crack: u64,
    pub excitation: u64,
}

/// Everything needed to generate one sample independently of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub id: String,
    pub split: Split,
    pub sample_type: SampleType,
    pub seeds: SampleSeeds,
    /// Crack fixed at planning time (Type-S and paired Type-N).
    pub fixed_crack: Option<Crack>,
    pub paired_with: Option<String>,
}

impl SamplePlan {
    /// Whether a retry may draw a new plate.
    pub fn plate_is_free(&self) -> bool {
        self.sample_type != SampleType::C
    }

    /// Whether a retry may draw a new crack.
    pub fn crack_is_free(&self) -> bool {
        self.sample_type.has_crack() && self.fixed_crack.is_none()
    }
}

pub fn sample_id(split: Split, index: usize) -> String {
    format!("{}-{index:05}", split.name())
}

fn crack_from_seed(seed: u64, config: &DatasetConfig) -> Result<Crack> {
    sample_crack(&mut ChaCha8Rng::seed_from_u64(seed), &config.plate, config.spacing())
}

/// Deterministic sample list: each split in N, R, S, C blocks.
pub fn plan_dataset(config: &DatasetConfig) -> Result<Vec<SamplePlan>> {
    config.validate()?;
    let m = config.master_seed;
    let spacing = config.spacing();
    let mut plans = Vec::new();
    for split in [Split::Train, Split::Test] {
        let st = split as u64;
        let counts = config.counts(split);
        let mut index = 0;
        for t in SampleType::ALL {
            let tt = t.tag() as u64;
            for i in 0..counts.get(t) {
                let base = derive_seed(m, &[st, tt, i as u64]);
                let mut seeds = SampleSeeds {
                    plate: derive_seed(base, &[PLATE]),
                    crack: derive_seed(base, &[CRACK]),
                    excitation: derive_seed(base, &[EXCITATION]),
                };
                let mut fixed_crack = None;
                let mut paired_with = None;
                match t {
                    SampleType::N if i < config.special_cases => {
                        fixed_crack = Some(crack_from_seed(derive_seed(m, &[PAIR, i as u64]), config)?);
                        let other = if split == Split::Train { Split::Test } else { Split::Train };
                        paired_with = Some(sample_id(other, i));
                    }
                    SampleType::S => {
                        let group = (i / config.type_s_group) as u64;
                        let reference = crack_from_seed(derive_seed(m, &[st, tt, GROUP, group]), config)?;
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, &[JITTER]));
                        fixed_crack = Some(jitter_start(&reference, config, spacing, &mut rng));
                    }
                    SampleType::C => {
                        let group = (i / config.type_c_group) as u64;
                        seeds.plate = derive_seed(m, &[st, tt, GROUP, group]);
                    }
                    _ => {}
                }
                plans.push(SamplePlan {
                    id: sample_id(split, index),
                    split,
                    sample_type: t,
                    seeds,
                    fixed_crack,
                    paired_with,
                });
                index += 1;
            }
        }
    }
    Ok(plans)
}

/// Same length and angle; start moved by at most `type_s_jitter·s` per axis,
/// kept inside the admissible start rectangle.
fn jitter_start(reference: &Crack, config: &DatasetConfig, spacing: [f64; 2], rng: &mut impl Rng) -> Crack {
    let f = config.type_s_jitter;
    let mut start = reference.start;
    let bounds = [config.plate.width, config.plate.height];
    for k in 0..2 {
        let d = f * spacing[k] * (2.0 * rng.gen::<f64>() - 1.0);
        start[k] = (start[k] + d).clamp(spacing[k], bounds[k] - spacing[k]);
    }
    Crack { start, ..*reference }
}

/// Load applied at the chosen site, recorded with the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub site: ExcitationSite,
    pub load: LoadSpec,
}

/// Sample description shared by the in-memory sample and its manifest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: String,
    pub split: Split,
    pub sample_type: SampleType,
    pub plate_seed: u64,
    pub crack: Option<Crack>,
    pub segment: Option<CrackSegment>,
    pub excitation: Excitation,
    pub removed_particles: usize,
    /// Largest receiver-to-particle snapping distance, metres.
    pub max_receiver_offset: f64,
    pub attempts: usize,
    pub paired_with: Option<String>,
}

/// Normalized receiver tensor, shape `[receivers, steps, 2]`, receiver-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTensor {
    pub shape: [usize; 3],
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub meta: SampleMeta,
    pub record: SampleTensor,
    pub label100: LabelImage,
    pub label16: LabelImage,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_counts() {
        let c = DatasetConfig::paper_scale();
        assert_eq!(c.train.total(), 3040);
        assert_eq!(c.test.total(), 320);
        assert_eq!(c.test, SplitCounts { n: 144, r: 8, s: 8, c: 160 });
        assert_eq!(c.receiver_positions().len(), 81);
    }

    #[test]
    fn apportion_is_exact() {
        for total in [1, 16, 64, 100, 320, 777] {
            assert_eq!(SplitCounts::apportion(total, &SplitCounts::paper_test()).total(), total);
        }
        assert_eq!(SplitCounts::apportion(320, &SplitCounts::paper_test()), SplitCounts::paper_test());
        assert_eq!(SplitCounts::apportion(16, &SplitCounts::paper_test()), SplitCounts { n: 7, r: 1, s: 0, c: 8 });
    }

    #[test]
    fn receivers_sit_on_the_interior_grid() {
        let c = DatasetConfig::paper_scale();
        let p = c.receiver_positions();
        assert!((p[0][0] - 0.001).abs() < 1e-15 && (p[0][1] - 0.001).abs() < 1e-15);
        assert!((p[80][0] - 0.009).abs() < 1e-15 && (p[80][1] - 0.009).abs() < 1e-15);
        assert!((p[9][1] - 0.002).abs() < 1e-15 && (p[9][0] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn plans_follow_the_taxonomy() {
        let mut c = DatasetConfig::paper_scale();
        c.train = SplitCounts { n: 3, r: 1, s: 5, c: 20 };
        c.test = SplitCounts { n: 2, r: 1, s: 1, c: 16 };
        c.special_cases = 2;
        let plans = plan_dataset(&c).unwrap();
        assert_eq!(plans.len(), 49);
        let train_c: Vec<_> = plans
            .iter()
            .filter(|p| p.split == Split::Train && p.sample_type == SampleType::C)
            .collect();
        assert!(train_c[..16].iter().all(|p| p.seeds.plate == train_c[0].seeds.plate));
        assert_ne!(train_c[16].seeds.plate, train_c[0].seeds.plate);
        let cracks: std::collections::BTreeSet<u64> = train_c.iter().map(|p| p.seeds.crack).collect();
        assert_eq!(cracks.len(), 20);

        let s: Vec<_> = plans
            .iter()
            .filter(|p| p.split == Split::Train && p.sample_type == SampleType::S)
            .collect();
        let (a, b) = (s[0].fixed_crack.unwrap(), s[1].fixed_crack.unwrap());
        assert_eq!((a.length, a.angle_deg), (b.length, b.angle_deg));
        assert!((a.start[0] - b.start[0]).abs() <= c.spacing()[0]);
        assert_ne!(s[0].seeds.plate, s[1].seeds.plate);

        let train_n0 = &plans[0];
        let test_n0 = plans.iter().find(|p| p.id == "test-00000").unwrap();
        assert_eq!(train_n0.fixed_crack, test_n0.fixed_crack);
        assert_eq!(train_n0.paired_with.as_deref(), Some("test-00000"));
        assert_ne!(train_n0.seeds.plate, test_n0.seeds.plate);
        assert!(plans[2].fixed_crack.is_none());
        assert_eq!(plan_dataset(&c).unwrap(), plans);
    }

    #[test]
    fn config_toml_round_trip() {
        let c = DatasetConfig::desk_scale(64, 16, 200, 1000);
        let text = c.to_toml_string();
        assert_eq!(DatasetConfig::from_toml_str(&text).unwrap(), c);
        let bad = text.replace("receivers_per_side", "receiver_count");
        assert!(matches!(DatasetConfig::from_toml_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_separate_paths() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_ne!(derive_seed(1, &[0]), derive_seed(2, &[0]));
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
    }
}

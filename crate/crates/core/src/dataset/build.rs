use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::container;
use super::{
    derive_seed, plan_dataset, DatasetConfig, Excitation, Sample, SampleMeta, SamplePlan, SampleTensor, Split,
    SplitCounts,
};
use crate::crack::{apply_crack, clip_crack, downsample_label, rasterize_label, Crack, COARSE_RESOLUTION, FINE_RESOLUTION};
use crate::dynamics::{bind_receivers, simulate, LoadSpec};
use crate::error::{Error, Result};
use crate::lattice::{generate_lattice, PlateSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_MANIFEST_FILE: &str = "manifest.partial.json";
const SAMPLE_DIR: &str = "samples";
const FORMAT: &str = "crackwave-dataset";

/// Maps the whole record (both components jointly) affinely onto `[-1, 1]`.
/// A constant record maps to zeros.
pub fn normalize_record(values: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid("record", format!("non-finite value at index {i}")));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || hi == lo {
        return Ok(vec![0.0; values.len()]);
    }
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|&v| (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0))
        .collect())
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::FloatingComponent { .. }
            | Error::Divergence { .. }
            | Error::SingularSystem
            | Error::DegenerateTriangulation { .. }
    )
}

/// Simulates one planned sample. Numerical failures are retried with seeds
/// derived from the attempt number, up to `config.max_attempts`.
pub fn generate_sample(plan: &SamplePlan, config: &DatasetConfig) -> Result<Sample> {
    let mut last = None;
    for attempt in 0..config.max_attempts {
        match try_generate(plan, config, attempt) {
            Ok(mut s) => {
                s.meta.attempts = attempt + 1;
                return Ok(s);
            }
            Err(e) if retryable(&e) => {
                log::warn!("sample {} attempt {} failed: {e}; regenerating", plan.id, attempt + 1);
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("max_attempts is positive"))
}

fn try_generate(plan: &SamplePlan, config: &DatasetConfig, attempt: usize) -> Result<Sample> {
    let a = attempt as u64;
    let plate_seed = if attempt > 0 && plan.plate_is_free() {
        derive_seed(plan.seeds.plate, &[a])
    } else {
        plan.seeds.plate
    };
    let plate = PlateSpec {
        seed: plate_seed,
        ..config.plate.clone()
    };
    let crack: Option<Crack> = match (plan.sample_type.has_crack(), plan.fixed_crack) {
        (false, _) => None,
        (true, Some(c)) => Some(c),
        (true, None) => {
            let seed = if attempt > 0 { derive_seed(plan.seeds.crack, &[a]) } else { plan.seeds.crack };
            Some(super::crack_from_seed(seed, config)?)
        }
    };
    let mut model = generate_lattice(&plate)?;
    let segment = crack.map(|c| clip_crack(&c, &plate));
    let mut removed_particles = 0;
    if let Some(seg) = &segment {
        model = apply_crack(&model, seg)?;
        removed_particles = model.particles.iter().filter(|p| p.removed).count();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seeds.excitation);
    let site = config.load.sites[rng.gen_range(0..config.load.sites.len())];
    let (point, direction) = site.point_and_direction(&plate);
    let excitation_particle = model
        .nearest_particle(point)
        .ok_or_else(|| Error::invalid("excitation", "plate has no particles"))?;
    let load = LoadSpec {
        excitation_particle,
        direction,
        magnitude: config.load.magnitude,
        duration_steps: config.load.duration_steps,
    };
    let receivers = bind_receivers(&model, &config.receiver_positions())?;
    let max_receiver_offset = receivers.iter().map(|r| r.offset()).fold(0.0, f64::max);
    let record = simulate(&model, &load, &config.time.params(), receivers)?;
    let normalized = normalize_record(&record.data)?;

    let label100 = rasterize_label(segment.as_ref(), &plate, FINE_RESOLUTION);
    let label16 = downsample_label(&label100, COARSE_RESOLUTION);
    Ok(Sample {
        meta: SampleMeta {
            id: plan.id.clone(),
            split: plan.split,
            sample_type: plan.sample_type,
            plate_seed,
            crack,
            segment,
            excitation: Excitation { site, load },
            removed_particles,
            max_receiver_offset,
            attempts: 0,
            paired_with: plan.paired_with.clone(),
        },
        record: SampleTensor {
            shape: record.shape(),
            data: normalized.iter().map(|&v| v as f32).collect(),
        },
        label100,
        label16,
    })
}

/// First 8 bytes of SHA-256, big-endian.
pub fn checksum64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub meta: SampleMeta,
    /// Path relative to the manifest directory.
    pub file: String,
    pub bytes: u64,
    /// Hex of [`checksum64`] over the whole file.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: SplitCounts,
    pub test: SplitCounts,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub config: DatasetConfig,
    pub counts: SplitSummary,
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    fn new(config: &DatasetConfig, samples: Vec<ManifestEntry>) -> Self {
        let mut train = SplitCounts::default();
        let mut test = SplitCounts::default();
        for e in &samples {
            let c = if e.meta.split == Split::Train { &mut train } else { &mut test };
            *c.get_mut(e.meta.sample_type) += 1;
        }
        DatasetManifest {
            format: FORMAT.into(),
            version: super::CONFIG_VERSION,
            config: config.clone(),
            counts: SplitSummary {
                total: train.total() + test.total(),
                train,
                test,
            },
            samples,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "dataset manifest",
            reason: e.to_string(),
        })?;
        if m.format != FORMAT {
            return Err(Error::Format {
                what: "dataset manifest",
                reason: format!("unexpected format tag `{}`", m.format),
            });
        }
        Ok(m)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub generated: usize,
    /// Samples recovered from a partial manifest left by an interrupted build.
    pub reused: usize,
}

fn verify_file(root: &Path, entry: &ManifestEntry) -> Result<Vec<u8>> {
    let path = root.join(&entry.file);
    let corrupt = |reason: String| Error::Corruption {
        id: entry.meta.id.clone(),
        reason,
    };
    let bytes = fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => corrupt(format!("missing file {}", path.display())),
        _ => Error::io(&path, e),
    })?;
    if bytes.len() as u64 != entry.bytes {
        return Err(corrupt(format!("expected {} bytes, found {}", entry.bytes, bytes.len())));
    }
    let sum = format!("{:016x}", checksum64(&bytes));
    if sum != entry.checksum {
        return Err(corrupt(format!("checksum {sum} does not match manifest {}", entry.checksum)));
    }
    Ok(bytes)
}

fn write_sample(root: &Path, sample: &Sample) -> Result<ManifestEntry> {
    let bytes = container::encode(
        &sample.meta.id,
        sample.meta.sample_type,
        &sample.record,
        &sample.label100,
        &sample.label16,
    );
    let file = format!("{SAMPLE_DIR}/{}.wsmp", sample.meta.id);
    write_atomic(&root.join(&file), &bytes)?;
    Ok(ManifestEntry {
        meta: sample.meta.clone(),
        file,
        bytes: bytes.len() as u64,
        checksum: format!("{:016x}", checksum64(&bytes)),
    })
}

/// Reusable entries from an earlier interrupted build with the same config.
fn recover_partial(out: &Path, config: &DatasetConfig) -> HashMap<String, ManifestEntry> {
    let path = out.join(PARTIAL_MANIFEST_FILE);
    let Ok(partial) = DatasetManifest::read(&path) else {
        return HashMap::new();
    };
    if &partial.config != config {
        log::warn!("ignoring {}: it was written for a different config", path.display());
        return HashMap::new();
    }
    partial
        .samples
        .into_iter()
        .filter(|e| verify_file(out, e).is_ok())
        .map(|e| (e.meta.id.clone(), e))
        .collect()
}

/// Generates every planned sample into `out` and writes the manifest.
///
/// On failure the completed entries are written to `manifest.partial.json`;
/// a later build with the same config resumes from them.
pub fn build_dataset(config: &DatasetConfig, out: &Path, options: &BuildOptions) -> Result<BuildReport> {
    let plans = plan_dataset(config)?;
    let samples_dir = out.join(SAMPLE_DIR);
    fs::create_dir_all(&samples_dir).map_err(|e| Error::io(&samples_dir, e))?;
    let reusable = recover_partial(out, config);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = options.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    let results: Vec<(Result<ManifestEntry>, bool)> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| {
                let r = match reusable.get(&plan.id) {
                    Some(e) => (Ok(e.clone()), true),
                    None => (generate_sample(plan, config).and_then(|s| write_sample(out, &s)), false),
                };
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                log::info!("[{n}/{}] {}{}", plans.len(), plan.id, if r.1 { " (reused)" } else { "" });
                r
            })
            .collect()
    });

    let reused = results.iter().filter(|(r, hit)| *hit && r.is_ok()).count();
    let generated = results.iter().filter(|(r, hit)| !*hit && r.is_ok()).count();
    let mut entries = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (r, _) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(err) = first_err {
        let partial = DatasetManifest::new(config, entries);
        let path = out.join(PARTIAL_MANIFEST_FILE);
        partial.write(&path)?;
        log::error!(
            "dataset build stopped after {} of {} samples; progress saved to {}",
            partial.samples.len(),
            plans.len(),
            path.display()
        );
        return Err(err);
    }
    let manifest = DatasetManifest::new(config, entries);
    let manifest_path = out.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    let partial = out.join(PARTIAL_MANIFEST_FILE);
    if partial.exists() {
        fs::remove_file(&partial).map_err(|e| Error::io(&partial, e))?;
    }
    Ok(BuildReport {
        manifest,
        manifest_path,
        generated,
        reused,
    })
}

/// Read-only view of a built dataset.
#[derive(Debug, Clone)]
pub struct DatasetReader {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

pub fn load_dataset(manifest_path: &Path) -> Result<DatasetReader> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(DatasetReader { manifest, root })
}

impl DatasetReader {
    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    /// Loads one entry, verifying size, checksum and header consistency.
    pub fn read_entry(&self, entry: &ManifestEntry) -> Result<Sample> {
        let bytes = verify_file(&self.root, entry)?;
        let blob = container::decode(&bytes).map_err(|e| Error::Corruption {
            id: entry.meta.id.clone(),
            reason: e.to_string(),
        })?;
        if blob.id != entry.meta.id || blob.sample_type != entry.meta.sample_type {
            return Err(Error::Corruption {
                id: entry.meta.id.clone(),
                reason: format!("file holds `{}` ({:?})", blob.id, blob.sample_type),
            });
        }
        Ok(Sample {
            meta: entry.meta.clone(),
            record: blob.record,
            label100: blob.label100,
            label16: blob.label16,
        })
    }

    /// Streams samples in manifest order, one file at a time.
    pub fn iter(&self) -> impl Iterator<Item = Result<Sample>> + '_ {
        self.manifest.samples.iter().map(|e| self.read_entry(e))
    }
}

//! Scoring prediction directories against a dataset's test split.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crackwave::dataset::{load_dataset, Split};
use crackwave::metrics::{
    adjusted_accuracy, binarize, crack_size, evaluate, format_table, iou_histograms, read_prediction_dir, Averaging,
    EvalReport, TableRow, Truth, DEFAULT_BIN_WIDTH, DEFAULT_T_BIN, DEFAULT_T_TOL,
};
use crackwave::{Error, Result};

use crate::render::{mosaic, save_png};

/// Grids per line in mosaic images.
pub const MOSAIC_COLUMNS: usize = 16;
const MOSAIC_SCALE: u32 = 4;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub t_bin: f64,
    pub t_tol: f64,
    pub averaging: Averaging,
    /// Binarizing thresholds for the IoU histograms.
    pub hist_t_bins: Vec<f64>,
    pub bin_width: f64,
    /// Crack-size cutoffs for the adjusted accuracy curve.
    pub cutoffs: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            t_bin: DEFAULT_T_BIN,
            t_tol: DEFAULT_T_TOL,
            averaging: Averaging::Micro,
            hist_t_bins: vec![0.3, 0.5, 0.7],
            bin_width: DEFAULT_BIN_WIDTH,
            cutoffs: (0..=10).map(|k| k as f64 * 0.0005).collect(),
        }
    }
}

/// Test-split ground truth in manifest order.
pub fn test_truths(manifest: &Path) -> Result<Vec<Truth>> {
    let reader = load_dataset(manifest)?;
    let mut truths = Vec::new();
    for entry in reader.manifest.samples.iter().filter(|e| e.meta.split == Split::Test) {
        let s = reader.read_entry(entry)?;
        truths.push(Truth {
            id: s.meta.id.clone(),
            label16: s.label16.bits.clone(),
            crack_size: crack_size(&s.label100),
            has_crack: s.meta.sample_type.has_crack(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Config(format!("{} has no test samples", manifest.display())));
    }
    Ok(truths)
}

fn dir_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub rows: Vec<TableRow>,
    pub run_dirs: Vec<PathBuf>,
}

/// Scores every prediction directory and writes `table.md`, a ground-truth
/// mosaic and one folder per run with the report, histograms, adjusted
/// accuracy curve and prediction mosaics.
pub fn cmd_eval(manifest: &Path, predictions: &[PathBuf], out: &Path, options: &EvalOptions) -> Result<EvalOutput> {
    if predictions.is_empty() {
        return Err(Error::Config("at least one prediction directory is required".into()));
    }
    let truths = test_truths(manifest)?;
    let mut runs = Vec::new();
    for dir in predictions {
        let (grids, info) = read_prediction_dir(dir)?;
        let report = evaluate(&truths, &grids, options.t_bin, options.t_tol, options.averaging)?;
        let hist_reports = options
            .hist_t_bins
            .iter()
            .map(|&t| evaluate(&truths, &grids, t, options.t_tol, options.averaging))
            .collect::<Result<Vec<EvalReport>>>()?;
        let histograms = iou_histograms(&hist_reports, options.bin_width)?;
        let adjusted = adjusted_accuracy(&report.samples, &options.cutoffs, options.t_tol)?;
        let probs: Vec<Vec<f64>> = truths.iter().map(|t| grids[&t.id].probs.clone()).collect();
        let label = info.label.clone().unwrap_or_else(|| {
            dir.file_name()
                .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned())
        });
        runs.push((label, info, report, histograms, adjusted, probs));
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let labels: Vec<Vec<f64>> = truths
        .iter()
        .map(|t| t.label16.iter().map(|&b| b as f64).collect())
        .collect();
    let refs: Vec<&[f64]> = labels.iter().map(|v| &v[..]).collect();
    save_png(&mosaic(&refs, 16, 16, MOSAIC_COLUMNS, MOSAIC_SCALE, 1), &out.join("labels.png"))?;

    let mut rows = Vec::new();
    let mut run_dirs = Vec::new();
    let mut used = HashSet::new();
    for (label, info, report, histograms, adjusted, probs) in runs {
        let mut name = dir_name(&label);
        let mut k = 1;
        while !used.insert(name.clone()) {
            k += 1;
            name = format!("{}-{k}", dir_name(&label));
        }
        let dir = out.join("runs").join(&name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_text(&dir.join("report.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;

        let mut hist = String::from("t_bin\tlower_edge\tcount\tcumulative\n");
        for h in &histograms {
            for k in 0..h.counts.len() {
                hist.push_str(&format!("{}\t{:.4}\t{}\t{}\n", h.t_bin, h.lower_edges[k], h.counts[k], h.cumulative[k]));
            }
        }
        write_text(&dir.join("histograms.tsv"), &hist)?;

        let mut adj = String::from("cutoff\tretained\taccuracy\n");
        for p in &adjusted {
            let acc = p.accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.6}"));
            adj.push_str(&format!("{}\t{}\t{acc}\n", p.cutoff, p.retained));
        }
        write_text(&dir.join("adjusted.tsv"), &adj)?;

        let refs: Vec<&[f64]> = probs.iter().map(|v| &v[..]).collect();
        save_png(&mosaic(&refs, 16, 16, MOSAIC_COLUMNS, MOSAIC_SCALE, 1), &dir.join("probability.png"))?;
        let bins: Vec<Vec<f64>> = probs
            .iter()
            .map(|p| binarize(p, options.t_bin).into_iter().map(f64::from).collect())
            .collect();
        let refs: Vec<&[f64]> = bins.iter().map(|v| &v[..]).collect();
        save_png(&mosaic(&refs, 16, 16, MOSAIC_COLUMNS, MOSAIC_SCALE, 1), &dir.join("binarized.png"))?;

        run_dirs.push(dir);
        rows.push(TableRow {
            gamma: info.gamma,
            alpha: info.alpha,
            label,
            report,
        });
    }
    let table = format_table(&rows);
    write_text(&out.join("table.md"), &table)?;
    print!("{table}");
    Ok(EvalOutput { rows, run_dirs })
}

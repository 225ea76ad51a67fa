//! Losses and evaluation metrics for grid-cell crack predictions.

pub mod prediction;

use serde::{Deserialize, Serialize};

use crate::crack::LabelImage;
use crate::error::{Error, Result};
pub use prediction::{read_prediction_dir, PredictionGrid, RunInfo, PREDICTION_EXTENSION};

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;
pub const DEFAULT_T_BIN: f64 = 0.5;
pub const DEFAULT_T_TOL: f64 = 0.5;
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

/// Divisor applied to the summed per-pixel loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossNormalization {
    /// Divide by the number of samples.
    PerSample,
    /// Divide by the number of pixels over all samples.
    PerPixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl FocalParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

fn check_batch(probs: &[f64], labels: &[u8], n_samples: usize) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", probs.len()),
            actual: format!("{}", labels.len()),
        });
    }
    if n_samples == 0 || probs.len() % n_samples != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("a positive multiple of {n_samples} sample(s)"),
            actual: format!("{} values", probs.len()),
        });
    }
    if let Some(i) = labels.iter().position(|&y| y > 1) {
        return Err(Error::invalid("labels", format!("label at {i} is not binary")));
    }
    Ok(())
}

/// `p_t`: the clamped probability assigned to the true class.
fn p_true(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y == 1 {
        p
    } else {
        1.0 - p
    }
}

fn normalize(sum: f64, n_values: usize, n_samples: usize, norm: LossNormalization) -> f64 {
    match norm {
        LossNormalization::PerSample => sum / n_samples as f64,
        LossNormalization::PerPixel => sum / n_values as f64,
    }
}

/// Mean of `−ln p_t` over every pixel of every sample.
///
/// `probs` and `labels` hold `n_samples` equally sized grids back to back.
pub fn cross_entropy(probs: &[f64], labels: &[u8], n_samples: usize) -> Result<f64> {
    cross_entropy_with(probs, labels, n_samples, LossNormalization::PerPixel)
}

pub fn cross_entropy_with(probs: &[f64], labels: &[u8], n_samples: usize, norm: LossNormalization) -> Result<f64> {
    check_batch(probs, labels, n_samples)?;
    let sum: f64 = probs.iter().zip(labels).map(|(&p, &y)| -p_true(p, y).ln()).sum();
    Ok(normalize(sum, probs.len(), n_samples, norm))
}

/// Focal loss `−α_t (1 − p_t)^γ ln p_t`, summed over pixels and divided by
/// the sample count.
pub fn focal_loss(probs: &[f64], labels: &[u8], n_samples: usize, params: FocalParams) -> Result<f64> {
    focal_loss_with(probs, labels, n_samples, params, LossNormalization::PerSample)
}

pub fn focal_loss_with(
    probs: &[f64],
    labels: &[u8],
    n_samples: usize,
    params: FocalParams,
    norm: LossNormalization,
) -> Result<f64> {
    params.validate()?;
    check_batch(probs, labels, n_samples)?;
    let sum: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| focal_term(p, y, params))
        .sum();
    Ok(normalize(sum, probs.len(), n_samples, norm))
}

/// Loss of one pixel.
pub fn focal_term(p: f64, y: u8, params: FocalParams) -> f64 {
    let pt = p_true(p, y);
    let alpha_t = if y == 1 { params.alpha } else { 1.0 - params.alpha };
    -alpha_t * (1.0 - pt).powf(params.gamma) * pt.ln()
}

/// Per-pixel outcome counts of a binary prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// True when neither prediction nor label has a lit pixel.
    pub fn is_empty_agreement(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    /// `TP/(TP+FP)`; 1 for a correct empty prediction, 0 when nothing is predicted
    /// but damage exists.
    pub fn precision(&self) -> f64 {
        ratio_or(self.tp, self.tp + self.fp, self.is_empty_agreement())
    }

    /// `TP/(TP+FN)`, with the same conventions as [`Confusion::precision`].
    pub fn recall(&self) -> f64 {
        ratio_or(self.tp, self.tp + self.fn_, self.is_empty_agreement())
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;
    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio_or(num: usize, den: usize, empty: bool) -> f64 {
    if den > 0 {
        num as f64 / den as f64
    } else if empty {
        1.0
    } else {
        0.0
    }
}

/// `1` where `p > t_bin`.
pub fn binarize(probs: &[f64], t_bin: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > t_bin)).collect()
}

pub fn confusion(pred: &[u8], label: &[u8]) -> Result<Confusion> {
    if pred.len() != label.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} pixels", label.len()),
            actual: format!("{}", pred.len()),
        });
    }
    let mut c = Confusion::default();
    for (&p, &y) in pred.iter().zip(label) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Dice coefficient; 1 when prediction and label are both empty.
pub fn dsc(c: &Confusion) -> f64 {
    ratio_or(2 * c.tp, 2 * c.tp + c.fp + c.fn_, true)
}

/// Intersection over union; 1 when prediction and label are both empty.
pub fn iou(c: &Confusion) -> f64 {
    ratio_or(c.tp, c.tp + c.fp + c.fn_, true)
}

/// Fraction of lit pixels in a label image.
pub fn crack_size(label: &LabelImage) -> f64 {
    label.lit_count() as f64 / (label.width * label.height) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    pub confusion: Confusion,
    pub iou: f64,
    pub dsc: f64,
    /// Crack size of the 100x100 label; zero for no-crack samples.
    pub crack_size: f64,
    pub has_crack: bool,
}

impl SampleReport {
    pub fn new(id: impl Into<String>, confusion: Confusion, crack_size: f64, has_crack: bool) -> Self {
        SampleReport {
            id: id.into(),
            iou: iou(&confusion),
            dsc: dsc(&confusion),
            confusion,
            crack_size,
            has_crack,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool pixel counts over all samples.
    #[default]
    Micro,
    /// Average per-sample rates.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub t_bin: f64,
    pub t_tol: f64,
    pub averaging: Averaging,
    pub samples: Vec<SampleReport>,
    pub precision: f64,
    pub recall: f64,
    pub mean_iou: f64,
    pub mean_dsc: f64,
    pub accuracy: f64,
}

/// Ground truth for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub id: String,
    /// 16x16 label, row-major.
    pub label16: Vec<u8>,
    pub crack_size: f64,
    pub has_crack: bool,
}

fn check_threshold(name: &'static str, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(name, format!("must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Fraction of samples whose IoU exceeds `t_tol`.
pub fn accuracy(samples: &[SampleReport], t_tol: f64) -> Result<f64> {
    check_threshold("t_tol", t_tol)?;
    if samples.is_empty() {
        return Err(Error::invalid("reports", "accuracy of an empty report set"));
    }
    Ok(samples.iter().filter(|s| s.iou > t_tol).count() as f64 / samples.len() as f64)
}

/// Scores predictions against ground truth, matched by sample id.
pub fn evaluate(
    truths: &[Truth],
    predictions: &std::collections::HashMap<String, PredictionGrid>,
    t_bin: f64,
    t_tol: f64,
    averaging: Averaging,
) -> Result<EvalReport> {
    check_threshold("t_bin", t_bin)?;
    let mut samples = Vec::with_capacity(truths.len());
    for t in truths {
        let pred = predictions
            .get(&t.id)
            .ok_or_else(|| Error::MissingPrediction(t.id.clone()))?;
        let c = confusion(&binarize(&pred.probs, t_bin), &t.label16)?;
        samples.push(SampleReport::new(t.id.clone(), c, t.crack_size, t.has_crack));
    }
    summarize(samples, t_bin, t_tol, averaging)
}

/// Aggregates per-sample reports.
pub fn summarize(samples: Vec<SampleReport>, t_bin: f64, t_tol: f64, averaging: Averaging) -> Result<EvalReport> {
    let acc = accuracy(&samples, t_tol)?;
    let n = samples.len() as f64;
    let (precision, recall) = match averaging {
        Averaging::Micro => {
            let pooled = samples.iter().fold(Confusion::default(), |a, s| a + s.confusion);
            (pooled.precision(), pooled.recall())
        }
        Averaging::Macro => (
            samples.iter().map(|s| s.confusion.precision()).sum::<f64>() / n,
            samples.iter().map(|s| s.confusion.recall()).sum::<f64>() / n,
        ),
    };
    Ok(EvalReport {
        t_bin,
        t_tol,
        averaging,
        precision,
        recall,
        mean_iou: samples.iter().map(|s| s.iou).sum::<f64>() / n,
        mean_dsc: samples.iter().map(|s| s.dsc).sum::<f64>() / n,
        accuracy: acc,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedPoint {
    pub cutoff: f64,
    /// Samples left after the cutoff.
    pub retained: usize,
    /// `None` when no sample survives.
    pub accuracy: Option<f64>,
}

/// Accuracy after dropping cracked samples smaller than each cutoff;
/// no-crack samples are always kept.
pub fn adjusted_accuracy(samples: &[SampleReport], cutoffs: &[f64], t_tol: f64) -> Result<Vec<AdjustedPoint>> {
    check_threshold("t_tol", t_tol)?;
    Ok(cutoffs
        .iter()
        .map(|&cutoff| {
            let kept: Vec<SampleReport> = samples
                .iter()
                .filter(|s| !s.has_crack || s.crack_size >= cutoff)
                .cloned()
                .collect();
            AdjustedPoint {
                cutoff,
                retained: kept.len(),
                accuracy: accuracy(&kept, t_tol).ok(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouHistogram {
    pub t_bin: f64,
    pub bin_width: f64,
    /// Lower edge of each bin; the last bin is closed at 1.
    pub lower_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `cumulative[k]` = samples with IoU in bins `0..=k`.
    pub cumulative: Vec<usize>,
}

pub fn iou_histogram(report: &EvalReport, bin_width: f64) -> Result<IouHistogram> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::invalid("bin_width", format!("must lie in (0, 1], got {bin_width}")));
    }
    let n_bins = (1.0 / bin_width).round().max(1.0) as usize;
    let mut counts = vec![0usize; n_bins];
    for s in &report.samples {
        let k = ((s.iou * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let cumulative = counts
        .iter()
        .scan(0, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    Ok(IouHistogram {
        t_bin: report.t_bin,
        bin_width: 1.0 / n_bins as f64,
        lower_edges: (0..n_bins).map(|k| k as f64 / n_bins as f64).collect(),
        counts,
        cumulative,
    })
}

/// One histogram per report (one report per binarizing threshold).
pub fn iou_histograms(reports: &[EvalReport], bin_width: f64) -> Result<Vec<IouHistogram>> {
    if reports.is_empty() {
        return Err(Error::invalid("t_bin", "need at least one binarizing threshold"));
    }
    reports.iter().map(|r| iou_histogram(r, bin_width)).collect()
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub label: String,
    pub report: EvalReport,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

/// Plain-text table with columns γ, α, precision, recall, IoU, DSC, accuracy.
pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = String::from("| run | γ | α | prec. | recall | IoU | DSC | accu. |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let m = &r.report;
        out.push_str(&format!(
            "| {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
            r.label,
            opt(r.gamma),
            opt(r.alpha),
            m.precision,
            m.recall,
            m.mean_iou,
            m.mean_dsc,
            m.accuracy
        ));
    }
    out
}

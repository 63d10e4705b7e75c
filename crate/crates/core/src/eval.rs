//! Accuracy, per-class recall and confusion matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::Model;
use crate::pipeline::{ActivityLabel, FeatureWindow, N_CLASSES};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its total; rows with no samples stay all-zero.
    pub row_normalized: Vec<Vec<f64>>,
    /// True for rows with no samples.
    pub empty_rows: Vec<bool>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let mut row_normalized = Vec::with_capacity(counts.len());
        let mut empty_rows = Vec::with_capacity(counts.len());
        for row in &counts {
            let total: u64 = row.iter().sum();
            empty_rows.push(total == 0);
            row_normalized.push(
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect(),
            );
        }
        ConfusionMatrix {
            counts,
            row_normalized,
            empty_rows,
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_recall: Vec<f64>,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut counts = vec![vec![0u64; k]; k];
        let mut n = 0usize;
        for (truth, pred) in pairs {
            if truth >= k || pred >= k {
                return Err(Error::contract(format!("class index out of range 0..{k}")));
            }
            counts[truth][pred] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::contract("evaluation needs at least one sample"));
        }
        Ok(Self::from_confusion(ConfusionMatrix::from_counts(counts)))
    }

    fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let n = confusion.total() as usize;
        let trace: u64 = (0..confusion.k()).map(|i| confusion.counts[i][i]).sum();
        let per_class_recall = (0..confusion.k()).map(|i| confusion.row_normalized[i][i]).collect();
        EvalReport {
            accuracy: trace as f64 / n as f64,
            confusion,
            per_class_recall,
            n_samples: n,
        }
    }

    pub fn recall(&self, label: ActivityLabel) -> f64 {
        self.per_class_recall[label.index()]
    }
}

/// Predict every window and tally the outcomes.
pub fn evaluate<'a>(model: &Model, windows: impl IntoIterator<Item = FeatureWindow<'a>>) -> Result<EvalReport> {
    let prepared = model.prepare();
    let mut pairs = Vec::new();
    for w in windows {
        let (pred, _) = prepared.predict(&w)?;
        pairs.push((w.target.index(), pred));
    }
    EvalReport::from_pairs(model.n_classes, pairs)
}

/// Mean and population standard deviation of per-epoch accuracies.
pub fn mean_epoch_accuracy(log: &[f64]) -> Result<(f64, f64)> {
    if log.is_empty() {
        return Err(Error::contract("mean over an empty accuracy log"));
    }
    let n = log.len() as f64;
    let mean = log.iter().sum::<f64>() / n;
    let var = log.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

pub const REPORT_MAGIC: &str = "flockact-report";
pub const REPORT_VERSION: u32 = 1;

/// Row/column order of the rendered matrix: Herd M., Active, Not Active.
const DISPLAY_ORDER: [ActivityLabel; N_CLASSES] = [
    ActivityLabel::HerdMovement,
    ActivityLabel::Active,
    ActivityLabel::NotActive,
];

/// Text report:
///
/// ```text
/// flockact-report 1
/// n_samples <n>
/// accuracy <real>
/// recall <label> <real>                  (herd, active, not_active)
/// counts <true label> <n_herd> <n_active> <n_not_active>
/// matrix
/// <aligned row-normalized table, rows and columns Herd M. / Active / Not Active>
/// ```
///
/// `counts` lines carry the full information; the table after `matrix` is
/// for reading and must agree with them to four decimals.
pub fn format_report(report: &EvalReport) -> Result<String> {
    if report.confusion.k() != N_CLASSES {
        return Err(Error::contract("text reports cover the three activity classes"));
    }
    let mut s = format!("{REPORT_MAGIC} {REPORT_VERSION}\n");
    s.push_str(&format!("n_samples {}\n", report.n_samples));
    s.push_str(&format!("accuracy {}\n", report.accuracy));
    for l in DISPLAY_ORDER {
        s.push_str(&format!("recall {} {}\n", l.as_str(), report.recall(l)));
    }
    for r in DISPLAY_ORDER {
        s.push_str(&format!("counts {}", r.as_str()));
        for c in DISPLAY_ORDER {
            s.push_str(&format!(" {}", report.confusion.counts[r.index()][c.index()]));
        }
        s.push('\n');
    }
    s.push_str("matrix\n");
    s.push_str(&format!("{:<12}", ""));
    for c in DISPLAY_ORDER {
        s.push_str(&format!("{:>12}", c.display_name()));
    }
    s.push('\n');
    for r in DISPLAY_ORDER {
        s.push_str(&format!("{:<12}", r.display_name()));
        for c in DISPLAY_ORDER {
            s.push_str(&format!("{:>12.4}", report.confusion.row_normalized[r.index()][c.index()]));
        }
        if report.confusion.empty_rows[r.index()] {
            s.push_str("  (no samples)");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let bad = |line: usize, msg: String| Error::Parse { line: line as u64 + 1, msg };
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.first().ok_or_else(|| bad(0, "empty report".into()))?;
    if *header != format!("{REPORT_MAGIC} {REPORT_VERSION}") {
        return Err(bad(0, format!("unsupported report header `{header}`")));
    }
    let mut n_samples = None;
    let mut accuracy = None;
    let mut counts = vec![vec![0u64; N_CLASSES]; N_CLASSES];
    let mut seen_rows = [false; N_CLASSES];
    let mut matrix_at = None;
    for (i, line) in lines.iter().enumerate().skip(1) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["n_samples", v] => n_samples = Some(v.parse::<usize>().map_err(|_| bad(i, format!("bad n_samples `{v}`")))?),
            ["accuracy", v] => accuracy = Some(v.parse::<f64>().map_err(|_| bad(i, format!("bad accuracy `{v}`")))?),
            ["recall", _, _] => {}
            ["counts", label, rest @ ..] if rest.len() == N_CLASSES => {
                let r: ActivityLabel = label.parse().map_err(|_| bad(i, format!("bad label `{label}`")))?;
                for (c, v) in DISPLAY_ORDER.iter().zip(rest) {
                    counts[r.index()][c.index()] = v.parse().map_err(|_| bad(i, format!("bad count `{v}`")))?;
                }
                seen_rows[r.index()] = true;
            }
            ["matrix"] => {
                matrix_at = Some(i);
                break;
            }
            _ => return Err(bad(i, format!("unexpected line `{line}`"))),
        }
    }
    if !seen_rows.iter().all(|&s| s) {
        return Err(bad(lines.len(), "missing counts rows".into()));
    }
    let report = EvalReport::from_confusion(ConfusionMatrix::from_counts(counts));
    if n_samples != Some(report.n_samples) {
        return Err(bad(1, "n_samples disagrees with counts".into()));
    }
    match accuracy {
        Some(a) if a == report.accuracy => {}
        _ => return Err(bad(2, "accuracy disagrees with counts".into())),
    }
    let m = matrix_at.ok_or_else(|| bad(lines.len(), "missing matrix block".into()))?;
    for (j, r) in DISPLAY_ORDER.iter().enumerate() {
        let i = m + 2 + j;
        let line = lines.get(i).ok_or_else(|| bad(i, "truncated matrix block".into()))?;
        let body = line.get(12..).ok_or_else(|| bad(i, "short matrix row".into()))?;
        let values: Vec<f64> = body
            .split_whitespace()
            .take(N_CLASSES)
            .map(|v| v.parse::<f64>().map_err(|_| bad(i, format!("bad matrix entry `{v}`"))))
            .collect::<Result<_>>()?;
        for (c, v) in DISPLAY_ORDER.iter().zip(values) {
            if (report.confusion.row_normalized[r.index()][c.index()] - v).abs() > 5.1e-5 {
                return Err(bad(i, "matrix block disagrees with counts".into()));
            }
        }
    }
    Ok(report)
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(path, format_report(report)?.as_bytes())
}

//! Evaluation arithmetic: confusion matrices, UA (macro recall), WA (overall
//! accuracy), macro F1, and unweighted fold averaging. All metrics are percent.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::EmotionClass;

/// Rows are gold classes, columns are predicted classes, both in canonical order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: EmotionClass, pred: EmotionClass) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn get(&self, gold: EmotionClass, pred: EmotionClass) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }
}

pub fn confusion(gold: &[EmotionClass], pred: &[EmotionClass]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::Evaluation(format!(
            "label count mismatch: {} gold vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Evaluation("no labels to score".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.add(*g, *p);
    }
    Ok(cm)
}

/// Mean recall over classes present in the gold labels.
pub fn ua(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls: Vec<f64> = (0..4)
        .filter_map(|i| {
            let n = cm.row_sum(i);
            (n > 0).then(|| cm.counts[i][i] as f64 / n as f64)
        })
        .collect();
    if recalls.is_empty() {
        return Err(Error::Evaluation("confusion matrix is empty".into()));
    }
    Ok(100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64)
}

pub fn wa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Evaluation("confusion matrix is empty".into()));
    }
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

/// Mean per-class F1 over all four classes; a class with P + R = 0 scores 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::Evaluation("confusion matrix is empty".into()));
    }
    let f1_sum: f64 = (0..4)
        .map(|i| {
            let tp = cm.counts[i][i] as f64;
            let predicted = cm.col_sum(i) as f64;
            let actual = cm.row_sum(i) as f64;
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if actual > 0.0 { tp / actual } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .sum();
    Ok(100.0 * f1_sum / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub ua: f64,
    pub wa: f64,
    pub f1: f64,
}

impl MetricSet {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            ua: ua(cm)?,
            wa: wa(cm)?,
            f1: macro_f1(cm)?,
        })
    }

    pub fn minus(&self, other: &MetricSet) -> MetricSet {
        MetricSet {
            ua: self.ua - other.ua,
            wa: self.wa - other.wa,
            f1: self.f1 - other.f1,
        }
    }
}

/// Before (primary only) and after (merged) metrics for one fold.
/// `fold` is `None` for an averaged report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldReport {
    pub fold: Option<u32>,
    pub before: MetricSet,
    pub after: MetricSet,
}

impl FoldReport {
    pub fn change(&self) -> MetricSet {
        self.after.minus(&self.before)
    }
}

pub fn average_folds(reports: &[FoldReport]) -> Result<FoldReport> {
    if reports.is_empty() {
        return Err(Error::Evaluation("no fold reports to average".into()));
    }
    let n = reports.len() as f64;
    let mean = |pick: fn(&FoldReport) -> f64| reports.iter().map(pick).sum::<f64>() / n;
    Ok(FoldReport {
        fold: if reports.len() == 1 {
            reports[0].fold
        } else {
            None
        },
        before: MetricSet {
            ua: mean(|r| r.before.ua),
            wa: mean(|r| r.before.wa),
            f1: mean(|r| r.before.f1),
        },
        after: MetricSet {
            ua: mean(|r| r.after.ua),
            wa: mean(|r| r.after.wa),
            f1: mean(|r| r.after.f1),
        },
    })
}

fn fold_name(fold: Option<u32>) -> String {
    fold.map_or_else(|| "AVG".to_string(), |f| f.to_string())
}

/// `fold,variant,ua,wa,f1` with before/after rows per fold and a trailing AVG pair.
pub fn write_report<W: Write>(writer: W, folds: &[FoldReport], avg: &FoldReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["fold", "variant", "ua", "wa", "f1"])?;
    let avg = FoldReport { fold: None, ..*avg };
    for r in folds.iter().chain(std::iter::once(&avg)) {
        for (variant, m) in [("before", &r.before), ("after", &r.after)] {
            wtr.write_record([
                fold_name(r.fold),
                variant.to_string(),
                format!("{:.4}", m.ua),
                format!("{:.4}", m.wa),
                format!("{:.4}", m.f1),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `fold,ua,wa,f1` holding after − before per fold, then AVG.
pub fn write_changes<W: Write>(writer: W, folds: &[FoldReport], avg: &FoldReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["fold", "ua", "wa", "f1"])?;
    let avg = FoldReport { fold: None, ..*avg };
    for r in folds.iter().chain(std::iter::once(&avg)) {
        let c = r.change();
        wtr.write_record([
            fold_name(r.fold),
            format!("{:.4}", c.ua),
            format!("{:.4}", c.wa),
            format!("{:.4}", c.f1),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Plain-text table in the "Before / After (Change)" layout.
pub fn render_table(folds: &[FoldReport], avg: &FoldReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>5} | {:>24} | {:>24} | {:>24}\n",
        "Fold", "UA before/after (chg)", "WA before/after (chg)", "F1 before/after (chg)"
    ));
    let avg = FoldReport { fold: None, ..*avg };
    for r in folds.iter().chain(std::iter::once(&avg)) {
        let c = r.change();
        let cell = |b: f64, a: f64, d: f64| format!("{b:.2} / {a:.2} ({d:+.2})");
        out.push_str(&format!(
            "{:>5} | {:>24} | {:>24} | {:>24}\n",
            fold_name(r.fold),
            cell(r.before.ua, r.after.ua, c.ua),
            cell(r.before.wa, r.after.wa, c.wa),
            cell(r.before.f1, r.after.f1, c.f1),
        ));
    }
    out
}

//! Helpers for the acceptance suite: brute-force metric recounts and a small
//! pass/fail reporter.

use std::time::{Duration, Instant};

use fuselect_core::EmotionClass;

/// UA, WA, and macro F1 (percent) recounted directly from label lists,
/// without building a confusion matrix.
pub fn brute_force_metrics(gold: &[EmotionClass], pred: &[EmotionClass]) -> (f64, f64, f64) {
    let n = gold.len();
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let wa = 100.0 * hits as f64 / n as f64;

    let mut recalls = Vec::new();
    let mut f1s = Vec::new();
    for c in EmotionClass::ALL {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| **g == c && **p == c)
            .count() as f64;
        let gold_c = gold.iter().filter(|g| **g == c).count() as f64;
        let pred_c = pred.iter().filter(|p| **p == c).count() as f64;
        if gold_c > 0.0 {
            recalls.push(tp / gold_c);
        }
        let precision = if pred_c > 0.0 { tp / pred_c } else { 0.0 };
        let recall = if gold_c > 0.0 { tp / gold_c } else { 0.0 };
        f1s.push(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
    }
    let ua = 100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64;
    let f1 = 100.0 * f1s.iter().sum::<f64>() / f1s.len() as f64;
    (ua, wa, f1)
}

/// Collects one verdict per criterion and prints it as it is recorded.
#[derive(Default)]
pub struct Verdicts {
    failed: Vec<u32>,
}

impl Verdicts {
    pub fn record(&mut self, criterion: u32, ok: bool, detail: &str) {
        println!(
            "criterion {criterion}: {} — {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failed.push(criterion);
        }
    }

    pub fn failed(&self) -> &[u32] {
        &self.failed
    }
}

/// Runs `f` and returns its value with the elapsed wall time.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

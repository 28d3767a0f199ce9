//! Per-class entropy and varentropy histograms, split by whether the primary
//! prediction was correct.

use std::io::Write;

use crate::error::Result;
use crate::types::{EmotionClass, ScoreRecord};

pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Measure {
    Entropy,
    Varentropy,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Entropy => "entropy",
            Measure::Varentropy => "varentropy",
        }
    }

    fn of(self, r: &ScoreRecord) -> f64 {
        match self {
            Measure::Entropy => r.entropy(),
            Measure::Varentropy => r.varentropy(),
        }
    }
}

/// Bin counts for one (predicted class, measure) panel. Both outcome series
/// share the bin edges `lo + i * (hi - lo) / bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub class: EmotionClass,
    pub measure: Measure,
    pub lo: f64,
    pub hi: f64,
    pub correct: Vec<u64>,
    pub incorrect: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.correct.len()
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.bins() as f64;
        (
            self.lo + bin as f64 * width,
            self.lo + (bin + 1) as f64 * width,
        )
    }

    /// Mean of bin centres weighted by counts; `None` for an empty series.
    pub fn center_of_mass(&self, counts: &[u64]) -> Option<f64> {
        let n: u64 = counts.iter().sum();
        (n > 0).then(|| {
            counts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let (a, b) = self.edges(i);
                    0.5 * (a + b) * *c as f64
                })
                .sum::<f64>()
                / n as f64
        })
    }
}

/// Histograms for every predicted class that has records, over the range
/// observed within that class. The maximum value lands in the last bin.
pub fn histograms(records: &[ScoreRecord], bins: usize) -> Vec<Histogram> {
    let bins = bins.max(1);
    let mut out = Vec::new();
    for class in EmotionClass::ALL {
        let mine: Vec<&ScoreRecord> = records.iter().filter(|r| r.prediction() == class).collect();
        if mine.is_empty() {
            continue;
        }
        for measure in [Measure::Entropy, Measure::Varentropy] {
            let values = mine.iter().map(|r| measure.of(r));
            let lo = values.clone().fold(f64::INFINITY, f64::min);
            let hi = values.fold(f64::NEG_INFINITY, f64::max);
            let mut h = Histogram {
                class,
                measure,
                lo,
                hi,
                correct: vec![0; bins],
                incorrect: vec![0; bins],
            };
            for r in &mine {
                let x = measure.of(r);
                let bin = if hi > lo {
                    (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
                } else {
                    0
                };
                if r.is_correct() {
                    h.correct[bin] += 1;
                } else {
                    h.incorrect[bin] += 1;
                }
            }
            out.push(h);
        }
    }
    out
}

/// `class,outcome,measure,bin,lo,hi,count`, one row per bin.
pub fn write_histograms<W: Write>(writer: W, hists: &[Histogram]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["class", "outcome", "measure", "bin", "lo", "hi", "count"])?;
    for h in hists {
        for (outcome, counts) in [("correct", &h.correct), ("incorrect", &h.incorrect)] {
            for (i, c) in counts.iter().enumerate() {
                let (a, b) = h.edges(i);
                wtr.write_record([
                    h.class.as_str().to_string(),
                    outcome.to_string(),
                    h.measure.as_str().to_string(),
                    i.to_string(),
                    a.to_string(),
                    b.to_string(),
                    c.to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

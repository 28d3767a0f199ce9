//! Synthetic score corpora with planted ground truth.
//!
//! Every utterance is drawn from one of five regimes. Confident regimes get a
//! sharp emotion vector (one dominant class), confused regimes a nearly flat
//! one. The regime of each utterance is returned separately from the records
//! and written to its own sidecar file.
//!
//! Each utterance has its own random stream (`seed`, stream = utterance index),
//! so generation is reproducible and independent of iteration order.

pub mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    EmotionClass, EmotionScore, ScoreRecord, SentimentClass, SentimentScore, Split,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Sharp scores on the gold class.
    ConfidentCorrect,
    /// Sharp scores on a wrong class.
    ConfidentWrong,
    /// Flat scores whose argmax is the gold class.
    ConfusedCorrect,
    /// Flat scores on a wrong class; the sentiment maps back to the gold class.
    ConfusedWrongSentimentHelps,
    /// Flat scores on a wrong class; the sentiment cannot map to the gold class.
    ConfusedWrongSentimentHurts,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::ConfidentCorrect,
        Regime::ConfidentWrong,
        Regime::ConfusedCorrect,
        Regime::ConfusedWrongSentimentHelps,
        Regime::ConfusedWrongSentimentHurts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ConfidentCorrect => "confident-correct",
            Regime::ConfidentWrong => "confident-wrong",
            Regime::ConfusedCorrect => "confused-correct",
            Regime::ConfusedWrongSentimentHelps => "confused-wrong-sentiment-helps",
            Regime::ConfusedWrongSentimentHurts => "confused-wrong-sentiment-hurts",
        }
    }

    pub fn is_confused(self) -> bool {
        !matches!(self, Regime::ConfidentCorrect | Regime::ConfidentWrong)
    }

    pub fn is_correct(self) -> bool {
        matches!(self, Regime::ConfidentCorrect | Regime::ConfusedCorrect)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Generation(format!("unknown regime `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    /// Utterances in the pool. Each appears once per fold in the score file.
    pub n_records: usize,
    pub folds: u32,
    pub regime_mix: BTreeMap<Regime, f64>,
    /// Dirichlet concentration of the spread around a sharp peak (> 1).
    pub concentration_confident: f64,
    /// Dirichlet concentration of the perturbation on a flat vector (<= 1).
    pub concentration_confused: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_records: 2000,
            folds: 10,
            regime_mix: BTreeMap::from([
                (Regime::ConfidentCorrect, 0.45),
                (Regime::ConfidentWrong, 0.10),
                (Regime::ConfusedCorrect, 0.10),
                (Regime::ConfusedWrongSentimentHelps, 0.30),
                (Regime::ConfusedWrongSentimentHurts, 0.05),
            ]),
            concentration_confident: 4.0,
            concentration_confused: 0.5,
            seed: 7,
        }
    }
}

impl CorpusSpec {
    /// A spec drawing every utterance from `regime`.
    pub fn single_regime(regime: Regime, n_records: usize, folds: u32, seed: u64) -> Self {
        Self {
            n_records,
            folds,
            regime_mix: BTreeMap::from([(regime, 1.0)]),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Generation(msg));
        if self.n_records == 0 {
            return fail("n_records must be at least 1".into());
        }
        if self.folds == 0 {
            return fail("folds must be at least 1".into());
        }
        let total: f64 = self.regime_mix.values().sum();
        if self.regime_mix.values().any(|f| f.is_nan() || *f < 0.0) || (total - 1.0).abs() > 1e-9 {
            return fail(format!(
                "regime fractions must be nonnegative and sum to 1, got {total}"
            ));
        }
        if !(self.concentration_confident > 1.0 && self.concentration_confident.is_finite()) {
            return fail("concentration_confident must be a finite value > 1".into());
        }
        if !(self.concentration_confused > 0.0 && self.concentration_confused <= 1.0) {
            return fail("concentration_confused must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Exact per-regime counts by largest remainder.
    fn regime_counts(&self) -> Vec<(Regime, usize)> {
        let n = self.n_records as f64;
        let mut counts: Vec<(Regime, usize, f64)> = self
            .regime_mix
            .iter()
            .map(|(r, f)| {
                let exact = f * n;
                (*r, exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let assigned: usize = counts.iter().map(|c| c.1).sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        // stable: larger remainder first, then canonical regime order
        order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2));
        for &i in order.iter().take(self.n_records - assigned) {
            counts[i].1 += 1;
        }
        counts.into_iter().map(|(r, c, _)| (r, c)).collect()
    }
}

/// A symmetric Dirichlet draw from normalized gamma variates. If every
/// variate underflows to zero the draw collapses to a random vertex.
pub fn sample_simplex<R: Rng + ?Sized>(dim: usize, concentration: f64, rng: &mut R) -> Vec<f64> {
    assert!(dim > 0 && concentration > 0.0, "invalid simplex parameters");
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        let mut v = vec![0.0; dim];
        v[rng.random_range(0..dim)] = 1.0;
        v
    }
}

/// Puts the largest entry of `v` at `target` by swapping.
fn move_max_to(v: &mut [f64], target: usize) {
    let max = (0..v.len())
        .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)))
        .unwrap_or(target);
    v.swap(max, target);
}

fn sentiment_of(class: EmotionClass) -> SentimentClass {
    match class {
        EmotionClass::Ang | EmotionClass::Sad => SentimentClass::Negative,
        EmotionClass::Hap => SentimentClass::Positive,
        EmotionClass::Neu => SentimentClass::Neutral,
    }
}

fn other_than<R: Rng + ?Sized, T: Copy + PartialEq>(all: &[T], not: T, rng: &mut R) -> T {
    let rest: Vec<T> = all.iter().copied().filter(|c| *c != not).collect();
    rest[rng.random_range(0..rest.len())]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedTruth {
    pub id: String,
    pub regime: Regime,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// One row per (utterance, fold), ordered by fold then utterance.
    pub records: Vec<ScoreRecord>,
    /// One row per utterance.
    pub planted: Vec<PlantedTruth>,
}

struct Utterance {
    label: EmotionClass,
    ps: EmotionScore,
    pt: SentimentScore,
}

fn emotion_vector<R: Rng + ?Sized>(
    spec: &CorpusSpec,
    regime: Regime,
    target: EmotionClass,
    rng: &mut R,
) -> [f64; 4] {
    let mut v = [0.0; 4];
    if regime.is_confused() {
        let spread = rng.random_range(0.02..0.2);
        let d = sample_simplex(4, spec.concentration_confused, rng);
        for (x, di) in v.iter_mut().zip(&d) {
            *x = (1.0 - spread) * 0.25 + spread * di;
        }
    } else {
        let peak = rng.random_range(0.6..0.9);
        let d = sample_simplex(4, spec.concentration_confident, rng);
        for (x, di) in v.iter_mut().zip(&d) {
            *x = (1.0 - peak) * di;
        }
        v[0] += peak;
    }
    move_max_to(&mut v, target.index());
    v
}

fn sentiment_vector<R: Rng + ?Sized>(
    spec: &CorpusSpec,
    sentiment: SentimentClass,
    confidence: f64,
    rng: &mut R,
) -> [f64; 3] {
    let d = sample_simplex(2, spec.concentration_confident, rng);
    let rest = 1.0 - confidence;
    let mut v = [0.0; 3];
    let mut others = d.iter();
    for (i, x) in v.iter_mut().enumerate() {
        *x = if i == sentiment.index() {
            confidence
        } else {
            rest * others.next().expect("two remaining classes")
        };
    }
    move_max_to(&mut v, sentiment.index());
    v
}

fn generate_utterance<R: Rng + ?Sized>(
    spec: &CorpusSpec,
    regime: Regime,
    rng: &mut R,
) -> Result<Utterance> {
    let label = EmotionClass::ALL[rng.random_range(0..4)];
    let target = if regime.is_correct() {
        label
    } else {
        other_than(&EmotionClass::ALL, label, rng)
    };

    // Retry the rare draw whose argmax ties onto an earlier class.
    let mut ps = emotion_vector(spec, regime, target, rng);
    while EmotionScore::new(ps)?.argmax() != target {
        ps = emotion_vector(spec, regime, target, rng);
    }

    let gold_sentiment = sentiment_of(label);
    let (sentiment, confidence) = match regime {
        Regime::ConfusedWrongSentimentHelps => {
            // make both Negative-sentiment strategies able to recover Ang/Sad
            let (ang, sad) = (EmotionClass::Ang.index(), EmotionClass::Sad.index());
            let wants = match label {
                EmotionClass::Ang => Some((ang, sad)),
                EmotionClass::Sad => Some((sad, ang)),
                _ => None,
            };
            if let Some((hi, lo)) = wants {
                if target.index() != lo && ps[hi] < ps[lo] {
                    ps.swap(hi, lo);
                }
            }
            let confidence = match label {
                EmotionClass::Ang => rng.random_range(0.5..0.65),
                EmotionClass::Sad => rng.random_range(0.75..0.95),
                _ => rng.random_range(0.5..0.95),
            };
            (gold_sentiment, confidence)
        }
        Regime::ConfusedWrongSentimentHurts => (
            other_than(&SentimentClass::ALL, gold_sentiment, rng),
            rng.random_range(0.5..0.95),
        ),
        _ => {
            let s = if rng.random_bool(0.5) {
                gold_sentiment
            } else {
                other_than(&SentimentClass::ALL, gold_sentiment, rng)
            };
            (s, rng.random_range(0.5..0.95))
        }
    };
    let pt = sentiment_vector(spec, sentiment, confidence, rng);
    Ok(Utterance {
        label,
        ps: EmotionScore::new(ps)?,
        pt: SentimentScore::new(pt)?,
    })
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;

    let mut regimes: Vec<Regime> = spec
        .regime_counts()
        .into_iter()
        .flat_map(|(r, c)| std::iter::repeat_n(r, c))
        .collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle_rng.set_stream(u64::MAX);
    regimes.shuffle(&mut shuffle_rng);

    let mut utterances = Vec::with_capacity(spec.n_records);
    let mut planted = Vec::with_capacity(spec.n_records);
    for (i, regime) in regimes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        utterances.push(generate_utterance(spec, *regime, &mut rng)?);
        planted.push(PlantedTruth {
            id: utterance_id(i),
            regime: *regime,
        });
    }

    let mut records = Vec::with_capacity(spec.n_records * spec.folds as usize);
    for fold in 1..=spec.folds {
        for (i, u) in utterances.iter().enumerate() {
            let split = if partition(i, spec.folds) == fold {
                Split::Test
            } else {
                Split::Train
            };
            records.push(ScoreRecord::new(
                utterance_id(i),
                fold,
                split,
                u.label,
                u.ps,
                u.pt,
            )?);
        }
    }
    Ok(SyntheticCorpus { records, planted })
}

fn utterance_id(i: usize) -> String {
    format!("u{i:06}")
}

/// Fold in which utterance `i` is held out. With a single fold nothing is
/// held out and every row is training data.
fn partition(i: usize, folds: u32) -> u32 {
    if folds == 1 {
        0
    } else {
        (i % folds as usize) as u32 + 1
    }
}

/// Sidecar file `id,regime`.
pub fn write_planted<W: Write>(writer: W, planted: &[PlantedTruth]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "regime"])?;
    for p in planted {
        wtr.write_record([p.id.as_str(), p.regime.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_planted<R: std::io::Read>(reader: R) -> Result<Vec<PlantedTruth>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(PlantedTruth {
            id: row[0].to_string(),
            regime: row[1].parse()?,
        });
    }
    Ok(out)
}

/// A record with arbitrary scores, for fuzzing. Sharpness varies widely and
/// about one draw in ten has exactly tied emotion or sentiment scores.
pub fn random_record<R: Rng + ?Sized>(
    rng: &mut R,
    id: &str,
    fold: u32,
    split: Split,
) -> ScoreRecord {
    const SHARPNESS: [f64; 5] = [0.2, 0.5, 1.0, 3.0, 30.0];
    let ps: [f64; 4] = match rng.random_range(0..10) {
        0 => [0.25; 4],
        1 => {
            let a = rng.random_range(0.2..0.45);
            let rest = (1.0 - 2.0 * a) / 2.0;
            [a, a, rest, rest]
        }
        _ => {
            let v = sample_simplex(4, SHARPNESS[rng.random_range(0..5)], rng);
            [v[0], v[1], v[2], v[3]]
        }
    };
    let pt: [f64; 3] = if rng.random_range(0..10) == 0 {
        [0.4, 0.4, 0.2]
    } else {
        let v = sample_simplex(3, SHARPNESS[rng.random_range(0..5)], rng);
        [v[0], v[1], v[2]]
    };
    let label = EmotionClass::ALL[rng.random_range(0..4)];
    ScoreRecord::new(
        id,
        fold,
        split,
        label,
        EmotionScore::new(ps).expect("simplex draw"),
        SentimentScore::new(pt).expect("simplex draw"),
    )
    .expect("valid fold")
}

/// An arbitrary valid artifact. When `near` is given, some thresholds sit
/// exactly on that record's entropy, varentropy, or sentiment confidence so
/// boundary comparisons get exercised.
pub fn random_artifact<R: Rng + ?Sized>(
    rng: &mut R,
    near: Option<&ScoreRecord>,
) -> crate::CalibrationArtifact {
    use crate::types::{CalibrationMeta, ClassThresholds, ExclusionSet, MappingStrategy};
    let ln4 = 4f64.ln();
    let mut thresholds = BTreeMap::new();
    for class in EmotionClass::ALL {
        let t = if rng.random_range(0..8) == 0 {
            ClassThresholds::never_trigger()
        } else {
            let mut tau_e = rng.random_range(0.0..ln4);
            let mut tau_v = rng.random_range(0.0..1.5);
            let mut tau_m = f64::from(rng.random_range(0..=20u32)) / 20.0;
            if let Some(r) = near {
                if rng.random_bool(0.3) {
                    tau_e = r.entropy();
                }
                if rng.random_bool(0.3) {
                    tau_v = r.varentropy();
                }
                if rng.random_bool(0.3) {
                    tau_m = r.pt().get(r.sentiment());
                }
                if rng.random_bool(0.3) {
                    tau_e = rng.random_range(0.0..=r.entropy());
                    tau_v = rng.random_range(r.varentropy()..=r.varentropy() + 1.0);
                }
            }
            ClassThresholds {
                tau_e,
                tau_v,
                tau_m,
            }
        };
        thresholds.insert(class, t);
    }
    let mut exclusion = ExclusionSet::new();
    let density = rng.random_range(0.0..1.0);
    for from in EmotionClass::ALL {
        for to in EmotionClass::ALL {
            if from != to && rng.random_bool(density) {
                exclusion.insert(from, to).expect("distinct classes");
            }
        }
    }
    crate::CalibrationArtifact {
        thresholds,
        f_m: if rng.random_bool(0.5) {
            MappingStrategy::Refer
        } else {
            MappingStrategy::Simple
        },
        f_i: rng.random_bool(0.5),
        exclusion,
        meta: CalibrationMeta {
            percentile_method: crate::calibrator::PERCENTILE_METHOD.to_string(),
            delta_percentile: 10,
            step_percentile: 1,
            tau_m_step: 0.05,
            log_base: crate::uncertainty::LOG_BASE.to_string(),
            created_from_fold: 1,
        },
    }
}

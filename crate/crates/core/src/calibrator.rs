//! Learns a [`CalibrationArtifact`] from the training rows of one fold.
//!
//! Per predicted class, the entropy/varentropy thresholds come from a grid of
//! percentile candidates centred on the 75th percentile of entropy and the
//! 25th percentile of varentropy. The winning pair maximizes the share of
//! flagged records that are misclassified. Mapping thresholds, the mapping
//! strategy, and the exclusion set are then fitted in that order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fusion::{map_sentiment, merge_with, triggers};
use crate::types::{
    CalibrationArtifact, CalibrationMeta, ClassThresholds, EmotionClass, ExclusionSet,
    MappingStrategy, ScoreRecord, SentimentClass,
};
use crate::uncertainty::LOG_BASE;

/// Candidates are percentile ranks, interpolated linearly between order statistics.
pub const PERCENTILE_METHOD: &str = "percentile-rank-linear";
pub const ENTROPY_CENTER_PERCENTILE: u32 = 75;
pub const VARENTROPY_CENTER_PERCENTILE: u32 = 25;
/// Mapping threshold reported when there is nothing to fit it on.
pub const INERT_TAU_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// Half-width of the search window, in percentile points.
    pub delta: u32,
    /// Grid spacing, in percentile points.
    pub step: u32,
    pub tau_m_step: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            delta: 10,
            step: 1,
            tau_m_step: 0.05,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || !(2 * self.delta).is_multiple_of(self.step) {
            return Err(Error::Validation(format!(
                "step {} must be positive and divide 2*delta = {}",
                self.step,
                2 * self.delta
            )));
        }
        tau_m_grid(self.tau_m_step)?;
        Ok(())
    }
}

/// `{0, step, 2 step, ..., 1}`, computed as `i / n` so that grid values are
/// the shortest decimal literals. `step` must divide 1.
pub fn tau_m_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Validation(format!(
            "tau_m step {step} outside (0, 1]"
        )));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "tau_m step {step} does not divide 1"
        )));
    }
    let n = n as u32;
    Ok((0..=n).map(|i| f64::from(i) / f64::from(n)).collect())
}

/// Linear-interpolation percentile: rank `k/100 * (n-1)` in the sorted values.
pub fn percentile(values: &[f64], k: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Calibration("no training samples for class".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, k))
}

fn percentile_sorted(sorted: &[f64], k: f64) -> f64 {
    let rank = k.clamp(0.0, 100.0) * (sorted.len() - 1) as f64 / 100.0;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEntry {
    pub tau_e: f64,
    pub tau_v: f64,
    pub k: u32,
    pub l: u32,
}

/// Every `(k, l)` pair of entropy and varentropy candidates, sorted by `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    pub class: EmotionClass,
    pub entries: Vec<GridEntry>,
    pub delta: u32,
    pub step: u32,
}

pub fn candidate_grid(
    class: EmotionClass,
    h_values: &[f64],
    v_values: &[f64],
    delta: u32,
    step: u32,
) -> Result<CandidateGrid> {
    CalibrationConfig {
        delta,
        step,
        tau_m_step: 0.05,
    }
    .validate()?;
    if h_values.is_empty() || v_values.is_empty() {
        return Err(Error::Calibration(format!(
            "no training samples for class {class}"
        )));
    }
    let mut h = h_values.to_vec();
    h.sort_by(f64::total_cmp);
    let mut v = v_values.to_vec();
    v.sort_by(f64::total_cmp);

    let count = 2 * delta / step;
    let at = |sorted: &[f64], center: u32, i: u32| {
        let p = f64::from(center) - f64::from(delta) + f64::from(i * step);
        percentile_sorted(sorted, p)
    };
    let tau_e: Vec<f64> = (0..=count)
        .map(|k| at(&h, ENTROPY_CENTER_PERCENTILE, k))
        .collect();
    let tau_v: Vec<f64> = (0..=count)
        .map(|l| at(&v, VARENTROPY_CENTER_PERCENTILE, l))
        .collect();

    let mut entries = Vec::with_capacity(tau_e.len() * tau_v.len());
    for (k, &te) in tau_e.iter().enumerate() {
        for (l, &tv) in tau_v.iter().enumerate() {
            entries.push(GridEntry {
                tau_e: te,
                tau_v: tv,
                k: k as u32,
                l: l as u32,
            });
        }
    }
    Ok(CandidateGrid {
        class,
        entries,
        delta,
        step,
    })
}

/// Flag statistics of one threshold pair: `d` misclassified of `t` flagged,
/// and `m = 100 d / t` (0 when nothing is flagged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOutcome {
    pub d: usize,
    pub t: usize,
    pub m: f64,
}

impl DetectionOutcome {
    pub fn from_counts(d: usize, t: usize) -> Self {
        debug_assert!(d <= t);
        let m = if t == 0 {
            0.0
        } else {
            100.0 * d as f64 / t as f64
        };
        Self { d, t, m }
    }

    /// Higher `m`, then higher `d`. Compared exactly via cross-multiplication.
    fn beats(&self, other: &DetectionOutcome) -> bool {
        let lhs = self.d as u128 * other.t.max(1) as u128;
        let rhs = other.d as u128 * self.t.max(1) as u128;
        lhs > rhs || (lhs == rhs && self.d > other.d)
    }
}

/// Evaluates one threshold pair over records that all share a predicted class.
pub fn detection_metric<'a>(
    records: impl IntoIterator<Item = &'a ScoreRecord>,
    tau_e: f64,
    tau_v: f64,
) -> DetectionOutcome {
    let (mut d, mut t) = (0, 0);
    for r in records {
        if r.entropy() >= tau_e && r.varentropy() <= tau_v {
            t += 1;
            if !r.is_correct() {
                d += 1;
            }
        }
    }
    DetectionOutcome::from_counts(d, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSelection {
    pub tau_e: f64,
    pub tau_v: f64,
    pub k: u32,
    pub l: u32,
    pub outcome: DetectionOutcome,
}

/// Grid search for the entropy/varentropy pair of `class`, over training
/// records predicted as `class`. Ties go to larger `d`, then to the earlier
/// grid entry.
pub fn search_thresholds(
    train: &[ScoreRecord],
    class: EmotionClass,
    delta: u32,
    step: u32,
) -> Result<ThresholdSelection> {
    struct Point {
        h: f64,
        v: f64,
        wrong: bool,
    }
    let points: Vec<Point> = train
        .iter()
        .filter(|r| r.prediction() == class)
        .map(|r| Point {
            h: r.entropy(),
            v: r.varentropy(),
            wrong: !r.is_correct(),
        })
        .collect();
    if points.is_empty() {
        return Err(Error::Calibration(format!(
            "no training records predicted as {class}"
        )));
    }
    let h: Vec<f64> = points.iter().map(|p| p.h).collect();
    let v: Vec<f64> = points.iter().map(|p| p.v).collect();
    let grid = candidate_grid(class, &h, &v, delta, step)?;

    let mut best: Option<ThresholdSelection> = None;
    for e in &grid.entries {
        let (mut d, mut t) = (0, 0);
        for p in &points {
            if p.h >= e.tau_e && p.v <= e.tau_v {
                t += 1;
                d += usize::from(p.wrong);
            }
        }
        let outcome = DetectionOutcome::from_counts(d, t);
        if best.as_ref().is_none_or(|b| outcome.beats(&b.outcome)) {
            best = Some(ThresholdSelection {
                tau_e: e.tau_e,
                tau_v: e.tau_v,
                k: e.k,
                l: e.l,
                outcome,
            });
        }
    }
    Ok(best.expect("grid is never empty"))
}

/// Fits the "simple" mapping threshold for `class`: among training records
/// predicted as `class` that trigger `thresholds` and carry Negative
/// sentiment, pick the `tau_m` with the most correct Ang/Sad assignments.
/// Ties go to the smaller value.
pub fn search_mapping_threshold(
    train: &[ScoreRecord],
    class: EmotionClass,
    thresholds: &ClassThresholds,
    flip: bool,
    tau_m_step: f64,
) -> Result<f64> {
    let candidates: Vec<&ScoreRecord> = train
        .iter()
        .filter(|r| {
            r.prediction() == class
                && r.sentiment() == SentimentClass::Negative
                && triggers(r, thresholds)
        })
        .collect();
    let grid = tau_m_grid(tau_m_step)?;
    if candidates.is_empty() {
        return Ok(INERT_TAU_M);
    }
    let mut best: Option<(f64, usize)> = None;
    for &tau_m in &grid {
        let correct = candidates
            .iter()
            .filter(|r| map_sentiment(r, tau_m, MappingStrategy::Simple, flip) == r.label())
            .count();
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((tau_m, correct));
        }
    }
    Ok(best.map_or(INERT_TAU_M, |(tau_m, _)| tau_m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyChoice {
    pub f_m: MappingStrategy,
    pub f_i: bool,
    /// Training records labelled correctly by the merge under this choice.
    pub correct: usize,
}

/// Picks among ("refer"), ("simple", no flip), ("simple", flip) by merged
/// training accuracy, with no exclusion list. Ties keep the earlier option.
///
/// `plain` holds thresholds whose `tau_m` was fitted without flip, `flipped`
/// the same thresholds with `tau_m` fitted under flip.
pub fn select_mapping_strategy(
    train: &[ScoreRecord],
    plain: &BTreeMap<EmotionClass, ClassThresholds>,
    flipped: &BTreeMap<EmotionClass, ClassThresholds>,
) -> StrategyChoice {
    let empty = ExclusionSet::new();
    let options = [
        (MappingStrategy::Refer, false, plain),
        (MappingStrategy::Simple, false, plain),
        (MappingStrategy::Simple, true, flipped),
    ];
    let mut best: Option<StrategyChoice> = None;
    for (f_m, f_i, thresholds) in options {
        let correct = train
            .iter()
            .filter(|r| merge_with(r, thresholds, f_m, f_i, &empty).final_label == r.label())
            .count();
        if best.is_none_or(|b| correct > b.correct) {
            best = Some(StrategyChoice { f_m, f_i, correct });
        }
    }
    best.expect("three options")
}

/// Harmful-transition counts for one `(from, to)` change on the training split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionEffect {
    /// Primary was right, the change made it wrong.
    pub harmed: usize,
    /// Primary was wrong, the change made it right.
    pub fixed: usize,
}

pub fn transition_effects(
    train: &[ScoreRecord],
    calib: &CalibrationArtifact,
) -> BTreeMap<(EmotionClass, EmotionClass), TransitionEffect> {
    let empty = ExclusionSet::new();
    let mut effects: BTreeMap<_, TransitionEffect> = BTreeMap::new();
    for r in train {
        let outcome = merge_with(r, &calib.thresholds, calib.f_m, calib.f_i, &empty);
        if let Some((from, to)) = outcome.transition {
            let e = effects.entry((from, to)).or_default();
            if r.label() == from {
                e.harmed += 1;
            } else if r.label() == to {
                e.fixed += 1;
            }
        }
    }
    effects
}

/// Transitions that, on the training split, break more correct predictions
/// than they repair. Only observed transitions can be excluded.
pub fn build_exclusion_list(train: &[ScoreRecord], calib: &CalibrationArtifact) -> ExclusionSet {
    transition_effects(train, calib)
        .into_iter()
        .filter(|(_, e)| e.harmed > e.fixed)
        .map(|(pair, _)| pair)
        .collect()
}

/// Runs the full calibration on one fold's training rows.
pub fn calibrate_fold(
    train: &[ScoreRecord],
    config: &CalibrationConfig,
    fold: u32,
) -> Result<CalibrationArtifact> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Calibration(format!(
            "fold {fold} has no training records"
        )));
    }

    let mut plain = BTreeMap::new();
    let mut flipped = BTreeMap::new();
    for class in EmotionClass::ALL {
        let (with_plain, with_flip) =
            match search_thresholds(train, class, config.delta, config.step) {
                Ok(sel) => {
                    let base = ClassThresholds {
                        tau_e: sel.tau_e,
                        tau_v: sel.tau_v,
                        tau_m: INERT_TAU_M,
                    };
                    let fit = |flip| {
                        search_mapping_threshold(train, class, &base, flip, config.tau_m_step)
                    };
                    (
                        ClassThresholds {
                            tau_m: fit(false)?,
                            ..base
                        },
                        ClassThresholds {
                            tau_m: fit(true)?,
                            ..base
                        },
                    )
                }
                Err(Error::Calibration(_)) => (
                    ClassThresholds::never_trigger(),
                    ClassThresholds::never_trigger(),
                ),
                Err(other) => return Err(other),
            };
        plain.insert(class, with_plain);
        flipped.insert(class, with_flip);
    }

    let choice = select_mapping_strategy(train, &plain, &flipped);
    let mut artifact = CalibrationArtifact {
        thresholds: if choice.f_i { flipped } else { plain },
        f_m: choice.f_m,
        f_i: choice.f_i,
        exclusion: ExclusionSet::new(),
        meta: CalibrationMeta {
            percentile_method: PERCENTILE_METHOD.to_string(),
            delta_percentile: config.delta,
            step_percentile: config.step,
            tau_m_step: config.tau_m_step,
            log_base: LOG_BASE.to_string(),
            created_from_fold: fold,
        },
    };
    artifact.exclusion = build_exclusion_list(train, &artifact);
    Ok(artifact)
}

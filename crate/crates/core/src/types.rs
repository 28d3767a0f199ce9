//! Domain model: class alphabets, probability vectors, score records, and the
//! calibration artifact that the merge engine consumes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::uncertainty;

/// Sums further than this from 1 are rejected outright.
pub const SUM_REJECT_TOLERANCE: f64 = 1e-3;
/// Sums further than this from 1 (but within [`SUM_REJECT_TOLERANCE`]) are renormalized.
pub const SUM_RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// The four emotion classes, in canonical order. The derived `Ord` is the
/// canonical order and is used for every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionClass {
    Ang,
    Sad,
    Hap,
    Neu,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 4] = [
        EmotionClass::Ang,
        EmotionClass::Sad,
        EmotionClass::Hap,
        EmotionClass::Neu,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionClass::Ang => "Ang",
            EmotionClass::Sad => "Sad",
            EmotionClass::Hap => "Hap",
            EmotionClass::Neu => "Neu",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown emotion class `{s}`")))
    }
}

/// The three sentiment classes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SentimentClass {
    Negative,
    Neutral,
    Positive,
}

impl SentimentClass {
    pub const ALL: [SentimentClass; 3] = [
        SentimentClass::Negative,
        SentimentClass::Neutral,
        SentimentClass::Positive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentClass::Negative => "Negative",
            SentimentClass::Neutral => "Neutral",
            SentimentClass::Positive => "Positive",
        }
    }
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which partition of a fold a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split `{other}`"))),
        }
    }
}

/// Checks a raw probability vector and renormalizes it when its sum is off by
/// more than [`SUM_RENORMALIZE_TOLERANCE`] but no more than [`SUM_REJECT_TOLERANCE`].
fn checked_probabilities<const N: usize>(raw: [f64; N]) -> Result<[f64; N]> {
    if let Some(bad) = raw
        .iter()
        .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
    {
        return Err(Error::Validation(format!(
            "probability {bad} outside [0, 1]"
        )));
    }
    let sum: f64 = raw.iter().sum();
    let off = (sum - 1.0).abs();
    if off > SUM_REJECT_TOLERANCE {
        return Err(Error::Validation(format!(
            "probabilities sum to {sum}, beyond tolerance {SUM_REJECT_TOLERANCE}"
        )));
    }
    if off > SUM_RENORMALIZE_TOLERANCE {
        Ok(raw.map(|p| p / sum))
    } else {
        Ok(raw)
    }
}

/// Index of the largest entry; the earliest index wins ties.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Four-class emotion probabilities in canonical class order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionScore([f64; 4]);

impl EmotionScore {
    pub fn new(probs: [f64; 4]) -> Result<Self> {
        checked_probabilities(probs).map(Self)
    }

    pub fn probs(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn get(&self, class: EmotionClass) -> f64 {
        self.0[class.index()]
    }

    pub fn argmax(&self) -> EmotionClass {
        EmotionClass::ALL[first_argmax(&self.0)]
    }
}

/// Three-class sentiment probabilities in canonical class order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentScore([f64; 3]);

impl SentimentScore {
    pub fn new(probs: [f64; 3]) -> Result<Self> {
        checked_probabilities(probs).map(Self)
    }

    pub fn probs(&self) -> &[f64; 3] {
        &self.0
    }

    pub fn get(&self, class: SentimentClass) -> f64 {
        self.0[class.index()]
    }

    pub fn argmax(&self) -> SentimentClass {
        SentimentClass::ALL[first_argmax(&self.0)]
    }
}

/// One utterance: gold label, both score vectors, fold tags, and the derived
/// argmax predictions plus entropy and varentropy of the emotion scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    id: String,
    fold: u32,
    split: Split,
    label: EmotionClass,
    ps: EmotionScore,
    pt: SentimentScore,
    prediction: EmotionClass,
    sentiment: SentimentClass,
    entropy: f64,
    varentropy: f64,
}

impl ScoreRecord {
    pub fn new(
        id: impl Into<String>,
        fold: u32,
        split: Split,
        label: EmotionClass,
        ps: EmotionScore,
        pt: SentimentScore,
    ) -> Result<Self> {
        if fold < 1 {
            return Err(Error::Validation("fold must be >= 1".into()));
        }
        Ok(Self {
            id: id.into(),
            fold,
            split,
            label,
            prediction: ps.argmax(),
            sentiment: pt.argmax(),
            entropy: uncertainty::entropy(&ps),
            varentropy: uncertainty::varentropy(&ps),
            ps,
            pt,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn fold(&self) -> u32 {
        self.fold
    }
    pub fn split(&self) -> Split {
        self.split
    }
    pub fn label(&self) -> EmotionClass {
        self.label
    }
    pub fn ps(&self) -> &EmotionScore {
        &self.ps
    }
    pub fn pt(&self) -> &SentimentScore {
        &self.pt
    }
    pub fn prediction(&self) -> EmotionClass {
        self.prediction
    }
    pub fn sentiment(&self) -> SentimentClass {
        self.sentiment
    }
    /// Entropy of the emotion scores, in nats.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }
    /// Varentropy of the emotion scores, in nats².
    pub fn varentropy(&self) -> f64 {
        self.varentropy
    }
    pub fn is_correct(&self) -> bool {
        self.prediction == self.label
    }
}

/// Per-class thresholds. The pair (`+inf`, `-inf`) for entropy and varentropy
/// is the never-trigger sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    #[serde(with = "extended_float")]
    pub tau_e: f64,
    #[serde(with = "extended_float")]
    pub tau_v: f64,
    pub tau_m: f64,
}

impl ClassThresholds {
    pub fn never_trigger() -> Self {
        Self {
            tau_e: f64::INFINITY,
            tau_v: f64::NEG_INFINITY,
            tau_m: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tau_e_ok = self.tau_e >= 0.0 && !self.tau_e.is_nan();
        let tau_v_ok =
            (self.tau_v >= 0.0 && self.tau_v.is_finite()) || self.tau_v == f64::NEG_INFINITY;
        let tau_m_ok = (0.0..=1.0).contains(&self.tau_m);
        if tau_e_ok && tau_v_ok && tau_m_ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid thresholds {self:?}")))
        }
    }
}

/// JSON has no infinities; they are written as the strings `"+inf"` / `"-inf"`.
mod extended_float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *value == f64::INFINITY {
            s.serialize_str("+inf")
        } else if *value == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*value)
        }
    }

    struct ExtendedFloat;

    impl Visitor<'_> for ExtendedFloat {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number or one of \"+inf\", \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtendedFloat)
    }
}

/// Ordered emotion transitions that the merge must not perform.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet(BTreeSet<(EmotionClass, EmotionClass)>);

impl ExclusionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every one of the 12 ordered non-self transitions.
    pub fn full() -> Self {
        let mut set = Self::new();
        for from in EmotionClass::ALL {
            for to in EmotionClass::ALL {
                if from != to {
                    set.0.insert((from, to));
                }
            }
        }
        set
    }

    pub fn insert(&mut self, from: EmotionClass, to: EmotionClass) -> Result<bool> {
        if from == to {
            return Err(Error::Validation(format!(
                "self-transition {from}{to} cannot be excluded"
            )));
        }
        Ok(self.0.insert((from, to)))
    }

    pub fn contains(&self, from: EmotionClass, to: EmotionClass) -> bool {
        self.0.contains(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionClass, EmotionClass)> + '_ {
        self.0.iter().copied()
    }

    /// Parses a concatenated pair such as `"AngSad"`.
    pub fn parse_entry(entry: &str) -> Result<(EmotionClass, EmotionClass)> {
        let bad = || Error::Validation(format!("malformed exclusion entry `{entry}`"));
        if entry.len() != 6 || !entry.is_ascii() {
            return Err(bad());
        }
        let from: EmotionClass = entry[..3].parse().map_err(|_| bad())?;
        let to: EmotionClass = entry[3..].parse().map_err(|_| bad())?;
        if from == to {
            return Err(bad());
        }
        Ok((from, to))
    }
}

impl FromIterator<(EmotionClass, EmotionClass)> for ExclusionSet {
    /// Self-transitions are dropped.
    fn from_iter<I: IntoIterator<Item = (EmotionClass, EmotionClass)>>(iter: I) -> Self {
        Self(iter.into_iter().filter(|(a, b)| a != b).collect())
    }
}

impl Serialize for ExclusionSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|(a, b)| format!("{a}{b}")))
    }
}

impl<'de> Deserialize<'de> for ExclusionSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<String>::deserialize(d)?;
        let mut set = BTreeSet::new();
        for e in entries {
            let pair = ExclusionSet::parse_entry(&e).map_err(serde::de::Error::custom)?;
            set.insert(pair);
        }
        Ok(Self(set))
    }
}

/// How a triggered record with Negative sentiment is resolved to Ang or Sad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingStrategy {
    /// Pick whichever of Ang/Sad the emotion scores favor.
    Refer,
    /// Threshold the sentiment confidence against the class mapping threshold.
    Simple,
}

impl fmt::Display for MappingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingStrategy::Refer => "refer",
            MappingStrategy::Simple => "simple",
        })
    }
}

/// Settings a calibration was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub percentile_method: String,
    pub delta_percentile: u32,
    pub step_percentile: u32,
    pub tau_m_step: f64,
    pub log_base: String,
    pub created_from_fold: u32,
}

/// Everything the merge needs: per-class thresholds, mapping flags, and the
/// exclusion set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub thresholds: BTreeMap<EmotionClass, ClassThresholds>,
    pub f_m: MappingStrategy,
    pub f_i: bool,
    pub exclusion: ExclusionSet,
    pub meta: CalibrationMeta,
}

impl CalibrationArtifact {
    pub fn validate(&self) -> Result<()> {
        for class in EmotionClass::ALL {
            match self.thresholds.get(&class) {
                Some(t) => t.validate()?,
                None => {
                    return Err(Error::Validation(format!(
                        "thresholds missing for class {class}"
                    )))
                }
            }
        }
        let m = &self.meta;
        if m.percentile_method.is_empty() || m.log_base.is_empty() {
            return Err(Error::Validation("meta is not fully populated".into()));
        }
        if !(m.tau_m_step > 0.0 && m.tau_m_step <= 1.0) {
            return Err(Error::Validation(format!(
                "meta.tau_m_step {} outside (0, 1]",
                m.tau_m_step
            )));
        }
        Ok(())
    }

    /// Thresholds for `class`. Panics if the artifact has not been validated.
    pub fn class_thresholds(&self, class: EmotionClass) -> &ClassThresholds {
        &self.thresholds[&class]
    }

    /// Canonical JSON: fixed key order, pretty-printed, trailing newline.
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: Self = serde_json::from_str(text)?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn write_to<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

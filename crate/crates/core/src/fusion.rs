//! The merge engine. A record whose emotion scores have high entropy and low
//! varentropy (against the thresholds of its predicted class) takes its label
//! from the sentiment branch instead, unless that change is excluded.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{
    CalibrationArtifact, ClassThresholds, EmotionClass, ExclusionSet, MappingStrategy, ScoreRecord,
    SentimentClass, Split,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeOutcome {
    pub final_label: EmotionClass,
    /// The entropy/varentropy rule fired.
    pub triggered: bool,
    /// A change was proposed but blocked by the exclusion set.
    pub reverted: bool,
    /// The proposed `(primary, mapped)` change, when the mapped label differs
    /// from the primary prediction. Present whether or not it was reverted.
    pub transition: Option<(EmotionClass, EmotionClass)>,
}

/// Whether `record` falls in the unreliable region of `thresholds`.
/// Equality on either bound triggers.
pub fn triggers(record: &ScoreRecord, thresholds: &ClassThresholds) -> bool {
    record.entropy() >= thresholds.tau_e && record.varentropy() <= thresholds.tau_v
}

/// Emotion implied by the record's sentiment. Only Negative sentiment consults
/// the strategy flags and the mapping threshold.
pub fn map_sentiment(
    record: &ScoreRecord,
    tau_m: f64,
    strategy: MappingStrategy,
    flip: bool,
) -> EmotionClass {
    match record.sentiment() {
        SentimentClass::Neutral => EmotionClass::Neu,
        SentimentClass::Positive => EmotionClass::Hap,
        SentimentClass::Negative => match strategy {
            MappingStrategy::Refer => {
                if record.ps().get(EmotionClass::Ang) >= record.ps().get(EmotionClass::Sad) {
                    EmotionClass::Ang
                } else {
                    EmotionClass::Sad
                }
            }
            MappingStrategy::Simple => {
                let confidence = record.pt().get(record.sentiment());
                if (confidence <= tau_m) ^ flip {
                    EmotionClass::Ang
                } else {
                    EmotionClass::Sad
                }
            }
        },
    }
}

/// Merge under explicit parts rather than a whole artifact; the calibrator
/// uses this while the artifact is still being assembled.
pub fn merge_with(
    record: &ScoreRecord,
    thresholds: &BTreeMap<EmotionClass, ClassThresholds>,
    strategy: MappingStrategy,
    flip: bool,
    exclusion: &ExclusionSet,
) -> MergeOutcome {
    let primary = record.prediction();
    let t = &thresholds[&primary];
    if !triggers(record, t) {
        return MergeOutcome {
            final_label: primary,
            triggered: false,
            reverted: false,
            transition: None,
        };
    }
    let mapped = map_sentiment(record, t.tau_m, strategy, flip);
    if mapped == primary {
        return MergeOutcome {
            final_label: primary,
            triggered: true,
            reverted: false,
            transition: None,
        };
    }
    let reverted = exclusion.contains(primary, mapped);
    MergeOutcome {
        final_label: if reverted { primary } else { mapped },
        triggered: true,
        reverted,
        transition: Some((primary, mapped)),
    }
}

pub fn merge_record(record: &ScoreRecord, calib: &CalibrationArtifact) -> MergeOutcome {
    merge_with(
        record,
        &calib.thresholds,
        calib.f_m,
        calib.f_i,
        &calib.exclusion,
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TransitionCount {
    pub applied: usize,
    pub reverted: usize,
}

/// Order-insensitive summary of a corpus merge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeLog {
    pub records: usize,
    pub triggered: usize,
    pub changed: usize,
    pub reverted: usize,
    pub transitions: BTreeMap<(EmotionClass, EmotionClass), TransitionCount>,
}

impl ChangeLog {
    pub fn record(&mut self, outcome: &MergeOutcome) {
        self.records += 1;
        if outcome.triggered {
            self.triggered += 1;
        }
        if let Some(pair) = outcome.transition {
            let entry = self.transitions.entry(pair).or_default();
            if outcome.reverted {
                self.reverted += 1;
                entry.reverted += 1;
            } else {
                self.changed += 1;
                entry.applied += 1;
            }
        }
    }

    /// Combines two logs; used when a corpus is merged in parts.
    pub fn absorb(&mut self, other: &ChangeLog) {
        self.records += other.records;
        self.triggered += other.triggered;
        self.changed += other.changed;
        self.reverted += other.reverted;
        for (pair, count) in &other.transitions {
            let entry = self.transitions.entry(*pair).or_default();
            entry.applied += count.applied;
            entry.reverted += count.reverted;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Wire<'a> {
            records: usize,
            triggered: usize,
            changed: usize,
            reverted: usize,
            transitions: BTreeMap<String, &'a TransitionCount>,
        }
        let wire = Wire {
            records: self.records,
            triggered: self.triggered,
            changed: self.changed,
            reverted: self.reverted,
            transitions: self
                .transitions
                .iter()
                .map(|((a, b), c)| (format!("{a}{b}"), c))
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&wire)?;
        out.push('\n');
        Ok(out)
    }
}

pub fn merge_corpus(
    records: &[ScoreRecord],
    calib: &CalibrationArtifact,
) -> (Vec<MergeOutcome>, ChangeLog) {
    let mut log = ChangeLog::default();
    let outcomes = records
        .iter()
        .map(|r| {
            let o = merge_record(r, calib);
            log.record(&o);
            o
        })
        .collect();
    (outcomes, log)
}

pub const MERGED_HEADER: [&str; 8] = [
    "id",
    "fold",
    "split",
    "label",
    "primary",
    "final",
    "triggered",
    "reverted",
];

/// One row of a merged-predictions file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedRow {
    pub id: String,
    pub fold: u32,
    pub split: Split,
    pub label: EmotionClass,
    pub primary: EmotionClass,
    pub final_label: EmotionClass,
    pub triggered: bool,
    pub reverted: bool,
}

impl MergedRow {
    pub fn new(record: &ScoreRecord, outcome: &MergeOutcome) -> Self {
        Self {
            id: record.id().to_string(),
            fold: record.fold(),
            split: record.split(),
            label: record.label(),
            primary: record.prediction(),
            final_label: outcome.final_label,
            triggered: outcome.triggered,
            reverted: outcome.reverted,
        }
    }
}

pub fn write_merged<W: Write>(writer: W, rows: &[MergedRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(MERGED_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.id.as_str(),
            &r.fold.to_string(),
            r.split.as_str(),
            r.label.as_str(),
            r.primary.as_str(),
            r.final_label.as_str(),
            if r.triggered { "true" } else { "false" },
            if r.reverted { "true" } else { "false" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_merged<R: Read>(reader: R) -> Result<Vec<MergedRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    for (i, expected) in MERGED_HEADER.iter().enumerate() {
        if header.get(i) != Some(*expected) {
            return Err(Error::Schema {
                column: (*expected).to_string(),
            });
        }
    }
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let reject = |reason: String| Error::RejectedRow { line, reason };
        let flag = |s: &str| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(reject(format!("`{other}` is not a boolean"))),
        };
        rows.push(MergedRow {
            id: row[0].to_string(),
            fold: row[1]
                .parse()
                .map_err(|_| reject(format!("bad fold `{}`", &row[1])))?,
            split: row[2].parse().map_err(|e: Error| reject(e.to_string()))?,
            label: row[3].parse().map_err(|e: Error| reject(e.to_string()))?,
            primary: row[4].parse().map_err(|e: Error| reject(e.to_string()))?,
            final_label: row[5].parse().map_err(|e: Error| reject(e.to_string()))?,
            triggered: flag(&row[6])?,
            reverted: flag(&row[7])?,
        });
    }
    Ok(rows)
}

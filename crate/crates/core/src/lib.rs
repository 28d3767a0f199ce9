//! Entropy-aware late fusion of a four-class speech-emotion classifier with a
//! three-class text-sentiment classifier.
//!
//! A primary emotion prediction is kept unless its score vector has high
//! entropy and low varentropy for its predicted class, in which case the label
//! is taken from the sentiment branch. The per-class thresholds, the Ang/Sad
//! disambiguation strategy, and a list of disallowed label changes are all
//! learned from the training rows of each cross-validation fold.
//!
//! - [`scorefile`] reads and writes score files.
//! - [`calibrator`] fits a [`CalibrationArtifact`] for one fold.
//! - [`fusion`] applies an artifact to records.
//! - [`metrics`] computes UA / WA / macro F1 and fold averages.
//! - [`synth`] builds synthetic corpora and independent reference oracles.

pub mod calibrator;
pub mod diagnostics;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod scorefile;
pub mod synth;
pub mod types;
pub mod uncertainty;

pub use error::{Error, Result};
pub use types::{
    CalibrationArtifact, CalibrationMeta, ClassThresholds, EmotionClass, EmotionScore,
    ExclusionSet, MappingStrategy, ScoreRecord, SentimentClass, SentimentScore, Split,
};

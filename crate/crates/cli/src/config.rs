//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fuselect_core::calibrator::CalibrationConfig;
use fuselect_core::diagnostics::DEFAULT_BINS;
use fuselect_core::synth::CorpusSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Which folds to process.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FoldSelection {
    #[default]
    All,
    List(Vec<u32>),
}

impl FoldSelection {
    /// Resolves against the folds present in a score file, in ascending order.
    pub fn resolve(&self, present: &BTreeSet<u32>) -> CliResult<Vec<u32>> {
        match self {
            FoldSelection::All => {
                if present.is_empty() {
                    return Err(CliError::Input("score file has no rows".into()));
                }
                Ok(present.iter().copied().collect())
            }
            FoldSelection::List(folds) => {
                let wanted: BTreeSet<u32> = folds.iter().copied().collect();
                if let Some(missing) = wanted.iter().find(|f| !present.contains(f)) {
                    return Err(CliError::Input(format!(
                        "fold {missing} has no rows in the score file"
                    )));
                }
                Ok(wanted.into_iter().collect())
            }
        }
    }
}

impl FromStr for FoldSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "all" {
            return Ok(FoldSelection::All);
        }
        let folds = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|f| *f >= 1)
                    .ok_or_else(|| {
                        format!("`{p}` is not a fold number (expected `all` or e.g. `1,2`)")
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FoldSelection::List(folds))
    }
}

impl<'de> Deserialize<'de> for FoldSelection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Keyword(String),
            List(Vec<u32>),
        }
        match Raw::deserialize(d)? {
            Raw::Keyword(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) if v.contains(&0) => {
                Err(serde::de::Error::custom("folds are numbered from 1"))
            }
            Raw::List(v) => Ok(FoldSelection::List(v)),
        }
    }
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub delta: Option<u32>,
    pub step: Option<u32>,
    pub tau_m_step: Option<f64>,
    pub folds: Option<FoldSelection>,
    pub bins: Option<usize>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Corpus description used by `synth`.
    pub synth: Option<CorpusSpec>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::reading(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::reading(path, e))
    }
}

/// Fully resolved settings for calibrate / pipeline / diagnose.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub calibration: CalibrationConfig,
    pub folds: FoldSelection,
    pub bins: usize,
    pub scores: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            calibration: CalibrationConfig::default(),
            folds: FoldSelection::All,
            bins: DEFAULT_BINS,
            scores: None,
            out: PathBuf::from("."),
        }
    }
}

/// Flag values that override the config file when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub delta: Option<u32>,
    pub step: Option<u32>,
    pub tau_m_step: Option<f64>,
    pub folds: Option<FoldSelection>,
    pub bins: Option<usize>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn resolve(file: &ConfigFile, flags: Overrides) -> CliResult<Self> {
        let d = Self::default();
        let cfg = Self {
            calibration: CalibrationConfig {
                delta: flags.delta.or(file.delta).unwrap_or(d.calibration.delta),
                step: flags.step.or(file.step).unwrap_or(d.calibration.step),
                tau_m_step: flags
                    .tau_m_step
                    .or(file.tau_m_step)
                    .unwrap_or(d.calibration.tau_m_step),
            },
            folds: flags
                .folds
                .or_else(|| file.folds.clone())
                .unwrap_or(d.folds),
            bins: flags.bins.or(file.bins).unwrap_or(d.bins),
            scores: flags.scores.or_else(|| file.scores.clone()),
            out: flags.out.or_else(|| file.out.clone()).unwrap_or(d.out),
        };
        cfg.calibration.validate()?;
        if cfg.bins == 0 {
            return Err(CliError::Input("bins must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn scores_path(&self) -> CliResult<&Path> {
        self.scores.as_deref().ok_or_else(|| {
            CliError::Input("no score file given (use --scores or `scores` in the config)".into())
        })
    }
}

//! The subcommands, as plain functions over paths and in-memory data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use fuselect_core::calibrator::{calibrate_fold, CalibrationConfig};
use fuselect_core::diagnostics::{histograms, write_histograms};
use fuselect_core::fusion::{merge_corpus, parse_merged, write_merged, ChangeLog, MergedRow};
use fuselect_core::metrics::{
    average_folds, confusion, render_table, write_changes, write_report, FoldReport, MetricSet,
};
use fuselect_core::scorefile::{parse_score_file, write_score_file};
use fuselect_core::synth::{generate_corpus, write_planted, CorpusSpec};
use fuselect_core::{CalibrationArtifact, ScoreRecord, Split};
use rayon::prelude::*;

use crate::config::{FoldSelection, PipelineConfig};
use crate::error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FUSELECT_THREADS";

pub fn calib_file(fold: u32) -> String {
    format!("calib_fold{fold}.json")
}

pub fn merged_file(fold: u32) -> String {
    format!("merged_fold{fold}.csv")
}

pub fn changelog_file(fold: u32) -> String {
    format!("changelog_fold{fold}.json")
}

pub fn diagnostics_file(fold: u32) -> String {
    format!("diagnostics_fold{fold}.csv")
}

pub const REPORT_FILE: &str = "report.csv";
pub const CHANGES_FILE: &str = "changes.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const PLANTED_FILE: &str = "planted.csv";

/// Runs `f` on a thread pool sized by `FUSELECT_THREADS` (all cores when unset).
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
            CliError::Input(format!(
                "{THREADS_ENV} must be a positive integer, got `{raw}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn load_scores(path: &Path) -> CliResult<Vec<ScoreRecord>> {
    let file = fs::File::open(path).map_err(|e| CliError::reading(path, e))?;
    parse_score_file(std::io::BufReader::new(file)).map_err(|e| CliError::reading(path, e))
}

pub fn load_artifact(path: &Path) -> CliResult<CalibrationArtifact> {
    let file = fs::File::open(path).map_err(|e| CliError::reading(path, e))?;
    CalibrationArtifact::read_from(file).map_err(|e| CliError::reading(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::writing(path, e))
}

fn render<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut Vec<u8>) -> fuselect_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::writing(path, e))?;
    write_file(path, &buf)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::writing(dir, e))
}

pub fn folds_present(records: &[ScoreRecord]) -> BTreeSet<u32> {
    records.iter().map(|r| r.fold()).collect()
}

fn rows_of(records: &[ScoreRecord], fold: u32, split: Split) -> Vec<ScoreRecord> {
    records
        .iter()
        .filter(|r| r.fold() == fold && r.split() == split)
        .cloned()
        .collect()
}

/// Fits one artifact per fold. Every fold must have training rows; this is
/// checked for all folds before any work starts.
pub fn calibrate(
    records: &[ScoreRecord],
    folds: &[u32],
    config: &CalibrationConfig,
) -> CliResult<Vec<(u32, CalibrationArtifact)>> {
    config.validate()?;
    let trains: Vec<(u32, Vec<ScoreRecord>)> = folds
        .iter()
        .map(|&k| (k, rows_of(records, k, Split::Train)))
        .collect();
    if let Some((k, _)) = trains.iter().find(|(_, t)| t.is_empty()) {
        return Err(CliError::Input(format!("fold {k} has no train rows")));
    }
    with_pool(|| {
        trains
            .par_iter()
            .map(|(k, train)| calibrate_fold(train, config, *k).map(|a| (*k, a)))
            .collect::<fuselect_core::Result<Vec<_>>>()
    })?
    .map_err(CliError::from)
}

pub fn cmd_calibrate(cfg: &PipelineConfig) -> CliResult<Vec<PathBuf>> {
    let records = load_scores(cfg.scores_path()?)?;
    let folds = cfg.folds.resolve(&folds_present(&records))?;
    let artifacts = calibrate(&records, &folds, &cfg.calibration)?;
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    for (k, artifact) in &artifacts {
        let path = cfg.out.join(calib_file(*k));
        render(&path, |buf| artifact.write_to(buf))?;
        written.push(path);
    }
    Ok(written)
}

/// Merges the test rows of `fold` under `artifact`.
pub fn apply(
    records: &[ScoreRecord],
    artifact: &CalibrationArtifact,
    fold: u32,
) -> CliResult<(Vec<MergedRow>, ChangeLog)> {
    let made_for = artifact.meta.created_from_fold;
    if made_for != fold {
        return Err(CliError::Input(format!(
            "artifact was calibrated on fold {made_for} but fold {fold} was requested"
        )));
    }
    let test = rows_of(records, fold, Split::Test);
    if test.is_empty() {
        return Err(CliError::Input(format!("fold {fold} has no test rows")));
    }
    let (outcomes, log) = merge_corpus(&test, artifact);
    let rows = test
        .iter()
        .zip(&outcomes)
        .map(|(r, o)| MergedRow::new(r, o))
        .collect();
    Ok((rows, log))
}

fn write_applied(
    out: &Path,
    fold: u32,
    rows: &[MergedRow],
    log: &ChangeLog,
) -> CliResult<[PathBuf; 2]> {
    let merged = out.join(merged_file(fold));
    render(&merged, |buf| write_merged(buf, rows))?;
    let changes = out.join(changelog_file(fold));
    let json = log.to_json().map_err(|e| CliError::writing(&changes, e))?;
    write_file(&changes, json.as_bytes())?;
    Ok([merged, changes])
}

/// `fold` defaults to the fold the artifact was calibrated on.
pub fn cmd_apply(
    scores: &Path,
    artifact: &Path,
    fold: Option<u32>,
    out: &Path,
) -> CliResult<[PathBuf; 2]> {
    let records = load_scores(scores)?;
    let artifact = load_artifact(artifact)?;
    let fold = fold.unwrap_or(artifact.meta.created_from_fold);
    let (rows, log) = apply(&records, &artifact, fold)?;
    ensure_dir(out)?;
    write_applied(out, fold, &rows, &log)
}

/// Before/after metrics per fold, folds in ascending order, plus their average.
pub fn evaluate(rows: &[MergedRow]) -> CliResult<(Vec<FoldReport>, FoldReport)> {
    let mut by_fold: BTreeMap<u32, Vec<&MergedRow>> = BTreeMap::new();
    for r in rows {
        by_fold.entry(r.fold).or_default().push(r);
    }
    let mut reports = Vec::new();
    for (fold, rows) in by_fold {
        let gold: Vec<_> = rows.iter().map(|r| r.label).collect();
        let before: Vec<_> = rows.iter().map(|r| r.primary).collect();
        let after: Vec<_> = rows.iter().map(|r| r.final_label).collect();
        reports.push(FoldReport {
            fold: Some(fold),
            before: MetricSet::from_confusion(&confusion(&gold, &before)?)?,
            after: MetricSet::from_confusion(&confusion(&gold, &after)?)?,
        });
    }
    let avg = average_folds(&reports)?;
    Ok((reports, avg))
}

fn write_evaluation(out: &Path, reports: &[FoldReport], avg: &FoldReport) -> CliResult<String> {
    render(&out.join(REPORT_FILE), |buf| {
        write_report(buf, reports, avg)
    })?;
    render(&out.join(CHANGES_FILE), |buf| {
        write_changes(buf, reports, avg)
    })?;
    Ok(render_table(reports, avg))
}

/// Reads merged files, writes `report.csv` and `changes.csv`, and returns the
/// text table.
pub fn cmd_evaluate(merged: &[PathBuf], out: &Path) -> CliResult<String> {
    if merged.is_empty() {
        return Err(CliError::Input("no merged files given".into()));
    }
    let mut rows = Vec::new();
    for path in merged {
        let file = fs::File::open(path).map_err(|e| CliError::reading(path, e))?;
        rows.extend(
            parse_merged(std::io::BufReader::new(file)).map_err(|e| CliError::reading(path, e))?,
        );
    }
    let (reports, avg) = evaluate(&rows)?;
    ensure_dir(out)?;
    write_evaluation(out, &reports, &avg)
}

/// Histogram export per fold. `split = None` takes every row of the fold.
pub fn cmd_diagnose(cfg: &PipelineConfig, split: Option<Split>) -> CliResult<Vec<PathBuf>> {
    let records = load_scores(cfg.scores_path()?)?;
    let folds = cfg.folds.resolve(&folds_present(&records))?;
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    for k in folds {
        let rows: Vec<ScoreRecord> = records
            .iter()
            .filter(|r| r.fold() == k && split.is_none_or(|s| r.split() == s))
            .cloned()
            .collect();
        let path = cfg.out.join(diagnostics_file(k));
        render(&path, |buf| {
            write_histograms(buf, &histograms(&rows, cfg.bins))
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `scores.csv` and `planted.csv` for a synthetic corpus.
pub fn cmd_synth(spec: &CorpusSpec, out: &Path) -> CliResult<[PathBuf; 2]> {
    let corpus = generate_corpus(spec)?;
    ensure_dir(out)?;
    let scores = out.join(SCORES_FILE);
    render(&scores, |buf| write_score_file(buf, &corpus.records))?;
    let planted = out.join(PLANTED_FILE);
    render(&planted, |buf| write_planted(buf, &corpus.planted))?;
    Ok([scores, planted])
}

/// Calibrate, apply, and evaluate every selected fold. Folds run in parallel;
/// files are written afterwards in fold order. Returns the text table.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> CliResult<String> {
    let records = load_scores(cfg.scores_path()?)?;
    let folds = cfg.folds.resolve(&folds_present(&records))?;
    let artifacts = calibrate(&records, &folds, &cfg.calibration)?;
    let applied = with_pool(|| {
        artifacts
            .par_iter()
            .map(|(k, a)| apply(&records, a, *k))
            .collect::<CliResult<Vec<_>>>()
    })??;

    ensure_dir(&cfg.out)?;
    let mut all_rows = Vec::new();
    for ((k, artifact), (rows, log)) in artifacts.iter().zip(applied) {
        render(&cfg.out.join(calib_file(*k)), |buf| artifact.write_to(buf))?;
        write_applied(&cfg.out, *k, &rows, &log)?;
        all_rows.extend(rows);
    }
    let (reports, avg) = evaluate(&all_rows)?;
    write_evaluation(&cfg.out, &reports, &avg)
}

/// Convenience for tests and scripts: the pipeline over selected folds with
/// otherwise default settings.
pub fn default_pipeline(scores: &Path, out: &Path, folds: FoldSelection) -> PipelineConfig {
    PipelineConfig {
        folds,
        scores: Some(scores.to_path_buf()),
        out: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

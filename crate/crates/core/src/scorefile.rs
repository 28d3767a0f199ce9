//! Canonical score-file CSV: one row per (utterance, fold).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::{EmotionScore, ScoreRecord, SentimentScore};

pub const SCORE_HEADER: [&str; 11] = [
    "id", "fold", "split", "label", "ps_ang", "ps_sad", "ps_hap", "ps_neu", "pt_neg", "pt_neu",
    "pt_pos",
];

fn check_header(header: &csv::StringRecord) -> Result<()> {
    for (i, expected) in SCORE_HEADER.iter().enumerate() {
        if header.get(i) != Some(*expected) {
            return Err(Error::Schema {
                column: (*expected).to_string(),
            });
        }
    }
    if header.len() != SCORE_HEADER.len() {
        return Err(Error::Schema {
            column: format!("unexpected extra column `{}`", &header[SCORE_HEADER.len()]),
        });
    }
    Ok(())
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<ScoreRecord> {
    let reject = |reason: String| Error::RejectedRow { line, reason };
    let prob = |i: usize| -> Result<f64> {
        row[i].trim().parse::<f64>().map_err(|_| {
            reject(format!(
                "`{}` is not a number in column {}",
                &row[i], SCORE_HEADER[i]
            ))
        })
    };
    let fold: u32 = row[1]
        .trim()
        .parse()
        .map_err(|_| reject(format!("fold `{}` is not a positive integer", &row[1])))?;
    let split = row[2].parse().map_err(|e: Error| reject(e.to_string()))?;
    let label = row[3].parse().map_err(|e: Error| reject(e.to_string()))?;
    let ps = EmotionScore::new([prob(4)?, prob(5)?, prob(6)?, prob(7)?])
        .map_err(|e| reject(format!("emotion scores: {e}")))?;
    let pt = SentimentScore::new([prob(8)?, prob(9)?, prob(10)?])
        .map_err(|e| reject(format!("sentiment scores: {e}")))?;
    ScoreRecord::new(&row[0], fold, split, label, ps, pt).map_err(|e| reject(e.to_string()))
}

/// Reads a score file, preserving row order. The first bad row aborts the parse.
pub fn parse_score_file<R: Read>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    check_header(rdr.headers()?)?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != SCORE_HEADER.len() {
            return Err(Error::RejectedRow {
                line,
                reason: format!(
                    "expected {} fields, found {}",
                    SCORE_HEADER.len(),
                    row.len()
                ),
            });
        }
        records.push(parse_row(&row, line)?);
    }
    Ok(records)
}

pub fn read_score_path(path: impl AsRef<std::path::Path>) -> Result<Vec<ScoreRecord>> {
    parse_score_file(std::fs::File::open(path)?)
}

/// Writes records in canonical form: shortest round-trip float literals.
pub fn write_score_file<W: Write>(writer: W, records: &[ScoreRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SCORE_HEADER)?;
    for r in records {
        let ps = r.ps().probs();
        let pt = r.pt().probs();
        wtr.write_record([
            r.id().to_string(),
            r.fold().to_string(),
            r.split().to_string(),
            r.label().to_string(),
            ps[0].to_string(),
            ps[1].to_string(),
            ps[2].to_string(),
            ps[3].to_string(),
            pt[0].to_string(),
            pt[1].to_string(),
            pt[2].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

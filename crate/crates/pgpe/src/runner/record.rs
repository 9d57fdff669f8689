//! Per-iteration telemetry: an in-memory record type, CSV/JSONL writers, and
//! readers for post-hoc reports.
//!
//! Every iteration appends one row to `records.csv` (fixed column order, for
//! spreadsheets) and one line to `records.jsonl` (full precision, one JSON
//! object per line, for exact reloads).

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_FILE: &str = "records.csv";
pub const JSONL_FILE: &str = "records.jsonl";

/// Everything measured in one search iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration index, starting at 0.
    pub k: u64,
    /// Solutions evaluated this iteration (after any adaptive growth).
    pub lambda: usize,
    /// Cumulative simulator timesteps over the whole run.
    pub timesteps_total: u64,
    /// Best raw fitness among this iteration's solutions.
    pub raw_best: f64,
    /// Mean raw fitness over this iteration's solutions.
    pub raw_mean: f64,
    /// Best shaped fitness (identical to raw when shaping is off).
    pub shaped_best: f64,
    /// Mean shaped fitness.
    pub shaped_mean: f64,
    /// Score of the updated distribution mean, averaged over held-out episodes.
    pub eval_score: f64,
    /// Norm of the mean update actually applied.
    pub speed: f64,
    /// Norm of the standard-deviation vector after the update.
    pub sigma_norm: f64,
    /// Whether the optimizer's speed clip limited this update.
    pub clip_engaged: bool,
}

/// The CSV projection of a record; column order is fixed and load-bearing
/// (external tooling indexes by position).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub k: u64,
    pub lambda: usize,
    pub timesteps_total: u64,
    pub raw_best: f64,
    pub raw_mean: f64,
    pub eval_score: f64,
    pub speed: f64,
    pub sigma_norm: f64,
    pub clip_engaged: bool,
}

impl From<&IterationRecord> for CsvRow {
    fn from(r: &IterationRecord) -> Self {
        CsvRow {
            k: r.k,
            lambda: r.lambda,
            timesteps_total: r.timesteps_total,
            raw_best: r.raw_best,
            raw_mean: r.raw_mean,
            eval_score: r.eval_score,
            speed: r.speed,
            sigma_norm: r.sigma_norm,
            clip_engaged: r.clip_engaged,
        }
    }
}

/// Streams records to the paired CSV + JSONL files for one repetition.
pub struct RecordWriter {
    csv: csv::Writer<File>,
    jsonl: BufWriter<File>,
}

impl RecordWriter {
    /// Start fresh files in `dir`, truncating any previous pair.
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let csv = csv::WriterBuilder::new()
            .has_headers(true)
            .from_writer(File::create(dir.join(CSV_FILE))?);
        let jsonl = BufWriter::new(File::create(dir.join(JSONL_FILE))?);
        Ok(RecordWriter { csv, jsonl })
    }

    /// Continue existing files in `dir` (used by resume). The CSV header is
    /// only written when the file is empty.
    pub fn append_to(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(CSV_FILE);
        let fresh = std::fs::metadata(&csv_path).map(|m| m.len() == 0).unwrap_or(true);
        let csv = csv::WriterBuilder::new()
            .has_headers(fresh)
            .from_writer(OpenOptions::new().create(true).append(true).open(&csv_path)?);
        let jsonl = BufWriter::new(
            OpenOptions::new().create(true).append(true).open(dir.join(JSONL_FILE))?,
        );
        Ok(RecordWriter { csv, jsonl })
    }

    pub fn write(&mut self, record: &IterationRecord) -> Result<()> {
        self.csv.serialize(CsvRow::from(record))?;
        let line = serde_json::to_string(record)
            .map_err(|e| Error::CorruptCheckpoint(format!("record serialize: {e}")))?;
        self.jsonl.write_all(line.as_bytes())?;
        self.jsonl.write_all(b"\n")?;
        Ok(())
    }

    /// Push buffered rows to disk so a crash loses at most the current iteration.
    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        self.jsonl.flush()?;
        Ok(())
    }
}

/// Read back the CSV rows written by [`RecordWriter`].
pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Read back full-precision records from a JSONL file.
pub fn read_jsonl(path: &Path) -> Result<Vec<IterationRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: IterationRecord = serde_json::from_str(&line).map_err(|e| {
            Error::CorruptCheckpoint(format!("{}: line {}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Digest of one repetition's record stream, for the `report` command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub iterations: u64,
    pub total_timesteps: u64,
    pub final_eval: f64,
    pub best_eval: f64,
    pub best_raw: f64,
    pub final_sigma_norm: f64,
    pub max_speed: f64,
    /// Iterations on which the speed clip engaged.
    pub clipped_iterations: u64,
}

pub fn summarize(rows: &[CsvRow]) -> Result<RunSummary> {
    let last = rows.last().ok_or_else(|| {
        Error::InvalidConfig("no iteration records to summarize".into())
    })?;
    Ok(RunSummary {
        iterations: rows.len() as u64,
        total_timesteps: last.timesteps_total,
        final_eval: last.eval_score,
        best_eval: rows.iter().map(|r| r.eval_score).fold(f64::NEG_INFINITY, f64::max),
        best_raw: rows.iter().map(|r| r.raw_best).fold(f64::NEG_INFINITY, f64::max),
        final_sigma_norm: last.sigma_norm,
        max_speed: rows.iter().map(|r| r.speed).fold(0.0, f64::max),
        clipped_iterations: rows.iter().filter(|r| r.clip_engaged).count() as u64,
    })
}

/// Directory used for one repetition of a run.
pub fn repetition_dir(output_dir: &Path, repetition: u64) -> PathBuf {
    output_dir.join(format!("rep{repetition:03}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(k: u64) -> IterationRecord {
        IterationRecord {
            k,
            lambda: 20,
            timesteps_total: 20 * (k + 1),
            raw_best: -(k as f64) * 0.5,
            raw_mean: -(k as f64),
            shaped_best: 0.5,
            shaped_mean: 0.0,
            eval_score: 0.1 + k as f64,
            speed: 0.15,
            sigma_norm: 4.5,
            clip_engaged: k % 2 == 0,
        }
    }

    #[test]
    fn csv_columns_are_in_the_documented_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut writer = RecordWriter::create(dir.path()).unwrap();
        writer.write(&sample(0)).unwrap();
        writer.flush().unwrap();
        let text = std::fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "k,lambda,timesteps_total,raw_best,raw_mean,eval_score,speed,sigma_norm,clip_engaged"
        );
    }

    #[test]
    fn jsonl_round_trips_records_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<_> = (0..5).map(sample).collect();
        let mut writer = RecordWriter::create(dir.path()).unwrap();
        for r in &records {
            writer.write(r).unwrap();
        }
        writer.flush().unwrap();
        let loaded = read_jsonl(&dir.path().join(JSONL_FILE)).unwrap();
        assert_eq!(loaded, records);
    }

    #[test]
    fn append_continues_without_a_second_header() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut w = RecordWriter::create(dir.path()).unwrap();
            w.write(&sample(0)).unwrap();
            w.flush().unwrap();
        }
        {
            let mut w = RecordWriter::append_to(dir.path()).unwrap();
            w.write(&sample(1)).unwrap();
            w.flush().unwrap();
        }
        let rows = read_csv(&dir.path().join(CSV_FILE)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].k, 1);
        let text = std::fs::read_to_string(dir.path().join(CSV_FILE)).unwrap();
        assert_eq!(text.matches("k,lambda").count(), 1, "exactly one header");
    }

    #[test]
    fn summary_tracks_best_and_clip_counts() {
        let records: Vec<_> = (0..4).map(sample).collect();
        let rows: Vec<CsvRow> = records.iter().map(CsvRow::from).collect();
        let summary = summarize(&rows).unwrap();
        assert_eq!(summary.iterations, 4);
        assert_eq!(summary.final_eval, 3.1);
        assert_eq!(summary.best_eval, 3.1);
        assert_eq!(summary.clipped_iterations, 2);
        assert_eq!(summary.total_timesteps, 80);
    }
}

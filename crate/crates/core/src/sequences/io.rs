//! Cohort CSV and JSON formats.
//!
//! CSV: header `subject_id,label,state,duration_samples`, one row per run in
//! temporal order, rows of a subject contiguous. The sampling rate is not part
//! of the file and is supplied by the caller.
//!
//! JSON: an array of `{id, label, fs, runs: [[state, duration], ...]}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledCohort, Run, State, StateSequence, Subject};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["subject_id", "label", "state", "duration_samples"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CohortFormat {
    Csv,
    Json,
}

impl CohortFormat {
    /// `.json` files are JSON, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => CohortFormat::Json,
            _ => CohortFormat::Csv,
        }
    }
}

/// Non-fatal findings from ingestion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Adjacent same-state runs that were merged.
    pub merged_runs: usize,
}

pub fn load_cohort(
    path: &Path,
    format: CohortFormat,
    sampling_rate_hz: f64,
) -> Result<(LabeledCohort, LoadReport)> {
    let reader = BufReader::new(File::open(path)?);
    let (cohort, report) = match format {
        CohortFormat::Csv => read_cohort_csv(reader, sampling_rate_hz)?,
        CohortFormat::Json => read_cohort_json(reader)?,
    };
    if report.merged_runs > 0 {
        warn!(
            "{}: merged {} adjacent runs sharing a state",
            path.display(),
            report.merged_runs
        );
    }
    Ok((cohort, report))
}

pub fn save_cohort(cohort: &LabeledCohort, path: &Path, format: CohortFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        CohortFormat::Csv => write_cohort_csv(cohort, &mut w)?,
        CohortFormat::Json => write_cohort_json(cohort, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

struct PendingSubject {
    id: String,
    label: Label,
    runs: Vec<Run>,
}

pub fn read_cohort_csv<R: Read>(reader: R, sampling_rate_hz: f64) -> Result<(LabeledCohort, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}", CSV_HEADER.join(",")),
        });
    }

    let mut report = LoadReport::default();
    let mut subjects = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut current: Option<PendingSubject> = None;

    let finish = |p: PendingSubject, report: &mut LoadReport| -> Result<Subject> {
        let (sequence, merged) = StateSequence::from_runs_merging(p.runs, sampling_rate_hz)?;
        report.merged_runs += merged;
        Ok(Subject { id: p.id, label: p.label, sequence })
    };

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |message: String| Error::Parse { line, message };
        if record.len() != CSV_HEADER.len() {
            return Err(err(format!("expected 4 fields, found {}", record.len())));
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(err("empty subject_id".into()));
        }
        let label = Label::from_str(&record[1]).map_err(|e| err(e.to_string()))?;
        let state = State::from_str(&record[2]).map_err(|e| err(e.to_string()))?;
        let duration: i64 = record[3]
            .parse()
            .map_err(|_| err(format!("duration {:?} is not an integer", &record[3])))?;
        if duration <= 0 {
            return Err(err(format!("duration must be positive, got {duration}")));
        }
        let duration = u32::try_from(duration).map_err(|_| err("duration too large".into()))?;

        match current.as_mut() {
            Some(p) if p.id == id => {
                if p.label != label {
                    return Err(err(format!("label changes within subject {id:?}")));
                }
                p.runs.push(Run::new(state, duration));
            }
            _ => {
                if !seen.insert(id.to_string()) {
                    return Err(err(format!("duplicate subject_id {id:?}")));
                }
                if let Some(p) = current.take() {
                    subjects.push(finish(p, &mut report)?);
                }
                current = Some(PendingSubject {
                    id: id.to_string(),
                    label,
                    runs: vec![Run::new(state, duration)],
                });
            }
        }
    }
    if let Some(p) = current.take() {
        subjects.push(finish(p, &mut report)?);
    }
    Ok((LabeledCohort::new(subjects)?, report))
}

pub fn write_cohort_csv<W: Write>(cohort: &LabeledCohort, mut w: W) -> Result<()> {
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for s in cohort.subjects() {
        for run in s.sequence.runs() {
            writeln!(w, "{},{},{},{}", s.id, s.label, run.state, run.duration_samples)?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonSubject {
    id: String,
    label: Label,
    fs: f64,
    runs: Vec<(State, u32)>,
}

pub fn read_cohort_json<R: Read>(reader: R) -> Result<(LabeledCohort, LoadReport)> {
    let raw: Vec<JsonSubject> = serde_json::from_reader(reader)?;
    let mut report = LoadReport::default();
    let mut subjects = Vec::with_capacity(raw.len());
    for (i, js) in raw.into_iter().enumerate() {
        let runs = js.runs.into_iter().map(|(s, d)| Run::new(s, d));
        let (sequence, merged) = StateSequence::from_runs_merging(runs, js.fs)
            .map_err(|e| Error::InvalidInput(format!("subject #{i} ({:?}): {e}", js.id)))?;
        report.merged_runs += merged;
        subjects.push(Subject { id: js.id, label: js.label, sequence });
    }
    Ok((LabeledCohort::new(subjects)?, report))
}

pub fn write_cohort_json<W: Write>(cohort: &LabeledCohort, mut w: W) -> Result<()> {
    let raw: Vec<JsonSubject> = cohort
        .subjects()
        .iter()
        .map(|s| JsonSubject {
            id: s.id.clone(),
            label: s.label,
            fs: s.sequence.sampling_rate_hz(),
            runs: s.sequence.runs().iter().map(|r| (r.state, r.duration_samples)).collect(),
        })
        .collect();
    serde_json::to_writer(&mut w, &raw)?;
    writeln!(w)?;
    Ok(())
}

//! State alphabet, run-length encoded sequences and labelled cohorts.

pub mod io;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_cohort, read_cohort_csv, read_cohort_json, save_cohort, write_cohort_csv,
    write_cohort_json, CohortFormat, LoadReport,
};

pub const N_STATES: usize = 5;

/// Default sampling rate of the labelled sample stream.
pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 50.0;

/// Respiratory pattern assigned to each sample.
///
/// The declaration order is the canonical order used for every vector and
/// matrix index in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum State {
    /// Pause.
    #[serde(rename = "PAU")]
    Pau,
    /// Asynchronous breathing.
    #[serde(rename = "ASB")]
    Asb,
    /// Movement artifact.
    #[serde(rename = "MVT")]
    Mvt,
    /// Synchronous breathing.
    #[serde(rename = "SYB")]
    Syb,
    /// Unknown.
    #[serde(rename = "UNK")]
    Unk,
}

impl State {
    pub const ALL: [State; N_STATES] = [State::Pau, State::Asb, State::Mvt, State::Syb, State::Unk];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<State> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            State::Pau => "PAU",
            State::Asb => "ASB",
            State::Mvt => "MVT",
            State::Syb => "SYB",
            State::Unk => "UNK",
        }
    }

    /// The four states other than `self`, in canonical order.
    pub fn others(self) -> impl Iterator<Item = State> {
        Self::ALL.into_iter().filter(move |s| *s != self)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for State {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PAU" => Ok(State::Pau),
            "ASB" => Ok(State::Asb),
            "MVT" => Ok(State::Mvt),
            "SYB" => Ok(State::Syb),
            "UNK" => Ok(State::Unk),
            other => Err(Error::InvalidInput(format!("unknown state token {other:?}"))),
        }
    }
}

/// Outcome label. `Failure` is the positive class everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Success,
    Failure,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Success, Label::Failure];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Success => "success",
            Label::Failure => "failure",
        }
    }

    /// +1 for the positive (failure) class, -1 otherwise.
    pub fn sign(self) -> i8 {
        match self {
            Label::Failure => 1,
            Label::Success => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Label {
        if sign > 0 {
            Label::Failure
        } else {
            Label::Success
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "success" => Ok(Label::Success),
            "failure" => Ok(Label::Failure),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub state: State,
    pub duration_samples: u32,
}

impl Run {
    pub fn new(state: State, duration_samples: u32) -> Self {
        Run { state, duration_samples }
    }
}

/// Maximal runs of a labelled sample stream plus its sampling rate.
///
/// Adjacent runs always have distinct states and every run has at least one
/// sample.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSequence {
    runs: Vec<Run>,
    sampling_rate_hz: f64,
}

impl StateSequence {
    /// Run-length compresses a per-sample label stream.
    pub fn from_samples(samples: &[State], sampling_rate_hz: f64) -> Result<Self> {
        check_rate(sampling_rate_hz)?;
        if samples.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut runs: Vec<Run> = Vec::new();
        for &s in samples {
            match runs.last_mut() {
                Some(last) if last.state == s => last.duration_samples += 1,
                _ => runs.push(Run::new(s, 1)),
            }
        }
        Ok(Self { runs, sampling_rate_hz })
    }

    /// Builds a sequence from runs, merging adjacent runs that share a state.
    /// Returns the sequence and the number of merges performed.
    pub fn from_runs_merging(
        runs: impl IntoIterator<Item = Run>,
        sampling_rate_hz: f64,
    ) -> Result<(Self, usize)> {
        check_rate(sampling_rate_hz)?;
        let mut merged = 0;
        let mut out: Vec<Run> = Vec::new();
        for run in runs {
            if run.duration_samples == 0 {
                return Err(Error::InvalidInput("run duration must be positive".into()));
            }
            match out.last_mut() {
                Some(last) if last.state == run.state => {
                    last.duration_samples = last
                        .duration_samples
                        .checked_add(run.duration_samples)
                        .ok_or_else(|| Error::InvalidInput("run duration overflow".into()))?;
                    merged += 1;
                }
                _ => out.push(run),
            }
        }
        if out.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok((Self { runs: out, sampling_rate_hz }, merged))
    }

    /// Builds a sequence from runs that are already maximal.
    pub fn from_runs(runs: Vec<Run>, sampling_rate_hz: f64) -> Result<Self> {
        let (seq, merged) = Self::from_runs_merging(runs, sampling_rate_hz)?;
        if merged > 0 {
            return Err(Error::InvalidInput("adjacent runs share a state".into()));
        }
        Ok(seq)
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn total_samples(&self) -> u64 {
        self.runs.iter().map(|r| r.duration_samples as u64).sum()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.total_samples() as f64 / self.sampling_rate_hz
    }

    pub fn run_seconds(&self, run: &Run) -> f64 {
        run.duration_samples as f64 / self.sampling_rate_hz
    }

    /// Per-sample label stream (the inverse of [`from_samples`](Self::from_samples)).
    pub fn expand(&self) -> Vec<State> {
        let mut out = Vec::with_capacity(self.total_samples() as usize);
        for run in &self.runs {
            out.extend(std::iter::repeat_n(run.state, run.duration_samples as usize));
        }
        out
    }

    /// Same run structure at `factor` times the sampling rate.
    pub fn upsample(&self, factor: u32) -> Self {
        assert!(factor >= 1);
        Self {
            runs: self
                .runs
                .iter()
                .map(|r| Run::new(r.state, r.duration_samples * factor))
                .collect(),
            sampling_rate_hz: self.sampling_rate_hz * factor as f64,
        }
    }

    /// Dwell time per state in samples.
    pub fn dwell_samples(&self) -> [u64; N_STATES] {
        let mut out = [0u64; N_STATES];
        for r in &self.runs {
            out[r.state.index()] += r.duration_samples as u64;
        }
        out
    }

    /// Fraction of the total duration spent in each state.
    pub fn dwell_fractions(&self) -> [f64; N_STATES] {
        let total = self.total_samples() as f64;
        self.dwell_samples().map(|d| d as f64 / total)
    }
}

/// Fraction of total duration spent in each state, canonical order.
pub fn total_dwell_fractions(seq: &StateSequence) -> [f64; N_STATES] {
    seq.dwell_fractions()
}

fn check_rate(fs: f64) -> Result<()> {
    if fs.is_finite() && fs > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("sampling rate must be positive, got {fs}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subject {
    pub id: String,
    pub label: Label,
    pub sequence: StateSequence,
}

/// Subjects with unique ids; class proportions are unconstrained.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledCohort {
    subjects: Vec<Subject>,
}

impl LabeledCohort {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate subject_id {:?}", s.id)));
            }
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &Subject> {
        self.subjects.iter().filter(move |s| s.label == label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.with_label(label).count()
    }

    pub fn sequences(&self, label: Label) -> Vec<&StateSequence> {
        self.with_label(label).map(|s| &s.sequence).collect()
    }

    /// Concatenation of two cohorts; ids must stay unique.
    pub fn merged(&self, other: &LabeledCohort) -> Result<Self> {
        let mut subjects = self.subjects.clone();
        subjects.extend(other.subjects.iter().cloned());
        Self::new(subjects)
    }
}

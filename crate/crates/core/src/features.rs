//! Dwell, occurrence and transition summary features.
//!
//! Thirty features per sequence, canonical order:
//! `dw_<S>` (5) fraction of time in each state, `oc_<S>` (5) fraction of runs
//! in each state, `tr_<I>_<J>` (20, `I != J`) run transitions from `I` to `J`
//! per second spent in `I`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sequences::{State, StateSequence, N_STATES};

pub const N_FEATURES: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub dw: [f64; N_STATES],
    pub oc: [f64; N_STATES],
    /// `tr[i][j]`, diagonal unused and zero.
    pub tr: [[f64; N_STATES]; N_STATES],
}

pub fn extract_features(seq: &StateSequence) -> FeatureVector {
    let runs = seq.runs();
    let dw = seq.dwell_fractions();
    let mut oc = [0.0; N_STATES];
    for r in runs {
        oc[r.state.index()] += 1.0;
    }
    oc.iter_mut().for_each(|c| *c /= runs.len() as f64);

    let dwell_s = seq.dwell_samples().map(|d| d as f64 / seq.sampling_rate_hz());
    let mut tr = [[0.0; N_STATES]; N_STATES];
    for w in runs.windows(2) {
        tr[w[0].state.index()][w[1].state.index()] += 1.0;
    }
    for (row, &seconds) in tr.iter_mut().zip(&dwell_s) {
        for v in row.iter_mut() {
            // a state with transitions out always has positive dwell
            *v = if seconds > 0.0 { *v / seconds } else { 0.0 };
        }
    }
    FeatureVector { dw, oc, tr }
}

impl FeatureVector {
    /// Flat 30-vector in canonical column order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(N_FEATURES);
        v.extend_from_slice(&self.dw);
        v.extend_from_slice(&self.oc);
        for from in State::ALL {
            for to in from.others() {
                v.push(self.tr[from.index()][to.index()]);
            }
        }
        v
    }

    /// `dw`, `oc`, then transitions to the four other states.
    pub fn select_state(&self, state: State) -> [f64; 6] {
        let i = state.index();
        let mut out = [self.dw[i], self.oc[i], 0.0, 0.0, 0.0, 0.0];
        for (slot, to) in out[2..].iter_mut().zip(state.others()) {
            *slot = self.tr[i][to.index()];
        }
        out
    }

    pub fn select(&self, set: FeatureSet) -> Vec<f64> {
        match set {
            FeatureSet::State(s) => self.select_state(s).to_vec(),
            FeatureSet::Dw => self.dw.to_vec(),
            FeatureSet::Oc => self.oc.to_vec(),
            FeatureSet::Tr => self.to_vec()[2 * N_STATES..].to_vec(),
            FeatureSet::All => self.to_vec(),
        }
    }
}

pub fn select_state_features(v: &FeatureVector, state: State) -> [f64; 6] {
    v.select_state(state)
}

/// Column names matching [`FeatureVector::to_vec`].
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_FEATURES);
    names.extend(State::ALL.iter().map(|s| format!("dw_{s}")));
    names.extend(State::ALL.iter().map(|s| format!("oc_{s}")));
    for from in State::ALL {
        for to in from.others() {
            names.push(format!("tr_{from}_{to}"));
        }
    }
    names
}

/// Feature subsets used by the discriminative classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    /// Dwell fractions only (5).
    Dw,
    /// Occurrence fractions only (5).
    Oc,
    /// Transition rates only (20).
    Tr,
    /// All 30 features.
    All,
    /// The 6 features of one state.
    State(State),
}

impl FeatureSet {
    pub fn len(self) -> usize {
        match self {
            FeatureSet::Dw | FeatureSet::Oc => N_STATES,
            FeatureSet::Tr => N_STATES * (N_STATES - 1),
            FeatureSet::All => N_FEATURES,
            FeatureSet::State(_) => 6,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSet::Dw => f.write_str("dw-all"),
            FeatureSet::Oc => f.write_str("oc-all"),
            FeatureSet::Tr => f.write_str("tr-all"),
            FeatureSet::All => f.write_str("dw-oc-tr-all"),
            FeatureSet::State(s) => write!(f, "dw-oc-tr-{}", s.as_str().to_ascii_lowercase()),
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Accepts `dw-all`, `oc-all`, `tr-all`, `dw-oc-tr-all` and `dw-oc-tr-<state>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "dw-all" => Ok(FeatureSet::Dw),
            "oc-all" => Ok(FeatureSet::Oc),
            "tr-all" => Ok(FeatureSet::Tr),
            "dw-oc-tr-all" => Ok(FeatureSet::All),
            other => match other.strip_prefix("dw-oc-tr-") {
                Some(state) => State::from_str(state).map(FeatureSet::State),
                None => Err(Error::InvalidInput(format!("unknown feature set {s:?}"))),
            },
        }
    }
}

//! Sample-level discrete-time Markov chains.
//!
//! Transitions are counted between consecutive samples, so a run of `d`
//! samples contributes `d - 1` self-transitions. The start distribution is
//! estimated but never enters a likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;
use crate::sequences::{Label, State, StateSequence, N_STATES};

/// Probability floor applied inside logarithms so an unseen transition costs
/// a large finite penalty instead of `-inf`.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovModel {
    pub transition: TransitionMatrix,
    pub start_dist: Option<[f64; N_STATES]>,
    pub log_floor: f64,
}

/// Sample-level transition counts, `counts[from][to]`.
pub fn sample_transition_counts<'a>(
    sequences: impl IntoIterator<Item = &'a StateSequence>,
) -> [[u64; N_STATES]; N_STATES] {
    let mut counts = [[0u64; N_STATES]; N_STATES];
    for seq in sequences {
        let runs = seq.runs();
        for run in runs {
            let i = run.state.index();
            counts[i][i] += run.duration_samples as u64 - 1;
        }
        for w in runs.windows(2) {
            counts[w[0].state.index()][w[1].state.index()] += 1;
        }
    }
    counts
}

pub fn fit_markov<'a, I>(sequences: I) -> Result<MarkovModel>
where
    I: IntoIterator<Item = &'a StateSequence>,
{
    let sequences: Vec<&StateSequence> = sequences.into_iter().collect();
    if !sequences.iter().any(|s| s.total_samples() >= 2) {
        return Err(Error::InsufficientData(
            "Markov fit needs at least one sequence with two or more samples".into(),
        ));
    }
    let counts = sample_transition_counts(sequences.iter().copied());
    let mut starts = [0.0; N_STATES];
    for seq in &sequences {
        starts[seq.runs()[0].state.index()] += 1.0;
    }
    let n = sequences.len() as f64;
    Ok(MarkovModel {
        transition: TransitionMatrix::from_counts(&counts, false),
        start_dist: Some(starts.map(|c| c / n)),
        log_floor: DEFAULT_LOG_FLOOR,
    })
}

impl MarkovModel {
    pub fn new(transition: TransitionMatrix) -> Self {
        Self { transition, start_dist: None, log_floor: DEFAULT_LOG_FLOOR }
    }

    pub fn with_log_floor(mut self, floor: f64) -> Self {
        self.log_floor = floor;
        self
    }

    fn log_prob(&self, from: State, to: State) -> f64 {
        self.transition.get(from, to).max(self.log_floor).ln()
    }

    /// Sum of log transition probabilities over the sample-level expansion.
    pub fn log_likelihood(&self, seq: &StateSequence) -> f64 {
        let runs = seq.runs();
        let stay: f64 = runs
            .iter()
            .map(|r| (r.duration_samples - 1) as f64 * self.log_prob(r.state, r.state))
            .sum();
        let cross: f64 = runs.windows(2).map(|w| self.log_prob(w[0].state, w[1].state)).sum();
        stay + cross
    }
}

pub fn markov_log_likelihood(model: &MarkovModel, seq: &StateSequence) -> f64 {
    model.log_likelihood(seq)
}

/// Label with the larger likelihood plus the failure-minus-success
/// log-likelihood score. Ties go to `Failure`.
pub fn classify_markov(
    success: &MarkovModel,
    failure: &MarkovModel,
    seq: &StateSequence,
) -> (Label, f64) {
    let score = failure.log_likelihood(seq) - success.log_likelihood(seq);
    (label_from_score(score), score)
}

/// Positive (and zero) scores favour `Failure`.
pub fn label_from_score(score: f64) -> Label {
    if score >= 0.0 {
        Label::Failure
    } else {
        Label::Success
    }
}

#[derive(Serialize, Deserialize)]
struct MarkovJson {
    #[serde(rename = "type")]
    kind: String,
    states: Vec<State>,
    #[serde(rename = "A")]
    a: TransitionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<f64>>,
}

impl Serialize for MarkovModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MarkovJson {
            kind: "markov".into(),
            states: State::ALL.to_vec(),
            a: self.transition.clone(),
            pi: self.start_dist.map(|p| p.to_vec()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MarkovModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MarkovJson::deserialize(deserializer)?;
        if raw.kind != "markov" {
            return Err(D::Error::custom(format!("expected type \"markov\", found {:?}", raw.kind)));
        }
        if raw.states != State::ALL {
            return Err(D::Error::custom("states must be [PAU, ASB, MVT, SYB, UNK]"));
        }
        let start_dist = match raw.pi {
            Some(p) => Some(
                <[f64; N_STATES]>::try_from(p.as_slice())
                    .map_err(|_| D::Error::custom("pi must have 5 entries"))?,
            ),
            None => None,
        };
        Ok(MarkovModel { transition: raw.a, start_dist, log_floor: DEFAULT_LOG_FLOOR })
    }
}

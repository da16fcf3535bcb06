//! Run-level semi-Markov chains: cross-state transitions with explicit
//! sojourn-time distributions.
//!
//! Likelihood conventions:
//! - the start distribution is estimated but excluded from likelihoods;
//! - the first run's dwell is left-censored by the recording window and the
//!   last run's dwell right-censored, so neither contributes a density term
//!   (the last run still contributes its incoming transition);
//! - dwell densities are continuous pdfs evaluated at the duration in seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dwell::{select_by_bic, fit_mle, BicEntry, DwellDistribution, Family};
use crate::error::{Error, Result};
use crate::markov::{label_from_score, DEFAULT_LOG_FLOOR};
use crate::matrix::TransitionMatrix;
use crate::par;
use crate::sequences::{Label, LabeledCohort, Run, State, StateSequence, Subject, N_STATES};

#[derive(Clone, Debug, PartialEq)]
pub enum DwellPolicy {
    /// Fit every listed family and keep the BIC minimiser.
    Bic(Vec<Family>),
    /// Use a fixed family per state, canonical order.
    Fixed([Family; N_STATES]),
}

impl Default for DwellPolicy {
    fn default() -> Self {
        DwellPolicy::Bic(Family::ALL.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub dwell_policy: DwellPolicy,
    /// Leave each sequence's first and last run out of the dwell pools.
    pub exclude_censored: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { dwell_policy: DwellPolicy::default(), exclude_censored: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiMarkovModel {
    /// Zero diagonal, off-diagonal rows sum to one.
    pub transition: TransitionMatrix,
    /// `None` marks a state never observed as a dwell.
    pub dwell: [Option<DwellDistribution>; N_STATES],
    pub start_dist: Option<[f64; N_STATES]>,
    pub sampling_rate_hz: f64,
    pub log_floor: f64,
}

/// Per-state outcome of the dwell fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DwellFitReport {
    pub pool_size: usize,
    pub bic_table: Vec<BicEntry>,
    /// Set when the pool was too small or degenerate for the configured
    /// policy and an exponential with the pool mean was used instead.
    pub fallback: Option<String>,
}

/// Cross-state transition counts between consecutive runs.
pub fn run_transition_counts<'a>(
    sequences: impl IntoIterator<Item = &'a StateSequence>,
) -> [[u64; N_STATES]; N_STATES] {
    let mut counts = [[0u64; N_STATES]; N_STATES];
    for seq in sequences {
        for w in seq.runs().windows(2) {
            counts[w[0].state.index()][w[1].state.index()] += 1;
        }
    }
    counts
}

/// Dwell durations in seconds pooled per state.
pub fn dwell_pools<'a>(
    sequences: impl IntoIterator<Item = &'a StateSequence>,
    exclude_censored: bool,
) -> [Vec<f64>; N_STATES] {
    let mut pools: [Vec<f64>; N_STATES] = Default::default();
    for seq in sequences {
        let runs = seq.runs();
        let range = if exclude_censored {
            1..runs.len().saturating_sub(1).max(1)
        } else {
            0..runs.len()
        };
        for run in &runs[range] {
            pools[run.state.index()].push(seq.run_seconds(run));
        }
    }
    pools
}

pub fn fit_semi_markov<'a, I>(sequences: I, options: &FitOptions) -> Result<SemiMarkovModel>
where
    I: IntoIterator<Item = &'a StateSequence>,
{
    fit_semi_markov_with_report(sequences, options).map(|(m, _)| m)
}

pub fn fit_semi_markov_with_report<'a, I>(
    sequences: I,
    options: &FitOptions,
) -> Result<(SemiMarkovModel, [DwellFitReport; N_STATES])>
where
    I: IntoIterator<Item = &'a StateSequence>,
{
    let sequences: Vec<&StateSequence> = sequences.into_iter().collect();
    if !sequences.iter().any(|s| s.runs().len() >= 2) {
        return Err(Error::InsufficientData(
            "semi-Markov fit needs at least one sequence with two or more runs".into(),
        ));
    }
    let counts = run_transition_counts(sequences.iter().copied());
    let transition = TransitionMatrix::from_counts(&counts, true);

    let mut starts = [0.0; N_STATES];
    for seq in &sequences {
        starts[seq.runs()[0].state.index()] += 1.0;
    }
    let start_dist = starts.map(|c| c / sequences.len() as f64);

    let pools = dwell_pools(sequences.iter().copied(), options.exclude_censored);
    let mut dwell: [Option<DwellDistribution>; N_STATES] = Default::default();
    let mut reports: [DwellFitReport; N_STATES] = Default::default();
    for state in State::ALL {
        let i = state.index();
        let (d, report) = fit_pool(&pools[i], state, &options.dwell_policy)?;
        dwell[i] = d;
        reports[i] = report;
    }

    // Fitting rate: the most common rate among the inputs.
    let sampling_rate_hz = sequences[0].sampling_rate_hz();
    Ok((
        SemiMarkovModel {
            transition,
            dwell,
            start_dist: Some(start_dist),
            sampling_rate_hz,
            log_floor: DEFAULT_LOG_FLOOR,
        },
        reports,
    ))
}

fn fit_pool(
    pool: &[f64],
    state: State,
    policy: &DwellPolicy,
) -> Result<(Option<DwellDistribution>, DwellFitReport)> {
    let mut report = DwellFitReport { pool_size: pool.len(), ..Default::default() };
    if pool.is_empty() {
        return Ok((None, report));
    }
    let fitted = match policy {
        DwellPolicy::Bic(families) => select_by_bic(pool, families).map(|(d, table)| {
            report.bic_table = table;
            d
        }),
        DwellPolicy::Fixed(families) => fit_mle(families[state.index()], pool),
    };
    match fitted {
        Ok(d) => Ok((Some(d), report)),
        Err(e) => {
            debug!("{state}: dwell fit on {} samples fell back to exponential: {e}", pool.len());
            report.fallback = Some(e.to_string());
            let mean = pool.iter().sum::<f64>() / pool.len() as f64;
            let mut d = DwellDistribution::exponential(mean)?;
            d.n_fit = Some(pool.len());
            d.log_likelihood_at_fit = Some(d.log_likelihood(pool));
            Ok((Some(d), report))
        }
    }
}

/// Which likelihood a semi-Markov classifier compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LikelihoodMode {
    All,
    State(State),
}

impl FromStr for LikelihoodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            Ok(LikelihoodMode::All)
        } else {
            State::from_str(s).map(LikelihoodMode::State)
        }
    }
}

impl fmt::Display for LikelihoodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LikelihoodMode::All => f.write_str("ALL"),
            LikelihoodMode::State(s) => write!(f, "{s}"),
        }
    }
}

impl SemiMarkovModel {
    pub fn dwell(&self, state: State) -> Result<&DwellDistribution> {
        self.dwell[state.index()].as_ref().ok_or(Error::UnfitDwell(state))
    }

    pub fn is_fully_fitted(&self) -> bool {
        self.dwell.iter().all(Option::is_some)
    }

    fn log_transition(&self, from: State, to: State) -> f64 {
        self.transition.get(from, to).max(self.log_floor).ln()
    }

    fn log_dwell(&self, state: State, seconds: f64) -> Result<f64> {
        Ok(self.dwell(state)?.log_pdf(seconds).max(self.log_floor.ln()))
    }

    /// Transition terms over consecutive runs plus dwell densities of every
    /// run except the first and the last.
    pub fn log_likelihood(&self, seq: &StateSequence) -> Result<f64> {
        let runs = seq.runs();
        let mut total = 0.0;
        for t in 1..runs.len() {
            total += self.log_transition(runs[t - 1].state, runs[t].state);
            if t + 1 < runs.len() {
                total += self.log_dwell(runs[t].state, seq.run_seconds(&runs[t]))?;
            }
        }
        Ok(total)
    }

    /// Terms attributable to `state`: transitions leaving it and, when
    /// `include_dwell` is set, dwell densities of its interior runs. Summed
    /// over all states (with dwell) this equals [`log_likelihood`](Self::log_likelihood).
    pub fn per_state_log_likelihood(
        &self,
        seq: &StateSequence,
        state: State,
        include_dwell: bool,
    ) -> Result<f64> {
        let runs = seq.runs();
        let mut total = 0.0;
        for t in 1..runs.len() {
            if runs[t - 1].state == state {
                total += self.log_transition(state, runs[t].state);
            }
            if include_dwell && runs[t].state == state && t + 1 < runs.len() {
                total += self.log_dwell(state, seq.run_seconds(&runs[t]))?;
            }
        }
        Ok(total)
    }

    pub fn mode_log_likelihood(
        &self,
        seq: &StateSequence,
        mode: LikelihoodMode,
        include_dwell: bool,
    ) -> Result<f64> {
        match mode {
            LikelihoodMode::All => self.log_likelihood(seq),
            LikelihoodMode::State(s) => self.per_state_log_likelihood(seq, s, include_dwell),
        }
    }

    fn draw_state<R: Rng + ?Sized>(probs: &[f64; N_STATES], rng: &mut R) -> State {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = State::Unk;
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = State::ALL[i];
            if u < acc {
                return last;
            }
        }
        last
    }

    /// Generates a sequence of `duration_s` seconds at the model's sampling
    /// rate. Dwell draws are rounded to whole samples (at least one) and the
    /// final run is clipped to the window.
    pub fn simulate_with_rng<R: Rng + ?Sized>(&self, duration_s: f64, rng: &mut R) -> Result<StateSequence> {
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::InvalidInput(format!("duration must be positive, got {duration_s}")));
        }
        for s in State::ALL {
            self.dwell(s)?;
        }
        let fs = self.sampling_rate_hz;
        let total = ((duration_s * fs).round() as u64).max(1);
        let start = self.start_dist.unwrap_or([1.0 / N_STATES as f64; N_STATES]);
        let mut state = Self::draw_state(&start, rng);
        let mut runs = Vec::new();
        let mut elapsed = 0u64;
        while elapsed < total {
            let seconds = self.dwell[state.index()].as_ref().unwrap().sample(rng);
            let samples = (seconds * fs).round().max(1.0).min((total - elapsed) as f64) as u64;
            runs.push(Run::new(state, samples as u32));
            elapsed += samples;
            state = Self::draw_state(self.transition.row(state), rng);
        }
        StateSequence::from_runs(runs, fs)
    }

    pub fn simulate(&self, duration_s: f64, seed: u64) -> Result<StateSequence> {
        self.simulate_with_rng(duration_s, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

pub fn semi_markov_log_likelihood(model: &SemiMarkovModel, seq: &StateSequence) -> Result<f64> {
    model.log_likelihood(seq)
}

pub fn per_state_log_likelihood(
    model: &SemiMarkovModel,
    seq: &StateSequence,
    state: State,
) -> Result<f64> {
    model.per_state_log_likelihood(seq, state, true)
}

/// Label with the larger chosen likelihood and the failure-minus-success
/// score. Ties go to `Failure`.
pub fn classify_semi_markov(
    success: &SemiMarkovModel,
    failure: &SemiMarkovModel,
    seq: &StateSequence,
    mode: LikelihoodMode,
    include_dwell: bool,
) -> Result<(Label, f64)> {
    let score = failure.mode_log_likelihood(seq, mode, include_dwell)?
        - success.mode_log_likelihood(seq, mode, include_dwell)?;
    Ok((label_from_score(score), score))
}

/// Simulates `n_success + n_failure` subjects. Subject `i` draws from its own
/// ChaCha stream, so the cohort does not depend on scheduling.
pub fn simulate_cohort(
    success: &SemiMarkovModel,
    failure: &SemiMarkovModel,
    n_success: usize,
    n_failure: usize,
    duration_s: f64,
    seed: u64,
) -> Result<LabeledCohort> {
    let subjects: Vec<Result<Subject>> = par::map_indices(n_success + n_failure, |i| {
        let (label, model, id) = if i < n_success {
            (Label::Success, success, format!("S{:04}", i + 1))
        } else {
            (Label::Failure, failure, format!("F{:04}", i - n_success + 1))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let sequence = model.simulate_with_rng(duration_s, &mut rng)?;
        Ok(Subject { id, label, sequence })
    });
    LabeledCohort::new(subjects.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Serialize, Deserialize)]
struct SemiMarkovJson {
    #[serde(rename = "type")]
    kind: String,
    states: Vec<State>,
    #[serde(rename = "A")]
    a: TransitionMatrix,
    dwell: BTreeMap<State, Option<DwellDistribution>>,
    fs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<f64>>,
}

impl Serialize for SemiMarkovModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SemiMarkovJson {
            kind: "semi_markov".into(),
            states: State::ALL.to_vec(),
            a: self.transition.clone(),
            dwell: State::ALL.iter().map(|s| (*s, self.dwell[s.index()].clone())).collect(),
            fs: self.sampling_rate_hz,
            pi: self.start_dist.map(|p| p.to_vec()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SemiMarkovModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SemiMarkovJson::deserialize(deserializer)?;
        if raw.kind != "semi_markov" {
            return Err(D::Error::custom(format!(
                "expected type \"semi_markov\", found {:?}",
                raw.kind
            )));
        }
        if raw.states != State::ALL {
            return Err(D::Error::custom("states must be [PAU, ASB, MVT, SYB, UNK]"));
        }
        if !raw.a.has_zero_diagonal() {
            return Err(D::Error::custom("semi-Markov transition matrix must have a zero diagonal"));
        }
        if !(raw.fs > 0.0 && raw.fs.is_finite()) {
            return Err(D::Error::custom("fs must be positive"));
        }
        let mut dwell: [Option<DwellDistribution>; N_STATES] = Default::default();
        for s in State::ALL {
            match raw.dwell.get(&s) {
                Some(d) => dwell[s.index()] = d.clone(),
                None => return Err(D::Error::custom(format!("dwell entry for {s} is missing"))),
            }
        }
        let start_dist = match raw.pi {
            Some(p) => Some(
                <[f64; N_STATES]>::try_from(p.as_slice())
                    .map_err(|_| D::Error::custom("pi must have 5 entries"))?,
            ),
            None => None,
        };
        Ok(SemiMarkovModel {
            transition: raw.a,
            dwell,
            start_dist,
            sampling_rate_hz: raw.fs,
            log_floor: DEFAULT_LOG_FLOOR,
        })
    }
}

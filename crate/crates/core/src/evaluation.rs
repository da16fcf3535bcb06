//! Leave-one-out evaluation, balanced loss, ROC sweeps, bootstrap standard
//! errors and symmetric KL divergence between transition matrices.
//!
//! Failure is the positive class: sensitivity is the fraction of failures
//! detected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::label_from_score;
use crate::par;
use crate::sequences::{Label, LabeledCohort, State, Subject, N_STATES};
use crate::svm;

/// `1 - (sensitivity + specificity) / 2`.
pub fn balanced_loss(sensitivity: f64, specificity: f64) -> f64 {
    1.0 - (sensitivity + specificity) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    /// Larger means more failure-like.
    pub score: f64,
}

impl Prediction {
    pub fn from_score(score: f64) -> Self {
        Self { label: label_from_score(score), score }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Failure, Label::Failure) => self.tp += 1,
            (Label::Failure, Label::Success) => self.fn_ += 1,
            (Label::Success, Label::Success) => self.tn += 1,
            (Label::Success, Label::Failure) => self.fp += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    /// `tp / (tp + fn)`; NaN without positives.
    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    /// `tn / (tn + fp)`; NaN without negatives.
    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubjectPrediction {
    pub id: String,
    #[serde(rename = "true")]
    pub truth: Label,
    pub predicted: Option<Label>,
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_loss: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub per_subject: Vec<SubjectPrediction>,
    /// False when any fold failed; failed folds are left out of the counts.
    pub complete: bool,
    pub failed_folds: usize,
}

impl EvalReport {
    /// Aggregates held-out predictions, one per subject in order.
    pub fn from_predictions(ids: &[String], truths: &[Label], predictions: Vec<Result<Prediction>>) -> Self {
        let mut confusion = Confusion::default();
        let mut per_subject = Vec::with_capacity(ids.len());
        let mut failed_folds = 0;
        for ((id, &truth), pred) in ids.iter().zip(truths).zip(predictions) {
            match pred {
                Ok(p) => {
                    confusion.record(truth, p.label);
                    per_subject.push(SubjectPrediction {
                        id: id.clone(),
                        truth,
                        predicted: Some(p.label),
                        score: Some(p.score),
                        error: None,
                    });
                }
                Err(e) => {
                    failed_folds += 1;
                    per_subject.push(SubjectPrediction {
                        id: id.clone(),
                        truth,
                        predicted: None,
                        score: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        let sensitivity = confusion.sensitivity();
        let specificity = confusion.specificity();
        Self {
            sensitivity,
            specificity,
            balanced_loss: balanced_loss(sensitivity, specificity),
            accuracy: confusion.accuracy(),
            confusion,
            per_subject,
            complete: failed_folds == 0,
            failed_folds,
        }
    }

    /// Flat `(metric, value)` pairs for the CSV report.
    pub fn metric_rows(&self) -> Vec<(&'static str, f64)> {
        let c = &self.confusion;
        vec![
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
            ("balanced_loss", self.balanced_loss),
            ("accuracy", self.accuracy),
            ("tp", c.tp as f64),
            ("fn", c.fn_ as f64),
            ("tn", c.tn as f64),
            ("fp", c.fp as f64),
            ("n_subjects", self.per_subject.len() as f64),
            ("failed_folds", self.failed_folds as f64),
        ]
    }
}

pub(crate) fn check_loocv_labels(labels: &[Label]) -> Result<()> {
    if labels.len() < 2 {
        return Err(Error::InsufficientData("cross-validation needs at least two subjects".into()));
    }
    if !(labels.contains(&Label::Success) && labels.contains(&Label::Failure)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Index-based leave-one-out loop. `train(held_out, training_indices)` builds
/// a model from everything but `held_out`; `predict(model, held_out)` scores
/// it. Folds run in parallel and are reassembled in subject order.
pub fn loocv_by_index<M, T, P>(ids: &[String], labels: &[Label], train: T, predict: P) -> Result<EvalReport>
where
    T: Fn(usize, &[usize]) -> Result<M> + Sync + Send,
    P: Fn(&M, usize) -> Result<Prediction> + Sync + Send,
{
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: ids.len(), got: labels.len() });
    }
    check_loocv_labels(labels)?;
    let n = ids.len();
    let predictions = par::map_indices(n, |held| {
        let training: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let model = train(held, &training)?;
        predict(&model, held)
    });
    Ok(EvalReport::from_predictions(ids, labels, predictions))
}

/// Leave-one-out over a cohort: `trainer` sees the other `n - 1` subjects,
/// `predictor` scores the held-out one.
pub fn loocv<M, T, P>(cohort: &LabeledCohort, trainer: T, predictor: P) -> Result<EvalReport>
where
    T: Fn(&[&Subject]) -> Result<M> + Sync + Send,
    P: Fn(&M, &Subject) -> Result<Prediction> + Sync + Send,
{
    let subjects = cohort.subjects();
    let ids: Vec<String> = subjects.iter().map(|s| s.id.clone()).collect();
    let labels: Vec<Label> = subjects.iter().map(|s| s.label).collect();
    loocv_by_index(
        &ids,
        &labels,
        |_, training| {
            let train: Vec<&Subject> = training.iter().map(|&i| &subjects[i]).collect();
            trainer(&train)
        },
        |model, held| predictor(model, &subjects[held]),
    )
}

pub const KL_FLOOR: f64 = 1e-10;

/// `sum (p - q) ln(p / q)` in nats. Entries where both are zero are skipped;
/// a lone zero is floored at [`KL_FLOOR`].
pub fn symmetric_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, b)| !(**a == 0.0 && **b == 0.0))
        .map(|(&a, &b)| {
            let (a, b) = (a.max(KL_FLOOR), b.max(KL_FLOOR));
            (a - b) * (a / b).ln()
        })
        .sum()
}

/// Row-wise symmetric KL, summed over rows.
pub fn symmetric_kl_transitions(a: &[[f64; N_STATES]; N_STATES], b: &[[f64; N_STATES]; N_STATES]) -> f64 {
    a.iter().zip(b).map(|(p, q)| symmetric_kl(p, q)).sum()
}

/// The matrices flattened and renormalised into single distributions over
/// the 25 cells.
pub fn symmetric_kl_flattened(a: &[[f64; N_STATES]; N_STATES], b: &[[f64; N_STATES]; N_STATES]) -> f64 {
    let flat = |m: &[[f64; N_STATES]; N_STATES]| {
        let total: f64 = m.iter().flatten().sum();
        m.iter().flatten().map(|v| v / total).collect::<Vec<_>>()
    };
    symmetric_kl(&flat(a), &flat(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub gamma: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    /// Sorted by false-positive rate, then true-positive rate.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Sorts the points and integrates the monotone staircase through
    /// (0, 0), the points and (1, 1) with the trapezoid rule.
    pub fn from_points(mut points: Vec<RocPoint>) -> Self {
        points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)).then(a.gamma.total_cmp(&b.gamma)));
        let mut auc = 0.0;
        let (mut x, mut y) = (0.0f64, 0.0f64);
        for p in points.iter().filter(|p| p.fpr.is_finite() && p.tpr.is_finite()) {
            let ny = y.max(p.tpr);
            auc += (p.fpr - x) * (y + ny) / 2.0;
            x = p.fpr;
            y = ny;
        }
        auc += (1.0 - x) * (y + 1.0) / 2.0;
        Self { points, auc }
    }
}

/// LOOCV operating point for each gamma with C held fixed.
pub fn roc_sweep(
    x: &[Vec<f64>],
    labels: &[Label],
    ids: &[String],
    c: f64,
    gamma_grid: &[f64],
) -> Result<RocCurve> {
    if gamma_grid.len() < 2 {
        return Err(Error::InvalidInput("ROC sweep needs at least two gamma values".into()));
    }
    let search = svm::grid_search(x, labels, ids, &[c], gamma_grid)?;
    let points = search
        .surface
        .iter()
        .map(|p| RocPoint { gamma: p.gamma, fpr: 1.0 - p.report.specificity, tpr: p.report.sensitivity })
        .collect();
    Ok(RocCurve::from_points(points))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateEstimate {
    pub state: State,
    pub mean: f64,
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub seed: u64,
    pub success: Vec<StateEstimate>,
    pub failure: Vec<StateEstimate>,
}

pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;

/// Pooled state fractions: total seconds in each state over total seconds.
fn pooled_fractions(subjects: &[&Subject], draw: impl Iterator<Item = usize>) -> [f64; N_STATES] {
    let mut seconds = [0.0; N_STATES];
    for i in draw {
        let seq = &subjects[i].sequence;
        let fs = seq.sampling_rate_hz();
        for (s, d) in seconds.iter_mut().zip(seq.dwell_samples()) {
            *s += d as f64 / fs;
        }
    }
    let total: f64 = seconds.iter().sum();
    seconds.map(|s| s / total)
}

/// Bootstrap of the duration-weighted state fractions, resampling subjects
/// with replacement within each class. `mean` is the full-sample statistic;
/// `standard_error` is the sample standard deviation over replicates.
/// Replicate `b` of class `c` uses ChaCha stream `c * 2^32 + b`.
pub fn bootstrap_state_fractions(cohort: &LabeledCohort, replicates: usize, seed: u64) -> Result<BootstrapSummary> {
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    let mut per_class = Vec::new();
    for (class_index, label) in [Label::Success, Label::Failure].into_iter().enumerate() {
        let subjects: Vec<&Subject> = cohort.with_label(label).collect();
        let n = subjects.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("bootstrap needs at least two {label} subjects, got {n}")));
        }
        let full = pooled_fractions(&subjects, 0..n);
        let stats: Vec<[f64; N_STATES]> = par::map_indices(replicates, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((class_index as u64) << 32) + b as u64);
            let draw: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            pooled_fractions(&subjects, draw.into_iter())
        });
        let estimates = State::ALL
            .iter()
            .map(|&state| {
                let k = state.index();
                let mean_b = stats.iter().map(|s| s[k]).sum::<f64>() / replicates as f64;
                let var = stats.iter().map(|s| (s[k] - mean_b).powi(2)).sum::<f64>() / (replicates - 1) as f64;
                StateEstimate { state, mean: full[k], standard_error: var.sqrt() }
            })
            .collect();
        per_class.push(estimates);
    }
    let failure = per_class.pop().expect("two classes");
    let success = per_class.pop().expect("two classes");
    Ok(BootstrapSummary { replicates, seed, success, failure })
}

//! End-to-end leave-one-out pipelines selected by method token.
//!
//! | token                | classifier                                        |
//! |----------------------|---------------------------------------------------|
//! | `markov`             | sample-level Markov likelihood ratio              |
//! | `lk-all`             | semi-Markov likelihood ratio, full likelihood     |
//! | `lk-<state>`         | semi-Markov likelihood ratio, one state's terms   |
//! | `svm-<feature set>`  | RBF SVM on the named features, grid-searched      |
//!
//! Feature-set tokens are those of [`FeatureSet`], e.g. `svm-dw-oc-tr-all`
//! (30 features) or `svm-dw-oc-tr-pau` (6 features).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{EvalReport, Prediction};
use crate::par;
use crate::features::{extract_features, FeatureSet};
use crate::markov::{fit_markov, MarkovModel};
use crate::semi_markov::{fit_semi_markov, FitOptions, LikelihoodMode, SemiMarkovModel};
use crate::sequences::{Label, LabeledCohort, State, StateSequence};
use crate::svm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Markov,
    Likelihood(LikelihoodMode),
    Svm(FeatureSet),
}

impl Method {
    /// Every accepted token, for usage messages.
    pub fn valid_tokens() -> Vec<String> {
        let mut tokens = vec!["markov".to_string(), "lk-all".to_string()];
        tokens.extend(State::ALL.iter().map(|s| format!("lk-{}", s.as_str().to_ascii_lowercase())));
        for set in [FeatureSet::Dw, FeatureSet::Oc, FeatureSet::Tr, FeatureSet::All] {
            tokens.push(format!("svm-{set}"));
        }
        tokens.extend(State::ALL.iter().map(|s| format!("svm-{}", FeatureSet::State(*s))));
        tokens
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parsed = if lower == "markov" {
            Some(Method::Markov)
        } else if let Some(rest) = lower.strip_prefix("lk-") {
            LikelihoodMode::from_str(rest).ok().map(Method::Likelihood)
        } else if let Some(rest) = lower.strip_prefix("svm-") {
            FeatureSet::from_str(rest).ok().map(Method::Svm)
        } else {
            None
        };
        parsed.ok_or_else(|| {
            Error::InvalidInput(format!("unknown method {s:?}; valid methods: {}", Method::valid_tokens().join(", ")))
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Markov => f.write_str("markov"),
            Method::Likelihood(mode) => write!(f, "lk-{}", mode.to_string().to_ascii_lowercase()),
            Method::Svm(set) => write!(f, "svm-{set}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvaluateOptions {
    pub fit: FitOptions,
    /// Per-state likelihoods include the state's interior dwell densities.
    pub include_dwell: bool,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            include_dwell: true,
            c_grid: svm::default_c_grid(),
            gamma_grid: svm::default_gamma_grid(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfacePoint {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub balanced_loss: f64,
    pub complete: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodEvaluation {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_features: Option<usize>,
    #[serde(rename = "best_C", skip_serializing_if = "Option::is_none")]
    pub best_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_gamma: Option<f64>,
    pub report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<Vec<SurfacePoint>>,
}

pub fn evaluate(cohort: &LabeledCohort, method: Method, options: &EvaluateOptions) -> Result<MethodEvaluation> {
    let base = |report| MethodEvaluation {
        method: method.to_string(),
        n_features: None,
        best_c: None,
        best_gamma: None,
        report,
        surface: None,
    };
    match method {
        Method::Markov => Ok(base(evaluate_markov(cohort)?)),
        Method::Likelihood(mode) => Ok(base(evaluate_likelihood(cohort, mode, options)?)),
        Method::Svm(set) => evaluate_svm(cohort, set, options),
    }
}

fn ids_and_labels(cohort: &LabeledCohort) -> (Vec<String>, Vec<Label>) {
    cohort.subjects().iter().map(|s| (s.id.clone(), s.label)).unzip()
}

/// Only the held-out subject's class changes between folds, so the other
/// class's model is fitted once on its full data and reused. `score` returns
/// one failure-minus-success score per requested variant; one report is
/// produced per variant.
fn class_cached_loocv<M, F, S>(cohort: &LabeledCohort, n_variants: usize, fit: F, score: S) -> Result<Vec<EvalReport>>
where
    M: Sync + Send,
    F: Fn(Vec<&StateSequence>) -> Result<M> + Sync + Send,
    S: Fn(&M, &M, &StateSequence) -> Vec<Result<f64>> + Sync + Send,
{
    let (ids, labels) = ids_and_labels(cohort);
    crate::evaluation::check_loocv_labels(&labels)?;
    let subjects = cohort.subjects();
    let full_success = fit(cohort.sequences(Label::Success))?;
    let full_failure = fit(cohort.sequences(Label::Failure))?;
    let n = subjects.len();
    let per_fold: Vec<Vec<Result<f64>>> = par::map_indices(n, |held| {
        let label = subjects[held].label;
        let training = subjects
            .iter()
            .enumerate()
            .filter(|&(i, s)| i != held && s.label == label)
            .map(|(_, s)| &s.sequence)
            .collect();
        let refit = match fit(training) {
            Ok(m) => m,
            Err(e) => {
                let message = e.to_string();
                return (0..n_variants).map(|_| Err(Error::FoldFailed(message.clone()))).collect();
            }
        };
        let seq = &subjects[held].sequence;
        match label {
            Label::Success => score(&refit, &full_failure, seq),
            Label::Failure => score(&full_success, &refit, seq),
        }
    });
    let mut columns: Vec<Vec<Result<Prediction>>> = (0..n_variants).map(|_| Vec::with_capacity(n)).collect();
    for fold in per_fold {
        for (column, value) in columns.iter_mut().zip(fold) {
            column.push(value.map(Prediction::from_score));
        }
    }
    Ok(columns.into_iter().map(|preds| EvalReport::from_predictions(&ids, &labels, preds)).collect())
}

/// Semi-Markov likelihood-ratio classifier under leave-one-out.
pub fn evaluate_likelihood(cohort: &LabeledCohort, mode: LikelihoodMode, options: &EvaluateOptions) -> Result<EvalReport> {
    evaluate_likelihood_modes(cohort, &[mode], options).map(|mut r| r.remove(0))
}

/// Several likelihood modes scored from the same per-fold refits.
pub fn evaluate_likelihood_modes(
    cohort: &LabeledCohort,
    modes: &[LikelihoodMode],
    options: &EvaluateOptions,
) -> Result<Vec<EvalReport>> {
    class_cached_loocv(
        cohort,
        modes.len(),
        |seqs| fit_semi_markov(seqs, &options.fit),
        |success: &SemiMarkovModel, failure: &SemiMarkovModel, seq| {
            modes
                .iter()
                .map(|&mode| {
                    Ok(failure.mode_log_likelihood(seq, mode, options.include_dwell)?
                        - success.mode_log_likelihood(seq, mode, options.include_dwell)?)
                })
                .collect()
        },
    )
}

/// Sample-level Markov likelihood-ratio classifier under leave-one-out.
pub fn evaluate_markov(cohort: &LabeledCohort) -> Result<EvalReport> {
    class_cached_loocv(cohort, 1, |seqs| fit_markov(seqs), |success: &MarkovModel, failure: &MarkovModel, seq| {
        vec![Ok(failure.log_likelihood(seq) - success.log_likelihood(seq))]
    })
    .map(|mut r| r.remove(0))
}

/// Feature matrix for a cohort in subject order.
pub fn feature_matrix(cohort: &LabeledCohort, set: FeatureSet) -> Vec<Vec<f64>> {
    cohort.subjects().iter().map(|s| extract_features(&s.sequence).select(set)).collect()
}

/// Grid search over `(C, gamma)` by leave-one-out balanced loss; the report
/// is the one at the selected point.
pub fn evaluate_svm(cohort: &LabeledCohort, set: FeatureSet, options: &EvaluateOptions) -> Result<MethodEvaluation> {
    let (ids, labels) = ids_and_labels(cohort);
    let x = feature_matrix(cohort, set);
    let search = svm::grid_search(&x, &labels, &ids, &options.c_grid, &options.gamma_grid)?;
    let report = search.best().report.clone();
    let surface = search
        .surface
        .iter()
        .map(|p| SurfacePoint { c: p.c, gamma: p.gamma, balanced_loss: p.report.balanced_loss, complete: p.report.complete })
        .collect();
    Ok(MethodEvaluation {
        method: Method::Svm(set).to_string(),
        n_features: Some(set.len()),
        best_c: Some(search.best_c),
        best_gamma: Some(search.best_gamma),
        report,
        surface: Some(surface),
    })
}

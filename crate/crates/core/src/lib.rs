//! Markov and semi-Markov modelling of respiratory-state sequences.
//!
//! The crate covers the whole pipeline from labelled state sequences to
//! outcome prediction:
//!
//! - [`sequences`]: the five-state alphabet, run-length encoded sequences,
//!   labelled cohorts and their CSV/JSON formats.
//! - [`markov`]: sample-level Markov chains, likelihoods and the
//!   likelihood-ratio classifier.
//! - [`semi_markov`]: run-level chains with explicit sojourn-time
//!   distributions, full and per-state likelihoods, and a simulator.
//! - [`dwell`]: parametric sojourn-time families, maximum-likelihood fitting
//!   and BIC family selection.
//! - [`features`]: dwell/occurrence/transition summary features.
//! - [`svm`]: an RBF soft-margin SVM trained by SMO, plus grid search.
//! - [`pipeline`]: method tokens and complete leave-one-out runs.
//! - [`evaluation`]: leave-one-out cross-validation, balanced loss, ROC
//!   sweeps, bootstrap standard errors and symmetric KL divergence.
//!
//! Data-parallel loops (folds, grid points, bootstrap replicates, cohort
//! simulation) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iterators otherwise. Results are identical either way.

pub mod dwell;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod markov;
pub mod matrix;
pub mod par;
pub mod pipeline;
pub mod published;
pub mod semi_markov;
pub mod sequences;
pub mod svm;

pub use error::{Error, Result};
pub use sequences::{Label, LabeledCohort, Run, State, StateSequence, Subject};

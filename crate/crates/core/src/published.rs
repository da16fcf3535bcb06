//! Published cohort-level parameters for the success and failure groups:
//! run-level transition tables, best-fitting dwell families, and sample-level
//! Markov transition tables at 50 Hz.
//!
//! The tables are reproduced as printed (two or four decimals), so some rows
//! sum to 0.99 or 1.01. [`success_semi_markov`] and [`failure_semi_markov`]
//! renormalise those rows; the raw constants are kept for divergence checks.

use serde::Deserialize;

use crate::markov::MarkovModel;
use crate::matrix::TransitionMatrix;
use crate::semi_markov::SemiMarkovModel;
use crate::sequences::N_STATES;

type Table = [[f64; N_STATES]; N_STATES];

/// Embedded copy of `data/published_models.json`.
pub const MODELS_JSON: &str = include_str!("../data/published_models.json");

pub const SUCCESS_RUN_TRANSITIONS: Table = [
    [0.0, 0.27, 0.09, 0.26, 0.38],
    [0.10, 0.0, 0.16, 0.29, 0.45],
    [0.12, 0.32, 0.0, 0.43, 0.14],
    [0.06, 0.25, 0.15, 0.0, 0.54],
    [0.13, 0.28, 0.04, 0.55, 0.0],
];

pub const FAILURE_RUN_TRANSITIONS: Table = [
    [0.0, 0.28, 0.06, 0.39, 0.28],
    [0.12, 0.0, 0.21, 0.28, 0.40],
    [0.17, 0.41, 0.0, 0.32, 0.09],
    [0.14, 0.21, 0.14, 0.0, 0.52],
    [0.15, 0.30, 0.03, 0.52, 0.0],
];

pub const SUCCESS_SAMPLE_TRANSITIONS: Table = [
    [0.9936, 0.0019, 0.0004, 0.0022, 0.0018],
    [0.0006, 0.9953, 0.0010, 0.0013, 0.0018],
    [0.0012, 0.0029, 0.9931, 0.0020, 0.0007],
    [0.0003, 0.0005, 0.0003, 0.9977, 0.0012],
    [0.0015, 0.0031, 0.0003, 0.0055, 0.9895],
];

pub const FAILURE_SAMPLE_TRANSITIONS: Table = [
    [0.9920, 0.0022, 0.0007, 0.0020, 0.0032],
    [0.0005, 0.9955, 0.0007, 0.0013, 0.0020],
    [0.0007, 0.0021, 0.9934, 0.0028, 0.0010],
    [0.0001, 0.0005, 0.0003, 0.9978, 0.0012],
    [0.0013, 0.0027, 0.0004, 0.0056, 0.9899],
];

#[derive(Deserialize)]
pub struct PublishedModels {
    pub success: SemiMarkovModel,
    pub failure: SemiMarkovModel,
}

pub fn models() -> PublishedModels {
    serde_json::from_str(MODELS_JSON).expect("embedded model file is valid")
}

pub fn success_semi_markov() -> SemiMarkovModel {
    models().success
}

pub fn failure_semi_markov() -> SemiMarkovModel {
    models().failure
}

pub fn success_markov() -> MarkovModel {
    MarkovModel::new(TransitionMatrix::from_rows_renormalized(SUCCESS_SAMPLE_TRANSITIONS).unwrap())
}

pub fn failure_markov() -> MarkovModel {
    MarkovModel::new(TransitionMatrix::from_rows_renormalized(FAILURE_SAMPLE_TRANSITIONS).unwrap())
}

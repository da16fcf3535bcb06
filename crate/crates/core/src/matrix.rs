use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequences::{State, N_STATES};

/// Tolerance on row sums for a fitted matrix.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Rows of published tables are rounded to two decimals and may sum to
/// 0.99 or 1.01; rows within this distance of 1 are renormalised on load.
pub const RENORMALIZE_TOLERANCE: f64 = 0.02;

/// Row-stochastic matrix over the five-state alphabet, indexed in canonical
/// state order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix([[f64; N_STATES]; N_STATES]);

impl TransitionMatrix {
    /// Validates that every entry is in [0, 1] and that every row sums to 1.
    pub fn from_rows(rows: [[f64; N_STATES]; N_STATES]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
                return Err(Error::InvalidInput(format!("row {i} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidInput(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self(rows))
    }

    /// Like [`from_rows`](Self::from_rows) but rescales rows whose sum is
    /// within [`RENORMALIZE_TOLERANCE`] of 1.
    pub fn from_rows_renormalized(mut rows: [[f64; N_STATES]; N_STATES]) -> Result<Self> {
        for (i, row) in rows.iter_mut().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
                return Err(Error::InvalidInput(format!("row {i} sums to {sum}, not 1")));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Self::from_rows(rows)
    }

    /// Maximum-likelihood estimate from transition counts. Rows without any
    /// observed transition become uniform (over the off-diagonal entries when
    /// `zero_diagonal` is set).
    pub fn from_counts(counts: &[[u64; N_STATES]; N_STATES], zero_diagonal: bool) -> Self {
        let mut rows = [[0.0; N_STATES]; N_STATES];
        for (i, (row, count_row)) in rows.iter_mut().zip(counts).enumerate() {
            let total: u64 = count_row
                .iter()
                .enumerate()
                .filter(|&(j, _)| !(zero_diagonal && i == j))
                .map(|(_, c)| c)
                .sum();
            for (j, p) in row.iter_mut().enumerate() {
                if zero_diagonal && i == j {
                    continue;
                }
                *p = if total == 0 {
                    let width = if zero_diagonal { N_STATES - 1 } else { N_STATES };
                    1.0 / width as f64
                } else {
                    count_row[j] as f64 / total as f64
                };
            }
        }
        Self(rows)
    }

    pub fn get(&self, from: State, to: State) -> f64 {
        self.0[from.index()][to.index()]
    }

    pub fn row(&self, from: State) -> &[f64; N_STATES] {
        &self.0[from.index()]
    }

    pub fn rows(&self) -> &[[f64; N_STATES]; N_STATES] {
        &self.0
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..N_STATES).all(|i| self.0[i][i] == 0.0)
    }

    pub fn max_abs_difference(&self, other: &TransitionMatrix) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != N_STATES || rows.iter().any(|r| r.len() != N_STATES) {
            return Err(Error::InvalidInput(format!(
                "transition matrix must be {N_STATES}x{N_STATES}"
            )));
        }
        let mut out = [[0.0; N_STATES]; N_STATES];
        for (dst, src) in out.iter_mut().zip(&rows) {
            dst.copy_from_slice(src);
        }
        Self::from_rows_renormalized(out)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.0.iter().map(|r| r.to_vec()).collect()
    }
}

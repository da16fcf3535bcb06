//! Binary soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimisation.
//!
//! Labels are `+1` (failure, the positive class) and `-1` (success). The dual
//! solved is
//!
//! ```text
//! max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0
//! ```
//!
//! with working pairs chosen as the maximal KKT-violating pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{EvalReport, Prediction};
use crate::par;
use crate::sequences::Label;

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// C in {2^-5, 2^-3, ..., 2^15}.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=15).step_by(2).map(|e| 2f64.powi(e)).collect()
}

/// gamma in {2^-15, 2^-13, ..., 2^3}.
pub fn default_gamma_grid() -> Vec<f64> {
    (-15..=3).step_by(2).map(|e| 2f64.powi(e)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal violating pair's gap falls below this. The
    /// default is tighter than the 1e-3 KKT margin so the dual objective is
    /// accurate to well under 1e-6.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// z-score features with training statistics before fitting.
    pub standardize: bool,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            standardize: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite() && self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "C and gamma must be positive, got C={} gamma={}",
                self.c, self.gamma
            )));
        }
        Ok(())
    }
}

/// Per-feature mean and standard deviation from training data. Constant
/// features get a unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for r in &rows {
            for ((s, v), m) in std.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in std.iter_mut() {
            let sd = (*s / n).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense symmetric kernel matrix in row-major order.
#[derive(Clone, Debug)]
pub struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    pub fn rbf(x: &[Vec<f64>], gamma: f64) -> Self {
        Self::from_squared_distances(&SquaredDistances::new(x), gamma)
    }

    pub fn from_squared_distances(d: &SquaredDistances, gamma: f64) -> Self {
        Self { n: d.n, values: d.values.iter().map(|v| (-gamma * v).exp()).collect() }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = f(i, j);
            }
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise squared Euclidean distances, reusable across kernel widths.
#[derive(Clone, Debug)]
pub struct SquaredDistances {
    n: usize,
    values: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = squared_distance(&x[i], &x[j]);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { n, values }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Added to the kernel expansion: `f(x) = sum a_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal violating pair gap.
    pub gap: f64,
}

/// Dual objective `sum(a) - 1/2 a'Qa`.
pub fn dual_objective(gram: &Gram, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram.get(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// SMO on a precomputed kernel matrix.
pub fn solve_dual(gram: &Gram, y: &[f64], c: f64, tolerance: f64, max_iterations: usize) -> Result<DualSolution> {
    let n = gram.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(y.iter().any(|v| *v > 0.0) && y.iter().any(|v| *v < 0.0)) {
        return Err(Error::SingleClass);
    }
    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let gap = loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m {
                m = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < big_m {
                big_m = v;
                j = t;
            }
        }
        let gap = m - big_m;
        if i == usize::MAX || j == usize::MAX || gap < tolerance {
            break gap.max(0.0);
        }
        if iterations >= max_iterations {
            return Err(Error::SvmNonConvergence { iterations, violation: gap });
        }
        iterations += 1;

        let (kii, kjj, kij) = (gram.get(i, i), gram.get(j, j), gram.get(i, j));
        let quad = (kii + kjj - 2.0 * kij).max(1e-12);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (row_i, row_j) = (gram.row(i), gram.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
    };

    // threshold: average over free vectors, else midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    Ok(DualSolution { alpha, bias: -rho, iterations, gap })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Applied to inputs before the kernel; `None` when training was unscaled.
    pub normalization: Option<Standardizer>,
}

fn check_inputs(x: &[Vec<f64>], y: &[i8]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("SVM training needs at least two examples".into()));
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    if y.iter().any(|v| *v != 1 && *v != -1) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

/// Trains a model and also returns the full dual solution (one multiplier
/// per training example) for diagnostics.
pub fn train_svm_with_solution(
    x: &[Vec<f64>],
    y: &[i8],
    params: &SvmParams,
) -> Result<(SvmModel, DualSolution)> {
    check_inputs(x, y)?;
    params.validate()?;
    let normalization = params
        .standardize
        .then(|| Standardizer::fit(x.iter().map(Vec::as_slice)));
    let xs: Vec<Vec<f64>> = match &normalization {
        Some(s) => x.iter().map(|r| s.apply(r)).collect(),
        None => x.to_vec(),
    };
    let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
    let gram = Gram::rbf(&xs, params.gamma);
    let sol = solve_dual(&gram, &yf, params.c, params.tolerance, params.max_iterations)?;
    let model = model_from_solution(&xs, &yf, &sol, params.gamma, params.c, normalization);
    Ok((model, sol))
}

pub fn train_svm(x: &[Vec<f64>], y: &[i8], params: &SvmParams) -> Result<SvmModel> {
    train_svm_with_solution(x, y, params).map(|(m, _)| m)
}

fn model_from_solution(
    xs: &[Vec<f64>],
    y: &[f64],
    sol: &DualSolution,
    gamma: f64,
    c: f64,
    normalization: Option<Standardizer>,
) -> SvmModel {
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for ((row, &a), &yi) in xs.iter().zip(&sol.alpha).zip(y) {
        if a > 0.0 {
            support_vectors.push(row.clone());
            dual_coefficients.push(a * yi);
        }
    }
    SvmModel { support_vectors, dual_coefficients, bias: sol.bias, gamma, c, normalization }
}

impl SvmModel {
    pub fn dimension(&self) -> Option<usize> {
        self.normalization
            .as_ref()
            .map(|n| n.mean.len())
            .or_else(|| self.support_vectors.first().map(Vec::len))
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dimension() {
            if d != x.len() {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        let scaled;
        let x = match &self.normalization {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, coef)| coef * rbf_kernel(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias)
    }

    /// `(+1 or -1, decision value)`; a zero decision value maps to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<(i8, f64)> {
        let f = self.decision_value(x)?;
        Ok((if f >= 0.0 { 1 } else { -1 }, f))
    }
}

pub fn predict(model: &SvmModel, x: &[f64]) -> Result<(i8, f64)> {
    model.predict(x)
}

/// LOOCV outcome of one grid point.
#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSearch {
    pub best_c: f64,
    pub best_gamma: f64,
    /// C-major, both axes ascending.
    pub surface: Vec<GridPoint>,
}

impl GridSearch {
    pub fn best(&self) -> &GridPoint {
        self.surface
            .iter()
            .find(|p| p.c == self.best_c && p.gamma == self.best_gamma)
            .expect("best point is on the surface")
    }
}

fn sorted_grid(grid: &[f64], name: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!("{name} grid values must be positive")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Leave-one-out evaluation of every `(C, gamma)` pair.
///
/// Each fold standardises with its own training statistics and computes the
/// pairwise distances once; kernels for every gamma and solves for every C
/// reuse them. The selected point minimises balanced loss, ties going to the
/// smaller C and then the smaller gamma; points with failed folds only win
/// when no complete point exists.
pub fn grid_search(
    x: &[Vec<f64>],
    labels: &[Label],
    ids: &[String],
    c_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<GridSearch> {
    grid_search_with(x, labels, ids, c_grid, gamma_grid, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)
}

pub fn grid_search_with(
    x: &[Vec<f64>],
    labels: &[Label],
    ids: &[String],
    c_grid: &[f64],
    gamma_grid: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<GridSearch> {
    let cs = sorted_grid(c_grid, "C")?;
    let gammas = sorted_grid(gamma_grid, "gamma")?;
    let n = x.len();
    if labels.len() != n || ids.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len().min(ids.len()) });
    }
    crate::evaluation::check_loocv_labels(labels)?;
    for row in x {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }

    // fold -> [gamma][c] -> prediction
    let per_fold: Vec<Vec<Vec<Result<Prediction>>>> = par::map_indices(n, |held| {
        let train: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let scaler = Standardizer::fit(train.iter().map(|&i| x[i].as_slice()));
        let xs: Vec<Vec<f64>> = train.iter().map(|&i| scaler.apply(&x[i])).collect();
        let y: Vec<f64> = train.iter().map(|&i| labels[i].sign() as f64).collect();
        let probe = scaler.apply(&x[held]);
        let dist = SquaredDistances::new(&xs);
        let probe_dist: Vec<f64> = xs.iter().map(|r| squared_distance(r, &probe)).collect();
        gammas
            .iter()
            .map(|&gamma| {
                let gram = Gram::from_squared_distances(&dist, gamma);
                let k_probe: Vec<f64> = probe_dist.iter().map(|d| (-gamma * d).exp()).collect();
                cs.iter()
                    .map(|&c| {
                        let sol = solve_dual(&gram, &y, c, tolerance, max_iterations)?;
                        let f = sol
                            .alpha
                            .iter()
                            .zip(&y)
                            .zip(&k_probe)
                            .map(|((a, yi), k)| a * yi * k)
                            .sum::<f64>()
                            + sol.bias;
                        Ok(Prediction::from_score(f))
                    })
                    .collect()
            })
            .collect()
    });

    let mut per_fold = per_fold;
    let mut surface = Vec::with_capacity(cs.len() * gammas.len());
    for (ci, &c) in cs.iter().enumerate() {
        for (gi, &gamma) in gammas.iter().enumerate() {
            let preds: Vec<Result<Prediction>> = per_fold
                .iter_mut()
                .map(|fold| std::mem::replace(&mut fold[gi][ci], Err(Error::InvalidInput(String::new()))))
                .collect();
            let report = EvalReport::from_predictions(ids, labels, preds);
            surface.push(GridPoint { c, gamma, report });
        }
    }

    let mut best: Option<&GridPoint> = None;
    for p in &surface {
        let better = match best {
            None => true,
            Some(b) => {
                (p.report.complete && !b.report.complete)
                    || (p.report.complete == b.report.complete
                        && p.report.balanced_loss < b.report.balanced_loss)
            }
        };
        if better {
            best = Some(p);
        }
    }
    let best = best.expect("grids are non-empty");
    let (best_c, best_gamma) = (best.c, best.gamma);
    Ok(GridSearch { best_c, best_gamma, surface })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Exhaustive dual QP: every assignment of multipliers to {0, C, free},
    /// solving the equality-constrained stationarity system on the free set
    /// and keeping the best feasible candidate.
    pub(crate) fn exhaustive_dual(gram: &Gram, y: &[f64], c: f64) -> (Vec<f64>, f64) {
        let n = y.len();
        let mut best = (vec![0.0; n], 0.0);
        let mut assignment = vec![0u8; n];
        loop {
            if let Some(alpha) = solve_face(gram, y, c, &assignment) {
                let obj = dual_objective(gram, y, &alpha);
                if obj > best.1 {
                    best = (alpha, obj);
                }
            }
            // next base-3 assignment
            let mut k = 0;
            while k < n && assignment[k] == 2 {
                assignment[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
            assignment[k] += 1;
        }
        best
    }

    fn solve_face(gram: &Gram, y: &[f64], c: f64, assignment: &[u8]) -> Option<Vec<f64>> {
        let n = y.len();
        let free: Vec<usize> = (0..n).filter(|&i| assignment[i] == 2).collect();
        let mut alpha: Vec<f64> = assignment.iter().map(|&a| if a == 1 { c } else { 0.0 }).collect();
        if free.is_empty() {
            let s: f64 = alpha.iter().zip(y).map(|(a, yi)| a * yi).sum();
            return (s.abs() < 1e-9).then_some(alpha);
        }
        // unknowns: alpha_F and the multiplier nu
        let m = free.len();
        let dim = m + 1;
        let mut a = vec![vec![0.0; dim + 1]; dim];
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[r][s] = y[i] * y[j] * gram.get(i, j);
            }
            a[r][m] = y[i];
            let fixed: f64 = (0..n)
                .filter(|&j| assignment[j] == 1)
                .map(|j| y[i] * y[j] * gram.get(i, j) * c)
                .sum();
            a[r][dim] = 1.0 - fixed;
        }
        for (s, &j) in free.iter().enumerate() {
            a[m][s] = y[j];
        }
        a[m][dim] = -(0..n).filter(|&j| assignment[j] == 1).map(|j| y[j] * c).sum::<f64>();
        let sol = gaussian_solve(a)?;
        for (r, &i) in free.iter().enumerate() {
            if sol[r] <= 0.0 || sol[r] >= c {
                return None;
            }
            alpha[i] = sol[r];
        }
        Some(alpha)
    }

    fn gaussian_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
        let n = a.len();
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
            if a[pivot][col].abs() < 1e-12 {
                return None;
            }
            a.swap(col, pivot);
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let f = row[col] / pivot_row[col];
                    for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                        *v -= f * p;
                    }
                }
            }
        }
        Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
    }

    pub(crate) fn random_problem(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        loop {
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            if y.contains(&1) && y.contains(&-1) {
                return (x, y);
            }
        }
    }

    fn unscaled(c: f64, gamma: f64) -> SvmParams {
        SvmParams { standardize: false, ..SvmParams::new(c, gamma) }
    }

    #[test]
    fn two_point_problem_separates_with_both_as_support_vectors() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let y = vec![-1, 1];
        let (model, sol) = train_svm_with_solution(&x, &y, &unscaled(10.0, 0.5)).unwrap();
        assert_eq!(model.support_vectors.len(), 2);
        assert!(sol.alpha.iter().all(|a| *a > 0.0));
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(model.predict(xi).unwrap().0, *yi);
        }
    }

    #[test]
    fn xor_trains_to_full_accuracy_and_matches_exhaustive_qp() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![-1, -1, 1, 1];
        let (model, sol) = train_svm_with_solution(&x, &y, &unscaled(10.0, 1.0)).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(model.predict(xi).unwrap().0, *yi);
        }
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        let gram = Gram::rbf(&x, 1.0);
        let (_, reference) = exhaustive_dual(&gram, &yf, 10.0);
        assert!((dual_objective(&gram, &yf, &sol.alpha) - reference).abs() < 1e-6);
    }

    #[test]
    fn smo_matches_exhaustive_qp_on_small_problems() {
        let mut worst: f64 = 0.0;
        for seed in 0..200u64 {
            let n = 2 + (seed as usize % 9);
            let (x, y) = random_problem(n, 2, 100 + seed);
            let c = [0.1, 1.0, 10.0, 100.0][seed as usize % 4];
            let gamma = [0.5, 2.0][seed as usize % 2];
            let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
            let gram = Gram::rbf(&x, gamma);
            let sol = solve_dual(&gram, &yf, c, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).unwrap();
            let (_, reference) = exhaustive_dual(&gram, &yf, c);
            worst = worst.max((reference - dual_objective(&gram, &yf, &sol.alpha)).abs());
        }
        assert!(worst <= 1e-6, "worst objective gap {worst:e}");
    }

    #[test]
    fn dual_objective_not_below_zero_start() {
        let (x, y) = random_problem(30, 3, 1);
        let (_, sol) = train_svm_with_solution(&x, &y, &unscaled(1.0, 1.0)).unwrap();
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        assert!(dual_objective(&Gram::rbf(&x, 1.0), &yf, &sol.alpha) >= 0.0);
    }

    #[test]
    fn rejects_bad_training_data() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_svm(&x, &[1, 1], &SvmParams::new(1.0, 1.0)), Err(Error::SingleClass)));
        let bad = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(train_svm(&bad, &[1, -1], &SvmParams::new(1.0, 1.0)), Err(Error::NonFinite)));
        let model = train_svm(&x, &[1, -1], &SvmParams::new(1.0, 1.0)).unwrap();
        assert!(matches!(model.predict(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kkt_conditions_hold_at_convergence() {
        for seed in 0..10 {
            let (x, y) = random_problem(40, 2, 200 + seed);
            let params = SvmParams::new([0.5, 5.0][seed as usize % 2], 2.0);
            let (model, sol) = train_svm_with_solution(&x, &y, &params).unwrap();
            let sum: f64 = sol.alpha.iter().zip(&y).map(|(a, yi)| a * *yi as f64).sum();
            assert!(sum.abs() <= 1e-6);
            for ((xi, yi), &a) in x.iter().zip(&y).zip(&sol.alpha) {
                assert!((0.0..=params.c).contains(&a));
                let margin = *yi as f64 * model.decision_value(xi).unwrap();
                if a == 0.0 {
                    assert!(margin >= 1.0 - 1e-3, "{margin}");
                } else if a == params.c {
                    assert!(margin <= 1.0 + 1e-3, "{margin}");
                } else {
                    assert!((margin - 1.0).abs() <= 1e-3, "{margin}");
                }
            }
        }
    }

    #[test]
    fn decision_is_continuous() {
        let (x, y) = random_problem(20, 3, 3);
        let model = train_svm(&x, &y, &SvmParams::new(2.0, 0.5)).unwrap();
        let probe = vec![0.1, -0.2, 0.3];
        let nudged: Vec<f64> = probe.iter().map(|v| v + 1e-9).collect();
        let delta = model.decision_value(&probe).unwrap() - model.decision_value(&nudged).unwrap();
        assert!(delta.abs() < 1e-6);
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = random_problem(12, 2, 4);
        let model = train_svm(&x, &y, &SvmParams::new(1.0, 1.0)).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: SvmModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn default_grids() {
        let c = default_c_grid();
        assert_eq!(c.len(), 11);
        assert_eq!((c[0], c[10]), (1.0 / 32.0, 32768.0));
        let g = default_gamma_grid();
        assert_eq!(g.len(), 10);
        assert_eq!((g[0], g[9]), (2f64.powi(-15), 8.0));
    }

    fn separable_cohort(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>, Vec<String>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { Label::Failure } else { Label::Success };
            let centre = if label == Label::Failure { 2.0 } else { -2.0 };
            x.push(vec![centre + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            labels.push(label);
        }
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        (x, labels, ids)
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let (x, labels, ids) = separable_cohort(16, 5);
        let gs = grid_search(&x, &labels, &ids, &[2.0], &[0.5]).unwrap();
        assert_eq!((gs.best_c, gs.best_gamma), (2.0, 0.5));
        assert_eq!(gs.surface.len(), 1);
    }

    #[test]
    fn grid_search_is_deterministic_and_beats_extreme_widths() {
        let (x, labels, ids) = separable_cohort(30, 6);
        let gammas = [1e-6, 0.01, 0.1, 1.0, 1e4];
        let a = grid_search(&x, &labels, &ids, &[0.5, 4.0], &gammas).unwrap();
        let b = grid_search(&x, &labels, &ids, &[0.5, 4.0], &gammas).unwrap();
        let losses = |g: &GridSearch| g.surface.iter().map(|p| p.report.balanced_loss).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
        let best = a.best().report.balanced_loss;
        for p in &a.surface {
            if p.gamma == 1e-6 || p.gamma == 1e4 {
                assert!(best <= p.report.balanced_loss);
            }
        }
        assert!(best <= 0.1);
    }
}

//! Derivative-free Nelder-Mead minimiser used for the numeric likelihood fits.

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Converged once the spread of objective values across the simplex, and
    /// the improvement from a restart, both fall below this.
    pub f_tolerance: f64,
    pub max_restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_iterations: 20_000, f_tolerance: 1e-8, max_restarts: 4 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0` with an initial simplex built from per-coordinate
/// `steps`. Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(f: F, x0: &[f64], steps: &[f64], options: &SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut total_iterations = 0;
    let mut restarts = 0;
    loop {
        let run = single_run(&eval, &best_x, steps, options, options.max_iterations - total_iterations);
        total_iterations += run.iterations;
        let improvement = best_f - run.value;
        if run.value <= best_f {
            best_x = run.x;
            best_f = run.value;
        }
        if !run.converged {
            return Minimum { x: best_x, value: best_f, iterations: total_iterations, converged: false };
        }
        // A collapsed simplex can stall away from the optimum, so restart from
        // the incumbent until a restart no longer helps.
        if improvement.is_finite() && improvement < options.f_tolerance && restarts > 0 {
            return Minimum { x: best_x, value: best_f, iterations: total_iterations, converged: true };
        }
        restarts += 1;
        if restarts > options.max_restarts {
            return Minimum {
                x: best_x,
                value: best_f,
                iterations: total_iterations,
                converged: improvement < options.f_tolerance.max(1e-6),
            };
        }
    }
}

fn single_run<F>(
    eval: &F,
    x0: &[f64],
    steps: &[f64],
    options: &SimplexOptions,
    budget: usize,
) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    loop {
        // order: best first
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if spread.is_finite() && spread < options.f_tolerance {
            return Minimum { x: simplex[0].clone(), value: values[0], iterations, converged: true };
        }
        if iterations >= budget {
            return Minimum { x: simplex[0].clone(), value: values[0], iterations, converged: false };
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let reflected = along(1.0);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = along(2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < values[n] {
            let c = along(0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = best.iter().zip(&simplex[i]).map(|(b, v)| b + 0.5 * (v - b)).collect();
            values[i] = eval(&simplex[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions { f_tolerance: 1e-14, ..Default::default() };
        let m = minimize(rosen, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn treats_nan_as_infeasible() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let m = minimize(f, &[0.5], &[1.0], &SimplexOptions::default());
        assert!((m.x[0] - 2.0).abs() < 1e-3);
    }
}

//! Maximum-likelihood fitting and BIC family selection.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::simplex::{minimize, SimplexOptions};
use super::{gev_log_pdf, gpd_log_pdf, DwellDistribution, Family};
use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 5;
pub const MIN_BIC_SAMPLES: usize = 10;

/// Log-likelihood charged per sample outside the support during numeric fits.
const OUT_OF_SUPPORT_PENALTY: f64 = -1e9;
const SIGMA_BOUNDS: (f64, f64) = (1e-6, 1e6);
/// The likelihood is unbounded for shapes below -1, so that is the lower bound.
const SHAPE_BOUNDS: (f64, f64) = (-1.0, 5.0);
const BIC_TIE: f64 = 1e-9;

/// Fits `family` to strictly positive samples by maximum likelihood.
///
/// Exponential, inverse Gaussian and lognormal use closed forms; GEV, GPD and
/// Weibull maximise the log-likelihood with Nelder-Mead from a moment-based
/// starting point. Samples are sorted first so the result does not depend on
/// their order.
pub fn fit_mle(family: Family, samples: &[f64]) -> Result<DwellDistribution> {
    let xs = validated_sorted(samples, MIN_FIT_SAMPLES)?;
    let mut dist = match family {
        Family::Exponential => DwellDistribution::exponential(mean(&xs))?,
        Family::InverseGaussian => {
            let mu = mean(&xs);
            let s: f64 = xs.iter().map(|x| 1.0 / x - 1.0 / mu).sum();
            DwellDistribution::inverse_gaussian(mu, xs.len() as f64 / s)?
        }
        Family::Lognormal => {
            let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let mu = mean(&logs);
            let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / logs.len() as f64;
            if var <= 0.0 {
                return Err(Error::ZeroVariance);
            }
            DwellDistribution::lognormal(mu, var.sqrt())?
        }
        Family::Gev | Family::Gpd | Family::Weibull => numeric_fit(family, &xs)?,
    };
    dist.n_fit = Some(xs.len());
    dist.log_likelihood_at_fit = Some(dist.log_likelihood(&xs));
    Ok(dist)
}

fn validated_sorted(samples: &[f64], min_n: usize) -> Result<Vec<f64>> {
    if samples.len() < min_n {
        return Err(Error::InsufficientData(format!(
            "need at least {min_n} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidInput("dwell samples must be positive and finite".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs[0] == xs[xs.len() - 1] {
        return Err(Error::ZeroVariance);
    }
    Ok(xs)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Moment-type starting point for the numeric fits, in the parameter order of
/// [`Family::param_names`]. `samples` must be sorted ascending.
///
/// The GEV uses probability-weighted (L-)moments, which exist for the heavy
/// shapes seen in dwell data where ordinary variance does not.
pub fn moment_initialization(family: Family, samples: &[f64]) -> Option<Vec<f64>> {
    let xs = samples;
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let m = mean(xs);
    match family {
        Family::Exponential => Some(vec![m]),
        Family::InverseGaussian => Some(vec![m, m.powi(3) / variance(xs)]),
        Family::Lognormal => {
            let s2 = (1.0 + variance(xs) / (m * m)).ln();
            Some(vec![m.ln() - 0.5 * s2, s2.sqrt()])
        }
        Family::Gpd => {
            let k = (0.5 * (1.0 - m * m / variance(xs))).clamp(-0.45, 0.45);
            let mut sigma = m * (1.0 - k);
            let max = xs[n - 1];
            if k < 0.0 {
                sigma = sigma.max(-k * max * 1.01);
            }
            Some(vec![k, sigma])
        }
        Family::Gev => {
            let nf = n as f64;
            let (mut b1, mut b2) = (0.0, 0.0);
            for (i, x) in xs.iter().enumerate() {
                let i = i as f64;
                b1 += i / (nf - 1.0) * x;
                b2 += i * (i - 1.0) / ((nf - 1.0) * (nf - 2.0)) * x;
            }
            let (b0, b1, b2) = (m, b1 / nf, b2 / nf);
            let l1 = b0;
            let l2 = 2.0 * b1 - b0;
            let l3 = 6.0 * b2 - 6.0 * b1 + b0;
            if l2 <= 0.0 {
                return None;
            }
            let t3 = l3 / l2;
            let c = 2.0 / (3.0 + t3) - std::f64::consts::LN_2 / 3f64.ln();
            // Hosking's kappa has the opposite sign to k here.
            let kappa = (7.8590 * c + 2.9554 * c * c).clamp(-0.9, 0.9);
            let kappa = if kappa.abs() < 1e-6 { 1e-6 } else { kappa };
            let g = gamma(1.0 + kappa);
            let mut sigma = l2 * kappa / ((1.0 - 2f64.powf(-kappa)) * g);
            let mu = l1 - sigma * (1.0 - g) / kappa;
            let k = -kappa;
            // move the starting point inside the support
            if k > 0.0 {
                sigma = sigma.max(k * (mu - xs[0]) * 1.05);
            } else {
                sigma = sigma.max(-k * (xs[n - 1] - mu) * 1.05);
            }
            Some(vec![k, sigma, mu])
        }
        Family::Weibull => {
            let cv = variance(xs).sqrt() / m;
            let shape = cv.powf(-1.086).clamp(0.05, 50.0);
            Some(vec![shape, m / gamma(1.0 + 1.0 / shape)])
        }
    }
}

fn penalized_log_likelihood(family: Family, params: &[f64], xs: &[f64]) -> f64 {
    let term = |lp: f64| if lp.is_finite() { lp } else { OUT_OF_SUPPORT_PENALTY };
    match family {
        Family::Gev => xs.iter().map(|&x| term(gev_log_pdf(x, params[0], params[1], params[2]))).sum(),
        Family::Gpd => xs.iter().map(|&x| term(gpd_log_pdf(x, params[0], params[1]))).sum(),
        Family::Weibull => {
            let (shape, scale) = (params[0], params[1]);
            let (ls, lc) = (shape.ln(), scale.ln());
            xs.iter()
                .map(|&x| {
                    let lz = x.ln() - lc;
                    ls - lc + (shape - 1.0) * lz - (shape * lz).exp()
                })
                .sum()
        }
        _ => unreachable!("closed-form family"),
    }
}

fn numeric_fit(family: Family, xs: &[f64]) -> Result<DwellDistribution> {
    let init = moment_initialization(family, xs)
        .ok_or_else(|| Error::InsufficientData(format!("cannot initialise {family} fit")))?;

    // Optimise over log-scale parameters; shapes are bounded.
    let to_natural = |z: &[f64]| -> Option<Vec<f64>> {
        match family {
            Family::Gev | Family::Gpd => {
                let sigma = z[1].exp();
                if z[0] < SHAPE_BOUNDS.0 || z[0] > SHAPE_BOUNDS.1 {
                    return None;
                }
                if sigma < SIGMA_BOUNDS.0 || sigma > SIGMA_BOUNDS.1 {
                    return None;
                }
                let mut v = vec![z[0], sigma];
                v.extend_from_slice(&z[2..]);
                Some(v)
            }
            Family::Weibull => Some(vec![z[0].exp(), z[1].exp()]),
            _ => unreachable!(),
        }
    };
    let z0: Vec<f64> = match family {
        Family::Gev | Family::Gpd => {
            let mut z = vec![init[0], init[1].ln()];
            z.extend_from_slice(&init[2..]);
            z
        }
        Family::Weibull => vec![init[0].ln(), init[1].ln()],
        _ => unreachable!(),
    };
    let location_scale = mean(xs).abs().max(1e-3);
    let steps: Vec<f64> = match family {
        Family::Gev => vec![0.1, 0.2, 0.1 * location_scale],
        Family::Gpd => vec![0.1, 0.2],
        _ => vec![0.2, 0.2],
    };
    let objective = |z: &[f64]| match to_natural(z) {
        Some(p) => -penalized_log_likelihood(family, &p, xs),
        None => f64::INFINITY,
    };
    let options = SimplexOptions::default();
    let found = minimize(objective, &z0, &steps, &options);
    let params = to_natural(&found.x).unwrap_or(init);
    if !found.converged {
        return Err(Error::NonConvergence {
            family,
            iterations: found.iterations,
            best_log_likelihood: -found.value,
            best_params: params,
        });
    }
    DwellDistribution::new(family, &params)
}

/// One row of the BIC table. `bic` and `log_likelihood` are absent when the
/// family failed to fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicEntry {
    pub family: Family,
    pub bic: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub error: Option<String>,
}

/// Fits every candidate and returns the minimiser of
/// `BIC = k ln(n) - 2 ln L` together with the full table. Differences below
/// 1e-9 are ties and go to the family with fewer parameters.
pub fn select_by_bic(
    samples: &[f64],
    candidates: &[Family],
) -> Result<(DwellDistribution, Vec<BicEntry>)> {
    let xs = validated_sorted(samples, MIN_BIC_SAMPLES)?;
    let ln_n = (xs.len() as f64).ln();
    let mut table = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, DwellDistribution)> = None;
    for &family in candidates {
        match fit_mle(family, &xs) {
            Ok(d) => {
                let ll = d.log_likelihood_at_fit.unwrap_or(f64::NEG_INFINITY);
                let bic = family.n_params() as f64 * ln_n - 2.0 * ll;
                table.push(BicEntry { family, bic: Some(bic), log_likelihood: Some(ll), error: None });
                if !bic.is_finite() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((b, incumbent)) => {
                        bic < b - BIC_TIE
                            || ((bic - b).abs() <= BIC_TIE
                                && family.n_params() < incumbent.family().n_params())
                    }
                };
                if better {
                    best = Some((bic, d));
                }
            }
            Err(e) => table.push(BicEntry {
                family,
                bic: None,
                log_likelihood: None,
                error: Some(e.to_string()),
            }),
        }
    }
    best.map(|(_, d)| (d, table)).ok_or(Error::AllFitsFailed)
}

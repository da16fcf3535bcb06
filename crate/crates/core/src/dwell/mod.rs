//! Parametric sojourn-time distributions.
//!
//! Shape conventions follow the usual extreme-value parameterisation: a GEV
//! with `k > 0` is bounded below, a GPD (threshold 0) with `k < 0` has bounded
//! support `[0, -sigma/k]`.

mod fit;
pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub use fit::{fit_mle, moment_initialization, select_by_bic, BicEntry, MIN_BIC_SAMPLES, MIN_FIT_SAMPLES};

/// Below this |k| the GEV and GPD are evaluated in their `k = 0` limits.
const SHAPE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exponential,
    Gev,
    Gpd,
    InverseGaussian,
    Weibull,
    Lognormal,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Exponential,
        Family::Gev,
        Family::Gpd,
        Family::InverseGaussian,
        Family::Weibull,
        Family::Lognormal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Gev => "gev",
            Family::Gpd => "gpd",
            Family::InverseGaussian => "inverse_gaussian",
            Family::Weibull => "weibull",
            Family::Lognormal => "lognormal",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Exponential => &["mu"],
            Family::Gev => &["k", "sigma", "mu"],
            Family::Gpd => &["k", "sigma"],
            Family::InverseGaussian => &["mu", "lambda"],
            Family::Weibull => &["shape", "scale"],
            Family::Lognormal => &["mu", "sigma"],
        }
    }

    /// Number of free parameters (the BIC penalty count).
    pub fn n_params(self) -> usize {
        self.param_names().len()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown distribution family {s:?}")))
    }
}

/// A sojourn-time distribution: family, parameters and, for fitted
/// distributions, the sample size and log-likelihood at the optimum.
///
/// Parameters are validated on construction; evaluation never fails.
#[derive(Clone, Debug, PartialEq)]
pub struct DwellDistribution {
    family: Family,
    params: [f64; 3],
    pub n_fit: Option<usize>,
    pub log_likelihood_at_fit: Option<f64>,
}

impl DwellDistribution {
    /// `params` in the order of [`Family::param_names`].
    pub fn new(family: Family, params: &[f64]) -> Result<Self> {
        let invalid = |message: String| Error::InvalidParameters { family, message };
        if params.len() != family.n_params() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                family.n_params(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(invalid("parameters must be finite".into()));
        }
        let positive: &[usize] = match family {
            Family::Exponential => &[0],
            Family::Gev | Family::Gpd => &[1],
            Family::InverseGaussian | Family::Weibull => &[0, 1],
            Family::Lognormal => &[1],
        };
        for &i in positive {
            if params[i] <= 0.0 {
                return Err(invalid(format!("{} must be positive", family.param_names()[i])));
            }
        }
        let mut p = [0.0; 3];
        p[..params.len()].copy_from_slice(params);
        Ok(Self { family, params: p, n_fit: None, log_likelihood_at_fit: None })
    }

    pub fn exponential(mu: f64) -> Result<Self> {
        Self::new(Family::Exponential, &[mu])
    }

    pub fn gev(k: f64, sigma: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Gev, &[k, sigma, mu])
    }

    pub fn gpd(k: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Gpd, &[k, sigma])
    }

    pub fn inverse_gaussian(mu: f64, lambda: f64) -> Result<Self> {
        Self::new(Family::InverseGaussian, &[mu, lambda])
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        Self::new(Family::Weibull, &[shape, scale])
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::Lognormal, &[mu, sigma])
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params[..self.family.n_params()]
    }

    /// Lower and upper end of the support.
    pub fn support(&self) -> (f64, f64) {
        let p = &self.params;
        match self.family {
            Family::Gev => {
                let (k, sigma, mu) = (p[0], p[1], p[2]);
                if k > SHAPE_EPS {
                    (mu - sigma / k, f64::INFINITY)
                } else if k < -SHAPE_EPS {
                    (f64::NEG_INFINITY, mu - sigma / k)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                }
            }
            Family::Gpd if p[0] < -SHAPE_EPS => (0.0, -p[1] / p[0]),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Exponential => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -p[0].ln() - x / p[0]
                }
            }
            Family::Gev => gev_log_pdf(x, p[0], p[1], p[2]),
            Family::Gpd => gpd_log_pdf(x, p[0], p[1]),
            Family::InverseGaussian => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (mu, lambda) = (p[0], p[1]);
                0.5 * (lambda / (2.0 * std::f64::consts::PI * x.powi(3))).ln()
                    - lambda * (x - mu).powi(2) / (2.0 * mu * mu * x)
            }
            Family::Weibull => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (shape, scale) = (p[0], p[1]);
                let z = x / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * z.ln() - z.powf(shape)
            }
            Family::Lognormal => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (mu, sigma) = (p[0], p[1]);
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / p[0]).exp_m1()
                }
            }
            Family::Gev => {
                let (k, sigma, mu) = (p[0], p[1], p[2]);
                let s = (x - mu) / sigma;
                if k.abs() < SHAPE_EPS {
                    return (-(-s).exp()).exp();
                }
                let z = 1.0 + k * s;
                if z <= 0.0 {
                    return if k > 0.0 { 0.0 } else { 1.0 };
                }
                (-(-z.ln() / k).exp()).exp()
            }
            Family::Gpd => {
                let (k, sigma) = (p[0], p[1]);
                if x <= 0.0 {
                    return 0.0;
                }
                if k.abs() < SHAPE_EPS {
                    return -(-x / sigma).exp_m1();
                }
                let z = 1.0 + k * x / sigma;
                if z <= 0.0 {
                    return 1.0;
                }
                -((-z.ln() / k).exp_m1())
            }
            Family::InverseGaussian => {
                if x <= 0.0 {
                    return 0.0;
                }
                let (mu, lambda) = (p[0], p[1]);
                let r = (lambda / x).sqrt();
                let a = std_normal_cdf(r * (x / mu - 1.0));
                let tail = std_normal_cdf(-r * (x / mu + 1.0));
                let b = if tail > 0.0 { (2.0 * lambda / mu + tail.ln()).exp() } else { 0.0 };
                (a + b).min(1.0)
            }
            Family::Weibull => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / p[1]).powf(p[0])).exp_m1()
                }
            }
            Family::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - p[0]) / p[1])
                }
            }
        }
    }

    /// Mean of the distribution, infinite where it does not exist.
    pub fn mean(&self) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Exponential => p[0],
            Family::Gev => {
                let (k, sigma, mu) = (p[0], p[1], p[2]);
                if k >= 1.0 {
                    f64::INFINITY
                } else if k.abs() < SHAPE_EPS {
                    mu + sigma * 0.577_215_664_901_532_9
                } else {
                    mu + sigma * (gamma(1.0 - k) - 1.0) / k
                }
            }
            Family::Gpd => {
                if p[0] >= 1.0 {
                    f64::INFINITY
                } else {
                    p[1] / (1.0 - p[0])
                }
            }
            Family::InverseGaussian => p[0],
            Family::Weibull => p[1] * gamma(1.0 + 1.0 / p[0]),
            Family::Lognormal => (p[0] + 0.5 * p[1] * p[1]).exp(),
        }
    }

    /// One draw, by inversion except for the inverse Gaussian
    /// (Michael-Schucany-Haas) and lognormal (exp of a normal).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = &self.params;
        // u in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        match self.family {
            Family::Exponential => -p[0] * u.ln(),
            Family::Gev => {
                let (k, sigma, mu) = (p[0], p[1], p[2]);
                let e = -u.ln();
                if k.abs() < SHAPE_EPS {
                    mu - sigma * e.ln()
                } else {
                    mu + sigma * ((-k * e.ln()).exp_m1()) / k
                }
            }
            Family::Gpd => {
                let (k, sigma) = (p[0], p[1]);
                if k.abs() < SHAPE_EPS {
                    -sigma * u.ln()
                } else {
                    sigma * (-k * u.ln()).exp_m1() / k
                }
            }
            Family::InverseGaussian => {
                let (mu, lambda) = (p[0], p[1]);
                let nu: f64 = rng.sample(StandardNormal);
                let y = nu * nu;
                let x = mu + mu * mu * y / (2.0 * lambda)
                    - mu / (2.0 * lambda) * (4.0 * mu * lambda * y + mu * mu * y * y).sqrt();
                if rng.random::<f64>() <= mu / (mu + x) {
                    x
                } else {
                    mu * mu / x
                }
            }
            Family::Weibull => p[1] * (-u.ln()).powf(1.0 / p[0]),
            Family::Lognormal => {
                let z: f64 = rng.sample(StandardNormal);
                (p[0] + p[1] * z).exp()
            }
        }
    }

    /// Sum of `log_pdf` over `samples`.
    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        samples.iter().map(|&x| self.log_pdf(x)).sum()
    }
}

impl fmt::Display for DwellDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, (name, v)) in self.family.param_names().iter().zip(self.params()).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={v:.4}")?;
        }
        write!(f, ")")
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn gev_log_pdf(x: f64, k: f64, sigma: f64, mu: f64) -> f64 {
    let s = (x - mu) / sigma;
    if k.abs() < SHAPE_EPS {
        return -sigma.ln() - s - (-s).exp();
    }
    let z = 1.0 + k * s;
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let log_z = z.ln();
    -sigma.ln() - (1.0 + 1.0 / k) * log_z - (-log_z / k).exp()
}

pub(crate) fn gpd_log_pdf(x: f64, k: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if k.abs() < SHAPE_EPS {
        return -sigma.ln() - x / sigma;
    }
    let z = 1.0 + k * x / sigma;
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -sigma.ln() - (1.0 + 1.0 / k) * z.ln()
}

#[derive(Serialize, Deserialize)]
struct DwellRecord {
    family: Family,
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_fit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log_likelihood: Option<f64>,
}

impl Serialize for DwellDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DwellRecord {
            family: self.family,
            params: self
                .family
                .param_names()
                .iter()
                .zip(self.params())
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
            n_fit: self.n_fit,
            log_likelihood: self.log_likelihood_at_fit,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DwellDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = DwellRecord::deserialize(deserializer)?;
        let mut values = Vec::with_capacity(3);
        for name in rec.family.param_names() {
            let v = rec
                .params
                .get(*name)
                .ok_or_else(|| D::Error::custom(format!("{} is missing parameter {name}", rec.family)))?;
            values.push(*v);
        }
        if rec.params.len() != values.len() {
            return Err(D::Error::custom(format!(
                "{} takes parameters {:?}",
                rec.family,
                rec.family.param_names()
            )));
        }
        let mut d = DwellDistribution::new(rec.family, &values).map_err(D::Error::custom)?;
        d.n_fit = rec.n_fit;
        d.log_likelihood_at_fit = rec.log_likelihood;
        Ok(d)
    }
}

//! Closed-form laws for the continuous-time Kalman filter run with wrong
//! parameters, and Monte Carlo cross-checks for every one of them.
//!
//! Data follow the model under `theta* = (lambda*, sigma*)` while the agent
//! filters with beliefs `theta = (lambda, sigma)` through
//! `d mu_hat = -lambda beta mu_hat dt + lambda (beta - 1) dS/S`. Everything
//! here is driven by the two dimensionless factors `beta = beta(theta,
//! sigma_s)` and `beta* = beta(theta*, sigma_s)`:
//!
//! * the filter's variance at finite `t` and its stationary limit,
//! * the stationary variance of the residual `mu_hat - mu*`,
//! * the stationary conditional law of the true trend given the estimate,
//! * and the probability of a positive trend given a positive estimate,
//!   always above one half because filter and trend stay correlated.
//!
//! The transient variance expression has a removable singularity at
//! `lambda beta = lambda*`; inside a narrow guard band around it the agent
//! rate is nudged by a relative 1e-6 and the expression evaluated there,
//! which stays far below every tolerance used against these values.
//! [`residual_mc_check`] and [`filter_mc_check`] simulate the system
//! directly and bound each closed form within its Monte Carlo standard
//! error.

use rayon::prelude::*;

use crate::error::Error;
use crate::kalman::{beta, continuous_filter_step};
use crate::model::{path_streams, GaussianLaw, MarketParams, TrendParams};
use crate::Result;

/// True dynamics, the agent's beliefs, and the shared spot volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisspecConfig {
    pub theta_star: TrendParams,
    pub theta: TrendParams,
    pub sigma_s: f64,
}

impl MisspecConfig {
    pub fn new(theta_star: TrendParams, theta: TrendParams, sigma_s: f64) -> Result<Self> {
        if !sigma_s.is_finite() || sigma_s <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma_s",
                value: sigma_s,
                constraint: "must be finite and > 0",
            });
        }
        Ok(Self {
            theta_star,
            theta,
            sigma_s,
        })
    }

    /// Agent filtering with the true parameters.
    pub fn well_specified(theta_star: TrendParams, sigma_s: f64) -> Result<Self> {
        Self::new(theta_star, theta_star, sigma_s)
    }

    /// `beta` of the agent's beliefs.
    pub fn beta(&self) -> f64 {
        beta(&self.theta, self.sigma_s)
    }

    /// `beta` of the true dynamics.
    pub fn beta_star(&self) -> f64 {
        beta(&self.theta_star, self.sigma_s)
    }

    /// Moves configurations inside the guard band
    /// `|lambda beta - lambda*| < 1e-9 lambda*` off the removable
    /// singularity by nudging the agent rate.
    fn desingularized(&self) -> Self {
        let decay = self.theta.lambda_mu * self.beta();
        if (decay - self.theta_star.lambda_mu).abs() < 1e-9 * self.theta_star.lambda_mu {
            let mut shifted = *self;
            shifted.theta.lambda_mu *= 1.0 + 1e-6;
            shifted
        } else {
            *self
        }
    }
}

/// Variance of the mis-specified filter at time `t` from `mu_hat_0 = 0`.
pub fn filter_variance_t(cfg: &MisspecConfig, t: f64) -> f64 {
    let cfg = cfg.desingularized();
    let lam = cfg.theta.lambda_mu;
    let b = cfg.beta();
    let lam_star = cfg.theta_star.lambda_mu;
    let sig_star = cfg.theta_star.sigma_mu;
    let decay = lam * b;

    let trend_gain = lam * lam * (b - 1.0).powi(2) * sig_star * sig_star
        / (lam_star * (decay - lam_star));
    let e_mix = (-(decay + lam_star) * t).exp();
    let e_trend = (-2.0 * lam_star * t).exp();
    let e_filter = (-2.0 * decay * t).exp();
    let bracket = (1.0 - e_mix) / (decay + lam_star)
        + (2.0 * e_mix - e_trend - e_filter) / (decay - lam_star)
        + (e_filter - 1.0) / (2.0 * decay);
    let noise = lam * (b - 1.0).powi(2) * cfg.sigma_s * cfg.sigma_s / (2.0 * b)
        * (1.0 - e_filter);
    trend_gain * bracket + noise
}

/// Stationary limit of [`filter_variance_t`]; the removable singularity
/// cancels here, so the closed form is direct.
pub fn filter_variance_asym(cfg: &MisspecConfig) -> f64 {
    let lam = cfg.theta.lambda_mu;
    let b = cfg.beta();
    let lam_star = cfg.theta_star.lambda_mu;
    let sig_star = cfg.theta_star.sigma_mu;
    lam * (b - 1.0).powi(2) / (2.0 * b)
        * (sig_star * sig_star / (lam_star * (lam * b + lam_star)) + cfg.sigma_s * cfg.sigma_s)
}

/// Standard deviation companion of [`filter_variance_asym`].
pub fn filter_std_asym(cfg: &MisspecConfig) -> f64 {
    filter_variance_asym(cfg).sqrt()
}

/// Stationary variance of the residual `mu_hat - mu*`:
/// `sigma_s^2/(2 beta) [lambda (beta-1)^2
///   + lambda* (beta*^2 - 1) (lambda* beta + lambda) / (lambda beta + lambda*)]`.
pub fn residual_variance_asym(cfg: &MisspecConfig) -> f64 {
    let lam = cfg.theta.lambda_mu;
    let lam_star = cfg.theta_star.lambda_mu;
    let b = cfg.beta();
    let b_star = cfg.beta_star();
    cfg.sigma_s * cfg.sigma_s / (2.0 * b)
        * (lam * (b - 1.0).powi(2)
            + lam_star * (b_star * b_star - 1.0) * (lam_star * b + lam) / (lam * b + lam_star))
}

/// Standard deviation companion of [`residual_variance_asym`].
pub fn residual_std_asym(cfg: &MisspecConfig) -> f64 {
    residual_variance_asym(cfg).sqrt()
}

/// Stationary residual variance of the well-specified filter relative to the
/// trend variance: `2 / (1 + sqrt(1 + sigma*^2 / (lambda*^2 sigma_s^2)))`.
pub fn residual_std_ratio_wellspec(theta_star: &TrendParams, sigma_s: f64) -> f64 {
    2.0 / (1.0 + beta(theta_star, sigma_s))
}

/// Stationary law of the true trend given a filter reading `x`. The mean is
/// linear in `x`; the variance does not depend on it. Well-specified inputs
/// collapse to `N(x, 2 Var[mu*] / (beta* + 1))`.
pub fn conditional_trend_law(cfg: &MisspecConfig, x: f64) -> GaussianLaw {
    let lam = cfg.theta.lambda_mu;
    let lam_star = cfg.theta_star.lambda_mu;
    let b = cfg.beta();
    let bs2 = cfg.beta_star().powi(2);
    let mean_slope =
        lam_star * b * (bs2 - 1.0) / ((b - 1.0) * (lam * b + lam_star * bs2));
    let trend_var = cfg.theta_star.stationary_var();
    let variance = trend_var
        * (1.0 - lam_star * lam * b * (bs2 - 1.0) / ((lam_star + lam * b) * (lam * b + lam_star * bs2)));
    GaussianLaw {
        mean: mean_slope * x,
        variance,
    }
}

/// `P(mu* > 0 | mu_hat = x)` in the stationary regime.
pub fn positive_trend_prob(cfg: &MisspecConfig, x: f64) -> f64 {
    let law = conditional_trend_law(cfg, x);
    1.0 - normal_cdf(-law.mean / law.variance.sqrt())
}

/// Terminal draws of the Euler-stepped mis-specified filter and of the true
/// trend, one pair per path.
#[derive(Debug, Clone)]
pub struct McSample {
    pub filter: Vec<f64>,
    pub trend: Vec<f64>,
    /// Set when the horizon is too short for the stationary formulas
    /// (`exp(-2 min-rate horizon) > 0.01`).
    pub short_horizon: bool,
}

/// Sample variance of a Monte Carlo statistic with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McCheck {
    pub variance: f64,
    /// Standard error of the variance estimate, `variance * sqrt(2/(n-1))`.
    pub std_error: f64,
    pub short_horizon: bool,
}

impl McCheck {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Simulates `n_paths` trajectories under `theta_star` at step `delta`, runs
/// the Euler-discretized mis-specified filter under `theta`, and returns the
/// terminal `(filter, trend)` draws. Paths derive their noise streams from
/// `(seed, path_index)`, so the result is independent of scheduling.
pub fn mc_terminal_sample(
    cfg: &MisspecConfig,
    delta: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McSample> {
    if n_paths < 100 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            constraint: "must be >= 100",
        });
    }
    let market = MarketParams::new(cfg.theta_star, cfg.sigma_s, delta)?;
    let steps = (horizon / delta).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            constraint: "must cover at least one step",
        });
    }
    let min_rate = (cfg.theta.lambda_mu * cfg.beta()).min(cfg.theta_star.lambda_mu);
    let short_horizon = (-2.0 * min_rate * horizon).exp() > 0.01;

    let phi = market.phi();
    let trend_sd = market.trend_noise_var().sqrt();
    let obs_sd = market.obs_noise_var().sqrt();
    let theta = cfg.theta;
    let sigma_s = cfg.sigma_s;

    let pairs: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let (mut trend_noise, mut obs_noise) = path_streams(seed, path);
            let mut trend = 0.0;
            let mut filter = 0.0;
            for _ in 0..steps {
                trend = phi * trend + trend_sd * trend_noise.next_gaussian();
                let y = trend + obs_sd * obs_noise.next_gaussian();
                filter = continuous_filter_step(filter, y * delta, delta, &theta, sigma_s);
            }
            (filter, trend)
        })
        .collect();

    Ok(McSample {
        filter: pairs.iter().map(|p| p.0).collect(),
        trend: pairs.iter().map(|p| p.1).collect(),
        short_horizon,
    })
}

/// Monte Carlo check of the stationary residual variance.
pub fn residual_mc_check(
    cfg: &MisspecConfig,
    delta: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McCheck> {
    let sample = mc_terminal_sample(cfg, delta, horizon, n_paths, seed)?;
    let residuals: Vec<f64> = sample
        .filter
        .iter()
        .zip(&sample.trend)
        .map(|(f, t)| f - t)
        .collect();
    Ok(variance_check(&residuals, sample.short_horizon))
}

/// Monte Carlo check of the stationary filter variance.
pub fn filter_mc_check(
    cfg: &MisspecConfig,
    delta: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McCheck> {
    let sample = mc_terminal_sample(cfg, delta, horizon, n_paths, seed)?;
    Ok(variance_check(&sample.filter, sample.short_horizon))
}

fn variance_check(values: &[f64], short_horizon: bool) -> McCheck {
    let variance = sample_variance(values);
    McCheck {
        variance,
        std_error: variance * (2.0 / (values.len() as f64 - 1.0)).sqrt(),
        short_horizon,
    }
}

pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Standard normal CDF with absolute error below 1e-12.
///
/// Built on the error function: a positive-term power series below `x = 3`
/// and the classical continued fraction for `erfc` above it. The two halves
/// are wired so that `normal_cdf(z) + normal_cdf(-z)` is exactly one.
pub fn normal_cdf(z: f64) -> f64 {
    let u = z / std::f64::consts::SQRT_2;
    if z >= 0.0 {
        1.0 - 0.5 * erfc_nonneg(u)
    } else {
        0.5 * erfc_nonneg(-u)
    }
}

/// `erfc(x)` for `x >= 0`.
fn erfc_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// `erf(x)` by the confluent series
/// `(2/sqrt(pi)) x e^{-x^2} sum_n (2x^2)^n / (1*3*...*(2n+1))`;
/// every term is positive, so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut odd = 1.0;
    for _ in 0..200 {
        odd += 2.0;
        term *= two_x2 / odd;
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    FRAC_2_SQRT_PI * x * (-x * x).exp() * sum
}

/// `erfc(x)` for large `x` by the continued fraction
/// `e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`,
/// evaluated with the modified Lentz scheme.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..200 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

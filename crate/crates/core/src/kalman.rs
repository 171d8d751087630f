//! Discrete Kalman recursions for the scalar AR(1)-plus-noise system, their
//! steady state in closed form, and the continuous-time steady-state filter.
//!
//! One filter step, with `phi = exp(-lambda_mu delta)`, `q` the trend
//! innovation variance and `r = sigma_s^2 / delta`:
//!
//! ```text
//! gamma_pred = phi^2 gamma + q
//! gain       = gamma_pred / (gamma_pred + r)
//! mu_hat'    = phi mu_hat + gain (y - phi mu_hat)
//! gamma'     = (1 - gain) gamma_pred
//! ```
//!
//! The steady-state error variance and gain have closed forms, as does their
//! continuous-time limit: the steady-state filter solves
//! `d mu_hat = -lambda beta mu_hat dt + lambda (beta - 1) dS/S` with
//! `beta = sqrt(1 + sigma_mu^2 / (lambda_mu^2 sigma_s^2))`.

use crate::error::Error;
use crate::model::{GaussianLaw, MarketParams, TrendParams};
use crate::Result;

/// A-posteriori filter state after one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    /// Trend estimate (1/year).
    pub mu_hat: f64,
    /// Estimation error variance, nonnegative.
    pub gamma: f64,
}

impl KalmanState {
    /// Known zero start: `mu_0 = 0` with no uncertainty.
    pub fn origin() -> Self {
        Self {
            mu_hat: 0.0,
            gamma: 0.0,
        }
    }

    /// Stationary prior start: zero estimate with the trend's stationary
    /// variance as initial uncertainty.
    pub fn stationary(params: &MarketParams) -> Self {
        Self {
            mu_hat: 0.0,
            gamma: params.trend.stationary_var(),
        }
    }
}

/// Stationary limit of the filter, plus the continuous-time quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Stationary a-posteriori error variance.
    pub gamma_inf: f64,
    /// Stationary gain, in `(0, 1)`.
    pub k_inf: f64,
    /// Dimensionless decay factor of the continuous filter, `> 1`.
    pub beta: f64,
    /// Stationary error variance of the continuous-time filter.
    pub p_inf: f64,
}

/// `beta = sqrt(1 + sigma_mu^2 / (lambda_mu^2 sigma_s^2))`.
pub fn beta(trend: &TrendParams, sigma_s: f64) -> f64 {
    let lam = trend.lambda_mu;
    (1.0 + trend.sigma_mu * trend.sigma_mu / (lam * lam * sigma_s * sigma_s)).sqrt()
}

/// One predict-update cycle. Returns the new state together with the one-step
/// prediction law `N(phi mu_hat, gamma_pred + r)` of the incoming observation,
/// which is what the prediction-error likelihood accumulates.
pub fn kalman_step(
    state: KalmanState,
    y: f64,
    params: &MarketParams,
) -> (KalmanState, GaussianLaw) {
    let phi = params.phi();
    let q = params.trend_noise_var();
    let r = params.obs_noise_var();

    let gamma_pred = phi * phi * state.gamma + q;
    let prediction = GaussianLaw {
        mean: phi * state.mu_hat,
        variance: gamma_pred + r,
    };
    let gain = gamma_pred / (gamma_pred + r);
    let next = KalmanState {
        mu_hat: prediction.mean + gain * (y - prediction.mean),
        gamma: (1.0 - gain) * gamma_pred,
    };
    (next, prediction)
}

/// Full filter pass over a return series.
#[derive(Debug, Clone)]
pub struct KalmanRun {
    /// A-posteriori state after each observation; same length as the input.
    pub states: Vec<KalmanState>,
    /// Accumulated log-likelihood of the series under the model.
    pub log_likelihood: f64,
}

/// Folds [`kalman_step`] over the series, accumulating the prediction-error
/// log-likelihood.
pub fn kalman_filter(y: &[f64], params: &MarketParams, init: KalmanState) -> Result<KalmanRun> {
    if y.is_empty() {
        return Err(Error::EmptySeries {
            context: "kalman_filter needs a non-empty series",
        });
    }
    let mut states = Vec::with_capacity(y.len());
    let mut log_likelihood = 0.0;
    let mut state = init;
    for &obs in y {
        let (next, prediction) = kalman_step(state, obs, params);
        log_likelihood += prediction.log_density(obs);
        states.push(next);
        state = next;
    }
    Ok(KalmanRun {
        states,
        log_likelihood,
    })
}

/// Closed-form steady state of the error-variance recursion.
///
/// `gamma_inf = (g - f) / (2 exp(-2 lambda delta))` where
/// `f = (sigma_s^2/delta + sigma_mu^2/(2 lambda)) (1 - exp(-2 lambda delta))` and
/// `g = sqrt(f^2 + 2 sigma_s^2 sigma_mu^2 / (lambda delta) * (exp(-2 lambda delta) - exp(-4 lambda delta)))`.
pub fn steady_state(params: &MarketParams) -> SteadyState {
    let lam = params.trend.lambda_mu;
    let sig = params.trend.sigma_mu;
    let sigs = params.sigma_s;
    let delta = params.delta;

    let e2 = (-2.0 * lam * delta).exp();
    let e4 = (-4.0 * lam * delta).exp();
    let f = (sigs * sigs / delta + sig * sig / (2.0 * lam)) * (1.0 - e2);
    let g = (f * f + 2.0 * sigs * sigs * sig * sig / (lam * delta) * (e2 - e4)).sqrt();
    let gamma_inf = (g - f) / (2.0 * e2);

    let gamma_pred = params.phi().powi(2) * gamma_inf + params.trend_noise_var();
    let k_inf = gamma_pred / (gamma_pred + params.obs_noise_var());
    let b = beta(&params.trend, sigs);
    SteadyState {
        gamma_inf,
        k_inf,
        beta: b,
        p_inf: sigs * sigs * lam * (b - 1.0),
    }
}

/// One iteration of the a-posteriori error-variance recursion.
pub fn gamma_recursion(gamma: f64, params: &MarketParams) -> f64 {
    let gamma_pred = params.phi().powi(2) * gamma + params.trend_noise_var();
    let gain = gamma_pred / (gamma_pred + params.obs_noise_var());
    (1.0 - gain) * gamma_pred
}

/// Steady-state filter written as a corrected exponential average:
/// `mu_hat[n+1] = exp(-lambda delta) (1 - k_inf) mu_hat[n] + k_inf y[n+1]`
/// from `mu_hat[0] = 0`. Output `k` holds the estimate after `y[k]`.
pub fn ewma_filter(y: &[f64], params: &MarketParams) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptySeries {
            context: "ewma_filter needs a non-empty series",
        });
    }
    Ok(ewma_filter_with_gain(y, params.phi(), steady_state(params).k_inf))
}

/// The same exponential recursion with an explicit gain, for comparing the
/// steady-state gain against perturbed ones.
pub fn ewma_filter_with_gain(y: &[f64], phi: f64, gain: f64) -> Vec<f64> {
    let decay = phi * (1.0 - gain);
    let mut out = Vec::with_capacity(y.len());
    let mut estimate = 0.0;
    for &obs in y {
        estimate = decay * estimate + gain * obs;
        out.push(estimate);
    }
    out
}

/// Euler step of the continuous-time steady-state filter
/// `d mu_hat = -lambda beta mu_hat dt + lambda (beta - 1) dS/S`,
/// where `dy` is the return increment over the step. Running it with a
/// parameter pair different from the data-generating one gives the
/// mis-specified filter studied in [`crate::misspec`].
pub fn continuous_filter_step(
    mu_hat: f64,
    dy: f64,
    dt: f64,
    trend: &TrendParams,
    sigma_s: f64,
) -> f64 {
    let lam = trend.lambda_mu;
    let b = beta(trend, sigma_s);
    mu_hat - lam * b * mu_hat * dt + lam * (b - 1.0) * dy
}

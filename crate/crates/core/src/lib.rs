//! Trend filtering and inference for an asset whose drift is a hidden
//! mean-reverting (Ornstein-Uhlenbeck) process.
//!
//! The observable is the return series of a risky asset; the drift behind it
//! is never observed directly. This crate provides the pieces needed to study
//! how much of that drift can actually be recovered:
//!
//! * [`model`] — model parameters, the OU covariance kernel and exact path
//!   simulation of the hidden trend and of the observed returns.
//! * [`kalman`] — the scalar Kalman recursions for the AR(1)-plus-noise
//!   system, their steady state in closed form, and the continuous-time
//!   steady-state filter.
//! * [`likelihood`] — the exact Gaussian log-likelihood of a return series,
//!   computed three independent ways (dense, recursive inverse/determinant,
//!   prediction-error decomposition).
//! * [`inference`] — spectral density, Fisher information through the
//!   Whittle integral, Cramer-Rao horizon calculators and maximum-likelihood
//!   fitting.
//! * [`misspec`] — closed-form laws for the continuous-time filter run with
//!   wrong parameters: filter variance, residual law, conditional trend law,
//!   trend-sign detection probability, and Monte Carlo cross-checks.
//!
//! ```
//! use outrend::inference::{crb_horizon, ThetaParam};
//! use outrend::kalman::{kalman_filter, KalmanState};
//! use outrend::likelihood::loglik_kalman;
//! use outrend::model::{simulate, MarketParams, TrendParams};
//!
//! # fn main() -> outrend::Result<()> {
//! let params = MarketParams::new(TrendParams::new(1.0, 0.9)?, 0.3, 1.0 / 252.0)?;
//! let path = simulate(&params, 1260, 7)?;
//! let run = kalman_filter(&path.y, &params, KalmanState::origin())?;
//! assert_eq!(run.states.len(), path.y.len());
//! let ll = loglik_kalman(&path.y, &params)?;
//! assert!((ll - run.log_likelihood).abs() < 1e-12);
//! // Years of daily data before an unbiased estimator of lambda_mu can
//! // reach a standard deviation of 0.5: about thirty.
//! let years = crb_horizon(&params, 0.5, ThetaParam::Lambda)?;
//! assert!(years > 25.0 && years < 35.0);
//! # Ok(())
//! # }
//! ```

pub mod error;
pub mod inference;
pub mod kalman;
pub mod likelihood;
pub mod misspec;
pub mod model;

pub use error::Error;
pub use model::{GaussianLaw, MarketParams, PathSample, TrendParams};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

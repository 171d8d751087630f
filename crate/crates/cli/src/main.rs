//! `outrend` — simulation, filtering, likelihood, fitting, Cramer-Rao
//! horizons and mis-specification grids for the hidden-trend return model.
//!
//! Every subcommand is deterministic given its flags (including `--seed`),
//! and grid outputs are sorted by grid coordinates, so files are
//! byte-identical across runs and thread counts.

mod grid;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use grid::TrendGrid;
use io::{fmt15, read_series, write_rows};
use outrend::inference::{crb_horizon, mle_fit, t_test_horizon, ThetaParam};
use outrend::kalman::{kalman_filter, KalmanState};
use outrend::likelihood::{loglik_direct, loglik_kalman, loglik_recursive};
use outrend::misspec::{
    filter_std_asym, positive_trend_prob, residual_mc_check, residual_std_asym,
    residual_variance_asym, MisspecConfig,
};
use outrend::model::{simulate_path, MarketParams, StartCondition, TrendParams};

const DEFAULT_DELTA: f64 = 1.0 / 252.0;

const AFTER_HELP: &str = "\
Grid syntax: --grid lambda=<min>:<max>:<steps>,sigma_mu=<min>:<max>:<steps>
             (prefix an axis with log: for log spacing, e.g. lambda=log:0.1:10:25)

CSV schemas: simulate -> t,mu,y   filter -> t,y,mu_hat,gamma
             crb -> lambda,sigma_mu,T_lambda_x,T_sigma_x
             misspec -> lambda,sigma_mu,residual_std   detect -> lambda,sigma_mu,prob

Grid subcommands fan out across a worker pool; set RAYON_NUM_THREADS to
override the thread count. Output never depends on scheduling.";

#[derive(Parser)]
#[command(name = "outrend", version, about, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the hidden trend and observed returns (CSV: t,mu,y)
    Simulate {
        /// Trend mean-reversion rate (1/year)
        #[arg(long)]
        lambda: f64,
        /// Trend volatility (1/year)
        #[arg(long)]
        sigma_mu: f64,
        /// Spot volatility (1/sqrt(year))
        #[arg(long)]
        sigma_s: f64,
        /// Observation step in years
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Number of observations
        #[arg(long)]
        n: usize,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Draw the initial trend from its stationary law instead of zero
        #[arg(long)]
        stationary_start: bool,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kalman-filter a return series (CSV: t,y,mu_hat,gamma)
    Filter {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        sigma_mu: f64,
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Input CSV with `t` and `y` columns
        #[arg(long = "in")]
        input: PathBuf,
        /// Start from the stationary error variance instead of zero
        #[arg(long)]
        stationary_init: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact Gaussian log-likelihood of a return series
    Loglik {
        /// Which of the three equivalent computations to run
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        sigma_mu: f64,
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Maximum-likelihood fit of (lambda, sigma_mu); sigma_s is known
    Fit {
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Optimizer start for lambda
        #[arg(long, default_value_t = 1.0)]
        init_lambda: f64,
        /// Optimizer start for sigma_mu
        #[arg(long, default_value_t = 0.5)]
        init_sigma_mu: f64,
    },
    /// Observation horizons needed to reach target precisions, over a grid
    Crb {
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Parameter grid (see --help footer for the syntax)
        #[arg(long, value_parser = TrendGrid::parse)]
        grid: TrendGrid,
        /// Target standard deviation on lambda
        #[arg(long)]
        target_lambda: f64,
        /// Target standard deviation on sigma_mu
        #[arg(long)]
        target_sigma_mu: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stationary residual std of the mis-specified filter over an agent grid
    Misspec {
        /// True mean-reversion rate
        #[arg(long)]
        lambda_star: f64,
        /// True trend volatility
        #[arg(long)]
        sigma_mu_star: f64,
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, value_parser = TrendGrid::parse)]
        grid: TrendGrid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability of a positive trend given a positive estimate, over a grid
    Detect {
        /// True mean-reversion rate (fixed while the grid sweeps the agent)
        #[arg(long, required_unless_present = "well_specified", conflicts_with = "well_specified")]
        lambda_star: Option<f64>,
        /// True trend volatility (fixed while the grid sweeps the agent)
        #[arg(long, required_unless_present = "well_specified", conflicts_with = "well_specified")]
        sigma_mu_star: Option<f64>,
        /// Sweep the true parameters instead, with the agent using them
        #[arg(long)]
        well_specified: bool,
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, value_parser = TrendGrid::parse)]
        grid: TrendGrid,
        /// Threshold estimate; defaults to each cell's filter standard deviation
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo check of the stationary residual variance
    McCheck {
        #[arg(long)]
        lambda_star: f64,
        #[arg(long)]
        sigma_mu_star: f64,
        /// Agent's assumed mean-reversion rate
        #[arg(long)]
        lambda: f64,
        /// Agent's assumed trend volatility
        #[arg(long)]
        sigma_mu: f64,
        #[arg(long)]
        sigma_s: f64,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Simulation horizon in years
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        /// Number of Monte Carlo paths
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Years before a constant trend estimate passes a Student t-test
    TTest {
        #[arg(long)]
        sigma_s: f64,
        /// Trend estimate to test (1/year)
        #[arg(long)]
        mu_hat: f64,
        /// Test quantile, e.g. 1.96 for a 5% level
        #[arg(long, default_value_t = 1.96)]
        q_alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Direct,
    Recursive,
    Kalman,
}

impl Method {
    fn tag(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Recursive => "recursive",
            Method::Kalman => "kalman",
        }
    }
}

enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<outrend::Error> for CliError {
    fn from(e: outrend::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

impl From<String> for CliError {
    fn from(m: String) -> Self {
        CliError::Usage(m)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            lambda,
            sigma_mu,
            sigma_s,
            delta,
            n,
            seed,
            stationary_start,
            out,
        } => {
            let params = market(lambda, sigma_mu, sigma_s, delta)?;
            let start = if stationary_start {
                StartCondition::Stationary
            } else {
                StartCondition::Zero
            };
            let path = simulate_path(&params, n, seed, 0, start)?;
            let rows = (0..n).map(|k| {
                format!(
                    "{},{},{}",
                    fmt15((k + 1) as f64 * delta),
                    fmt15(path.mu[k]),
                    fmt15(path.y[k])
                )
            });
            write_rows(out.as_deref(), "t,mu,y", rows)?;
            Ok(())
        }

        Command::Filter {
            lambda,
            sigma_mu,
            sigma_s,
            delta,
            input,
            stationary_init,
            out,
        } => {
            let params = market(lambda, sigma_mu, sigma_s, delta)?;
            let series = read_series(&input)?;
            let init = if stationary_init {
                KalmanState::stationary(&params)
            } else {
                KalmanState::origin()
            };
            let run = kalman_filter(&series.y, &params, init)?;
            let rows = run.states.iter().enumerate().map(|(k, s)| {
                format!(
                    "{},{},{},{}",
                    fmt15(series.t[k]),
                    fmt15(series.y[k]),
                    fmt15(s.mu_hat),
                    fmt15(s.gamma)
                )
            });
            write_rows(out.as_deref(), "t,y,mu_hat,gamma", rows)?;
            Ok(())
        }

        Command::Loglik {
            method,
            lambda,
            sigma_mu,
            sigma_s,
            delta,
            input,
        } => {
            let params = market(lambda, sigma_mu, sigma_s, delta)?;
            let series = read_series(&input)?;
            let value = match method {
                Method::Direct => loglik_direct(&series.y, &params)?,
                Method::Recursive => loglik_recursive(&series.y, &params)?,
                Method::Kalman => loglik_kalman(&series.y, &params)?,
            };
            println!("loglik={} method={}", fmt15(value), method.tag());
            Ok(())
        }

        Command::Fit {
            sigma_s,
            delta,
            input,
            init_lambda,
            init_sigma_mu,
        } => {
            let series = read_series(&input)?;
            let init = TrendParams::new(init_lambda, init_sigma_mu)?;
            let fit = mle_fit(&series.y, sigma_s, delta, &init)?;
            if fit.boundary {
                eprintln!("warning: optimizer reached a parameter bound (degenerate data?)");
            }
            println!("lambda_hat,sigma_mu_hat,loglik,converged");
            println!(
                "{},{},{},{}",
                fmt15(fit.trend.lambda_mu),
                fmt15(fit.trend.sigma_mu),
                fmt15(fit.log_likelihood),
                fit.converged
            );
            Ok(())
        }

        Command::Crb {
            sigma_s,
            delta,
            grid,
            target_lambda,
            target_sigma_mu,
            out,
        } => {
            let rows = grid
                .cells()
                .into_par_iter()
                .map(|(lam, sig)| {
                    let params = market(lam, sig, sigma_s, delta)?;
                    let t_lam = crb_horizon(&params, target_lambda, ThetaParam::Lambda)?;
                    let t_sig = crb_horizon(&params, target_sigma_mu, ThetaParam::SigmaMu)?;
                    Ok(format!(
                        "{},{},{},{}",
                        fmt15(lam),
                        fmt15(sig),
                        fmt15(t_lam),
                        fmt15(t_sig)
                    ))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_rows(out.as_deref(), "lambda,sigma_mu,T_lambda_x,T_sigma_x", rows)?;
            Ok(())
        }

        Command::Misspec {
            lambda_star,
            sigma_mu_star,
            sigma_s,
            grid,
            out,
        } => {
            let theta_star = TrendParams::new(lambda_star, sigma_mu_star)?;
            let rows = grid
                .cells()
                .into_par_iter()
                .map(|(lam, sig)| {
                    let cfg =
                        MisspecConfig::new(theta_star, TrendParams::new(lam, sig)?, sigma_s)?;
                    let std = residual_std_asym(&cfg);
                    Ok(format!("{},{},{}", fmt15(lam), fmt15(sig), fmt15(std)))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_rows(out.as_deref(), "lambda,sigma_mu,residual_std", rows)?;
            Ok(())
        }

        Command::Detect {
            lambda_star,
            sigma_mu_star,
            well_specified,
            sigma_s,
            grid,
            x,
            out,
        } => {
            let theta_star = match (lambda_star, sigma_mu_star) {
                (Some(lam), Some(sig)) => Some(TrendParams::new(lam, sig)?),
                _ => None,
            };
            let rows = grid
                .cells()
                .into_par_iter()
                .map(|(lam, sig)| {
                    let theta = TrendParams::new(lam, sig)?;
                    let cfg = if well_specified {
                        MisspecConfig::well_specified(theta, sigma_s)?
                    } else {
                        MisspecConfig::new(theta_star.unwrap(), theta, sigma_s)?
                    };
                    let threshold = x.unwrap_or_else(|| filter_std_asym(&cfg));
                    let prob = positive_trend_prob(&cfg, threshold);
                    Ok(format!("{},{},{}", fmt15(lam), fmt15(sig), fmt15(prob)))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            write_rows(out.as_deref(), "lambda,sigma_mu,prob", rows)?;
            Ok(())
        }

        Command::McCheck {
            lambda_star,
            sigma_mu_star,
            lambda,
            sigma_mu,
            sigma_s,
            delta,
            horizon,
            paths,
            seed,
        } => {
            let cfg = MisspecConfig::new(
                TrendParams::new(lambda_star, sigma_mu_star)?,
                TrendParams::new(lambda, sigma_mu)?,
                sigma_s,
            )?;
            let check = residual_mc_check(&cfg, delta, horizon, paths, seed)?;
            if check.short_horizon {
                eprintln!("warning: horizon too short for the stationary limit");
            }
            let closed = residual_variance_asym(&cfg);
            println!("mc_variance,mc_std,mc_std_error,closed_variance,closed_std,short_horizon");
            println!(
                "{},{},{},{},{},{}",
                fmt15(check.variance),
                fmt15(check.std()),
                fmt15(check.std_error),
                fmt15(closed),
                fmt15(closed.sqrt()),
                check.short_horizon
            );
            Ok(())
        }

        Command::TTest {
            sigma_s,
            mu_hat,
            q_alpha,
        } => {
            let years = t_test_horizon(sigma_s, mu_hat, q_alpha);
            println!("horizon_years={}", if years.is_finite() {
                fmt15(years)
            } else {
                "inf".to_string()
            });
            Ok(())
        }
    }
}

fn market(lambda: f64, sigma_mu: f64, sigma_s: f64, delta: f64) -> Result<MarketParams, CliError> {
    Ok(MarketParams::new(
        TrendParams::new(lambda, sigma_mu)?,
        sigma_s,
        delta,
    )?)
}

//! Monte Carlo path simulation and payoff estimation.
//!
//! Schemes step the log price with the volatility frozen at the start of
//! each step,
//!
//! ```text
//! log S_{t+dt} = log S_t + (mu - sigma^2/2) dt + sigma (W_{t+dt} - W_t),
//! ```
//!
//! so the discounted spot is a martingale for every risk-neutral
//! configuration, exactly, not just in the dt -> 0 limit. The square-root
//! variance of the Heston scheme is advanced implicitly: solving
//!
//! ```text
//! (1 + kappa dt) y^2 - gamma dB y - (X + (kappa x_bar - gamma^2/2) dt) = 0
//! ```
//!
//! for y = sqrt(X') and squaring keeps the variance path nonnegative at
//! every node. Under the Feller condition the discriminant is provably
//! nonnegative; if a finite-dt tail event still drives it negative the
//! root is floored at zero and the event counted in the diagnostics.
//!
//! Randomness comes from per-path ChaCha8 substreams keyed by
//! (seed, path index), so results are bit-identical across runs and
//! across thread counts.

use crate::analytic::OptionSpec;
use crate::numerics::{mean_and_se, pairwise_sum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// State-dependent volatility for the local-vol scheme: sigma(t, s).
pub type VolFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Scheme {
    /// Exact lognormal transitions (drift = rate - dividend_yield).
    GbmExact { rate: f64, dividend_yield: f64, sigma: f64 },
    /// Log-space Euler-Maruyama for GBM.
    EulerLog { rate: f64, dividend_yield: f64, sigma: f64 },
    /// Log-space Euler with sigma(t, S) frozen per step.
    LocalVolEuler { rate: f64, vol_fn: VolFn },
    /// Exponential-OU stochastic volatility: sigma = e^{X},
    /// dX = kappa (x_bar - X) dt + gamma dB, corr(dW, dB) = rho.
    ExpOu { rate: f64, kappa: f64, x_bar: f64, gamma: f64, rho: f64, x0: f64 },
    /// Heston square-root variance with the implicit step above.
    HestonImplicit { rate: f64, kappa: f64, x_bar: f64, gamma: f64, rho: f64, x0: f64 },
    /// Plain random walk: +-sqrt(T/N) with probability 1/2 each.
    RandomWalk,
}

impl fmt::Debug for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::GbmExact { rate, dividend_yield, sigma } => f
                .debug_struct("GbmExact")
                .field("rate", rate)
                .field("dividend_yield", dividend_yield)
                .field("sigma", sigma)
                .finish(),
            Scheme::EulerLog { rate, dividend_yield, sigma } => f
                .debug_struct("EulerLog")
                .field("rate", rate)
                .field("dividend_yield", dividend_yield)
                .field("sigma", sigma)
                .finish(),
            Scheme::LocalVolEuler { rate, .. } => {
                f.debug_struct("LocalVolEuler").field("rate", rate).finish_non_exhaustive()
            }
            Scheme::ExpOu { rate, kappa, x_bar, gamma, rho, x0 } => f
                .debug_struct("ExpOu")
                .field("rate", rate)
                .field("kappa", kappa)
                .field("x_bar", x_bar)
                .field("gamma", gamma)
                .field("rho", rho)
                .field("x0", x0)
                .finish(),
            Scheme::HestonImplicit { rate, kappa, x_bar, gamma, rho, x0 } => f
                .debug_struct("HestonImplicit")
                .field("rate", rate)
                .field("kappa", kappa)
                .field("x_bar", x_bar)
                .field("gamma", gamma)
                .field("rho", rho)
                .field("x0", x0)
                .finish(),
            Scheme::RandomWalk => write!(f, "RandomWalk"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub step_count: usize,
    /// Horizon in years.
    pub horizon: f64,
    /// Initial state: spot for price schemes, starting level for RandomWalk.
    pub initial_state: f64,
}

impl SchemeConfig {
    pub fn rate(&self) -> f64 {
        match &self.scheme {
            Scheme::GbmExact { rate, .. }
            | Scheme::EulerLog { rate, .. }
            | Scheme::LocalVolEuler { rate, .. }
            | Scheme::ExpOu { rate, .. }
            | Scheme::HestonImplicit { rate, .. } => *rate,
            Scheme::RandomWalk => 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.step_count < 1 {
            return Err(McError::Domain("step_count must be >= 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(McError::Domain("horizon must be > 0".into()));
        }
        match &self.scheme {
            Scheme::RandomWalk => {}
            _ => {
                if !(self.initial_state > 0.0) {
                    return Err(McError::Domain("initial state must be > 0".into()));
                }
            }
        }
        match &self.scheme {
            Scheme::GbmExact { sigma, .. } | Scheme::EulerLog { sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(McError::Domain("sigma must be > 0".into()));
                }
            }
            Scheme::ExpOu { gamma, rho, .. } => {
                if !(*gamma > 0.0) || rho.abs() >= 1.0 {
                    return Err(McError::Domain("need gamma > 0 and |rho| < 1".into()));
                }
            }
            Scheme::HestonImplicit { kappa, x_bar, gamma, rho, x0, .. } => {
                if !(*gamma > 0.0 && *kappa > 0.0 && *x_bar > 0.0 && *x0 > 0.0) || rho.abs() >= 1.0
                {
                    return Err(McError::Domain(
                        "need kappa, x_bar, gamma, x0 > 0 and |rho| < 1".into(),
                    ));
                }
                if gamma * gamma > 2.0 * kappa * x_bar {
                    return Err(McError::FellerViolation {
                        gamma_sq: gamma * gamma,
                        bound: 2.0 * kappa * x_bar,
                    });
                }
            }
            Scheme::LocalVolEuler { .. } | Scheme::RandomWalk => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum McError {
    Domain(String),
    /// gamma^2 > 2 kappa x_bar: the implicit square-root step is not safe.
    FellerViolation { gamma_sq: f64, bound: f64 },
    /// The local-vol function returned a negative or non-finite value.
    NonPositiveState { t: f64, s: f64, vol: f64 },
}

impl fmt::Display for McError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            McError::Domain(m) => write!(f, "domain error: {m}"),
            McError::FellerViolation { gamma_sq, bound } => {
                write!(f, "Feller violation: gamma^2 = {gamma_sq} > 2 kappa x_bar = {bound}")
            }
            McError::NonPositiveState { t, s, vol } => {
                write!(f, "local vol returned {vol} at (t={t}, s={s})")
            }
        }
    }
}

impl std::error::Error for McError {}

/// Monte Carlo estimate with its sampling error and provenance.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Count of implicit square-root steps whose discriminant was floored.
    pub floored_discriminants: u64,
}

/// Simulated paths: row p holds the state at every time node of path p.
#[derive(Clone, Debug)]
pub struct PathBatch {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Variance path per path for the stochastic-volatility schemes.
    pub variance_paths: Option<Vec<Vec<f64>>>,
    /// Trapezoid running average of the state along each path.
    pub terminal_averages: Vec<f64>,
    pub seed: u64,
    pub floored_discriminants: u64,
}

/// SplitMix64-style substream key: path i gets an independent generator.
fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut z = seed ^ path.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// One implicit square-root variance step; returns (X', floored).
pub fn heston_implicit_step(
    x: f64,
    db: f64,
    dt: f64,
    kappa: f64,
    x_bar: f64,
    gamma: f64,
) -> (f64, bool) {
    let a = 1.0 + kappa * dt;
    let c = x + (kappa * x_bar - 0.5 * gamma * gamma) * dt;
    let disc = gamma * gamma * db * db + 4.0 * a * c;
    if disc < 0.0 {
        return (0.0, true);
    }
    let y = ((gamma * db + disc.sqrt()) / (2.0 * a)).max(0.0);
    (y * y, false)
}

/// Walk one path, invoking `observe(step_index, state, variance)` at every
/// node including the initial one. Returns this path's floored-root count.
fn walk_path<F>(config: &SchemeConfig, rng: &mut ChaCha8Rng, mut observe: F) -> Result<u64, McError>
where
    F: FnMut(usize, f64, f64),
{
    let n = config.step_count;
    let dt = config.horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let mut floored = 0u64;
    match &config.scheme {
        Scheme::GbmExact { rate, dividend_yield, sigma }
        | Scheme::EulerLog { rate, dividend_yield, sigma } => {
            // for constant coefficients the log-Euler step is the exact transition
            let drift = (rate - dividend_yield - 0.5 * sigma * sigma) * dt;
            let mut log_s = config.initial_state.ln();
            observe(0, config.initial_state, 0.0);
            for k in 1..=n {
                let z: f64 = rng.sample(StandardNormal);
                log_s += drift + sigma * sqrt_dt * z;
                observe(k, log_s.exp(), 0.0);
            }
        }
        Scheme::LocalVolEuler { rate, vol_fn } => {
            let mut log_s = config.initial_state.ln();
            observe(0, config.initial_state, 0.0);
            for k in 1..=n {
                let t = (k - 1) as f64 * dt;
                let s = log_s.exp();
                let vol = vol_fn(t, s);
                if !(vol >= 0.0) || !vol.is_finite() {
                    return Err(McError::NonPositiveState { t, s, vol });
                }
                let z: f64 = rng.sample(StandardNormal);
                log_s += (rate - 0.5 * vol * vol) * dt + vol * sqrt_dt * z;
                observe(k, log_s.exp(), 0.0);
            }
        }
        Scheme::ExpOu { rate, kappa, x_bar, gamma, rho, x0 } => {
            let mut log_s = config.initial_state.ln();
            let mut x = *x0;
            let orth = (1.0 - rho * rho).sqrt();
            observe(0, config.initial_state, x);
            for k in 1..=n {
                let zb: f64 = rng.sample(StandardNormal);
                let zw: f64 = rng.sample(StandardNormal);
                let vol = x.exp();
                log_s += (rate - 0.5 * vol * vol) * dt + vol * sqrt_dt * (rho * zb + orth * zw);
                x += kappa * (x_bar - x) * dt + gamma * sqrt_dt * zb;
                observe(k, log_s.exp(), x);
            }
        }
        Scheme::HestonImplicit { rate, kappa, x_bar, gamma, rho, x0 } => {
            let mut log_s = config.initial_state.ln();
            let mut x = *x0;
            let orth = (1.0 - rho * rho).sqrt();
            observe(0, config.initial_state, x);
            for k in 1..=n {
                let zb: f64 = rng.sample(StandardNormal);
                let zw: f64 = rng.sample(StandardNormal);
                let vol = x.sqrt();
                log_s += (rate - 0.5 * x) * dt + vol * sqrt_dt * (rho * zb + orth * zw);
                let (next, was_floored) =
                    heston_implicit_step(x, sqrt_dt * zb, dt, *kappa, *x_bar, *gamma);
                if was_floored {
                    floored += 1;
                }
                x = next;
                observe(k, log_s.exp(), x);
            }
        }
        Scheme::RandomWalk => {
            let h = sqrt_dt;
            let mut w = config.initial_state;
            observe(0, w, 0.0);
            for k in 1..=n {
                w += if rng.random::<bool>() { h } else { -h };
                observe(k, w, 0.0);
            }
        }
    }
    Ok(floored)
}

/// Terminal summary of one path, accumulated without storing the path.
struct PathSummary {
    terminal: f64,
    average: f64,
    floored: u64,
}

fn summarize_path(config: &SchemeConfig, seed: u64, path: u64) -> Result<PathSummary, McError> {
    let mut rng = path_rng(seed, path);
    let n = config.step_count;
    let mut terminal = config.initial_state;
    let mut avg_acc = 0.0;
    let mut prev = config.initial_state;
    let floored = walk_path(config, &mut rng, |k, s, _| {
        if k > 0 {
            avg_acc += 0.5 * (prev + s);
        }
        prev = s;
        terminal = s;
    })?;
    Ok(PathSummary {
        terminal,
        average: avg_acc / n as f64,
        floored,
    })
}

/// Simulate a full batch of paths. Identical (config, n_paths, seed)
/// give bit-identical output regardless of the number of threads.
pub fn simulate(config: &SchemeConfig, n_paths: usize, seed: u64) -> Result<PathBatch, McError> {
    config.validate()?;
    if n_paths < 1 {
        return Err(McError::Domain("n_paths must be >= 1".into()));
    }
    let n = config.step_count;
    let dt = config.horizon / n as f64;
    let is_sv = matches!(config.scheme, Scheme::ExpOu { .. } | Scheme::HestonImplicit { .. });
    let floored_total = AtomicU64::new(0);

    let rows: Result<Vec<(Vec<f64>, Vec<f64>, f64)>, McError> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut states = Vec::with_capacity(n + 1);
            let mut vars = if is_sv { Vec::with_capacity(n + 1) } else { Vec::new() };
            let mut avg_acc = 0.0;
            let mut prev = config.initial_state;
            let floored = walk_path(config, &mut rng, |k, s, v| {
                if k > 0 {
                    avg_acc += 0.5 * (prev + s);
                }
                prev = s;
                states.push(s);
                if is_sv {
                    vars.push(v);
                }
            })?;
            floored_total.fetch_add(floored, Ordering::Relaxed);
            Ok((states, vars, avg_acc / n as f64))
        })
        .collect();
    let rows = rows?;

    let times = (0..=n).map(|k| k as f64 * dt).collect();
    let mut states = Vec::with_capacity(n_paths);
    let mut variances = Vec::with_capacity(if is_sv { n_paths } else { 0 });
    let mut averages = Vec::with_capacity(n_paths);
    for (s, v, a) in rows {
        states.push(s);
        if is_sv {
            variances.push(v);
        }
        averages.push(a);
    }
    Ok(PathBatch {
        times,
        states,
        variance_paths: if is_sv { Some(variances) } else { None },
        terminal_averages: averages,
        seed,
        floored_discriminants: floored_total.into_inner(),
    })
}

fn estimate_from_payoffs(payoffs: &[f64], discount: f64, seed: u64, floored: u64) -> McEstimate {
    let (mean, se) = mean_and_se(payoffs);
    McEstimate {
        mean: discount * mean,
        std_error: discount * se,
        n_paths: payoffs.len(),
        seed,
        floored_discriminants: floored,
    }
}

fn price_terminal_payoff<F>(
    config: &SchemeConfig,
    n_paths: usize,
    seed: u64,
    payoff: F,
) -> Result<McEstimate, McError>
where
    F: Fn(&PathSummary) -> f64 + Sync,
{
    config.validate()?;
    if n_paths < 2 {
        return Err(McError::Domain("n_paths must be >= 2 for a standard error".into()));
    }
    let results: Result<Vec<(f64, u64)>, McError> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let summary = summarize_path(config, seed, p)?;
            Ok((payoff(&summary), summary.floored))
        })
        .collect();
    let results = results?;
    let payoffs: Vec<f64> = results.iter().map(|(v, _)| *v).collect();
    let floored: u64 = results.iter().map(|(_, f)| *f).sum();
    let discount = (-config.rate() * config.horizon).exp();
    Ok(estimate_from_payoffs(&payoffs, discount, seed, floored))
}

/// Discounted European option value under the configured scheme.
pub fn price_european(
    config: &SchemeConfig,
    option: &OptionSpec,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    price_terminal_payoff(config, n_paths, seed, |s| option.payoff(s.terminal))
}

/// Discounted expectation of an arbitrary terminal-value function
/// (no payoff floor applied); used by cross-validation suites.
pub fn price_terminal(
    config: &SchemeConfig,
    payoff: impl Fn(f64) -> f64 + Sync,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    price_terminal_payoff(config, n_paths, seed, |s| payoff(s.terminal))
}

/// Discounted fixed-strike Asian call on the trapezoid time average.
pub fn price_asian(
    config: &SchemeConfig,
    strike: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, McError> {
    if config.step_count < 64 {
        return Err(McError::Domain(
            "Asian pricing needs step_count >= 64 for the time average".into(),
        ));
    }
    if !(strike >= 0.0) {
        return Err(McError::Domain("strike must be >= 0".into()));
    }
    price_terminal_payoff(config, n_paths, seed, |s| (s.average - strike).max(0.0))
}

/// Probability that Brownian motion hits `a` before `b`, estimated from
/// discretized paths. The closed form is b / (b - a).
pub fn gamblers_ruin(
    a: f64,
    b: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate, McError> {
    if !(a < 0.0 && b > 0.0) {
        return Err(McError::Domain("need a < 0 < b".into()));
    }
    let scale = a.abs().min(b);
    if !(dt > 0.0) || dt > 1e-3 * scale * scale {
        return Err(McError::Domain(format!(
            "dt must satisfy 0 < dt <= 1e-3 min(|a|, b)^2 = {:.3e}",
            1e-3 * scale * scale
        )));
    }
    if n_paths < 2 {
        return Err(McError::Domain("n_paths must be >= 2".into()));
    }
    let sqrt_dt = dt.sqrt();
    let max_steps = 100_000_000usize;
    let hits: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut w = 0.0;
            for _ in 0..max_steps {
                let z: f64 = rng.sample(StandardNormal);
                w += sqrt_dt * z;
                if w <= a {
                    return 1.0;
                }
                if w >= b {
                    return 0.0;
                }
            }
            0.0 // exit is a.s. finite; the cap is unreachable in practice
        })
        .collect();
    let (mean, se) = mean_and_se(&hits);
    Ok(McEstimate {
        mean,
        std_error: se,
        n_paths,
        seed,
        floored_discriminants: 0,
    })
}

/// Sample statistics of the Ito integral of a step function against the
/// isometry value Int f^2 dt.
#[derive(Clone, Copy, Debug)]
pub struct ItoIsometryReport {
    pub sample_mean: f64,
    pub mean_std_error: f64,
    pub sample_variance: f64,
    /// Standard error of the variance estimate (Gaussian fourth-moment rule).
    pub variance_std_error: f64,
    /// Int_0^T f^2(t) dt, the isometry target.
    pub integral_f_squared: f64,
}

/// Simulate Sum f(t_k) dW_k for a piecewise-constant integrand given by
/// its values on the uniform step grid.
pub fn ito_isometry_check(
    f_values: &[f64],
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ItoIsometryReport, McError> {
    if f_values.is_empty() || !(horizon > 0.0) {
        return Err(McError::Domain("need at least one step and a positive horizon".into()));
    }
    if n_paths < 2 {
        return Err(McError::Domain("n_paths must be >= 2".into()));
    }
    let n = f_values.len();
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let integrals: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut acc = 0.0;
            for fv in f_values {
                let z: f64 = rng.sample(StandardNormal);
                acc += fv * sqrt_dt * z;
            }
            acc
        })
        .collect();
    let (mean, mean_se) = mean_and_se(&integrals);
    let sq: Vec<f64> = integrals.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n_paths as f64 - 1.0);
    Ok(ItoIsometryReport {
        sample_mean: mean,
        mean_std_error: mean_se,
        sample_variance: var,
        variance_std_error: var * (2.0 / (n_paths as f64 - 1.0)).sqrt(),
        integral_f_squared: f_values.iter().map(|f| f * f * dt).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_price, BsParams};

    fn gbm_config(scheme_exact: bool) -> SchemeConfig {
        let scheme = if scheme_exact {
            Scheme::GbmExact { rate: 0.02, dividend_yield: 0.0, sigma: 0.2 }
        } else {
            Scheme::EulerLog { rate: 0.02, dividend_yield: 0.0, sigma: 0.2 }
        };
        SchemeConfig {
            scheme,
            step_count: 16,
            horizon: 0.25,
            initial_state: 50.0,
        }
    }

    #[test]
    fn discounted_terminal_mean_is_spot() {
        // martingale property of the exact scheme
        let config = SchemeConfig { step_count: 1, ..gbm_config(true) };
        let est = price_terminal(&config, |s| s, 100_000, 42).unwrap();
        assert!(
            (est.mean - 50.0).abs() < 3.0 * est.std_error,
            "mean {} +- {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn every_risk_neutral_scheme_has_martingale_discounted_spot() {
        let flat: VolFn = Arc::new(|_t, _s| 0.2);
        let schemes = [
            Scheme::GbmExact { rate: 0.03, dividend_yield: 0.0, sigma: 0.2 },
            Scheme::EulerLog { rate: 0.03, dividend_yield: 0.0, sigma: 0.2 },
            Scheme::LocalVolEuler { rate: 0.03, vol_fn: flat },
            Scheme::ExpOu {
                rate: 0.03,
                kappa: 1.0,
                x_bar: (0.2f64).ln(),
                gamma: 0.3,
                rho: -0.5,
                x0: (0.2f64).ln(),
            },
            Scheme::HestonImplicit {
                rate: 0.03,
                kappa: 1.15,
                x_bar: 0.04,
                gamma: 0.2,
                rho: -0.4,
                x0: 0.04,
            },
        ];
        for scheme in schemes {
            let config = SchemeConfig {
                scheme,
                step_count: 32,
                horizon: 0.5,
                initial_state: 50.0,
            };
            let est = price_terminal(&config, |s| s, 100_000, 23).unwrap();
            assert!(
                (est.mean - 50.0).abs() < 4.0 * est.std_error,
                "{:?}: discounted mean {} +- {}",
                config.scheme,
                est.mean,
                est.std_error
            );
        }
    }

    #[test]
    fn seeded_batches_are_bit_identical() {
        let config = gbm_config(true);
        let a = simulate(&config, 64, 7).unwrap();
        let b = simulate(&config, 64, 7).unwrap();
        assert_eq!(a.states, b.states);
        let c = simulate(&config, 64, 8).unwrap();
        assert_ne!(a.states, c.states);
        // first column is the initial state
        assert!(a.states.iter().all(|row| row[0] == 50.0));
    }

    #[test]
    fn european_call_matches_black_scholes() {
        let config = gbm_config(true);
        let est = price_european(&config, &OptionSpec::call(50.0), 200_000, 42).unwrap();
        let bs = bs_price(&BsParams::new(50.0, 0.02, 0.0, 0.2, 0.25), &OptionSpec::call(50.0))
            .unwrap();
        assert!(
            (est.mean - bs).abs() < 3.0 * est.std_error,
            "mc {} +- {} vs bs {bs}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn zero_strike_call_is_discounted_forward() {
        let config = gbm_config(false);
        let est = price_european(&config, &OptionSpec::call(1e-9), 100_000, 1).unwrap();
        assert!((est.mean - 50.0).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn random_walk_terminal_moments_and_ks() {
        // 4096 steps keep the binomial lattice spacing well below the KS
        // critical value at this path count
        let n_steps = 4096;
        let config = SchemeConfig {
            scheme: Scheme::RandomWalk,
            step_count: n_steps,
            horizon: 1.0,
            initial_state: 0.0,
        };
        let n_paths = 5000;
        let batch = simulate(&config, n_paths, 42).unwrap();
        let terminals: Vec<f64> = batch.states.iter().map(|row| row[n_steps]).collect();
        let (mean, se) = mean_and_se(&terminals);
        assert!(mean.abs() < 3.0 * se, "terminal mean {mean} +- {se}");
        let var: f64 = terminals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n_paths as f64 - 1.0);
        let var_se = var * (2.0 / (n_paths as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * var_se, "terminal var {var} +- {var_se}");

        // Kolmogorov-Smirnov distance to N(0,1) below the 1% critical value
        let mut sorted = terminals;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d: f64 = 0.0;
        for (i, x) in sorted.iter().enumerate() {
            let cdf = crate::numerics::special::norm_cdf(*x);
            d = d.max((cdf - i as f64 / n_paths as f64).abs());
            d = d.max(((i + 1) as f64 / n_paths as f64 - cdf).abs());
        }
        let critical = 1.63 / (n_paths as f64).sqrt(); // 1% level, large n
        assert!(d < critical, "KS statistic {d} above 1% critical value {critical}");
    }

    #[test]
    fn heston_implicit_step_drift_only_root() {
        // kappa = 0, dB = 0: X' = X - gamma^2 dt / 2 exactly
        let (x_next, floored) = heston_implicit_step(0.04, 0.0, 0.01, 0.0, 0.04, 0.2);
        assert!(!floored);
        assert!((x_next - (0.04 - 0.5 * 0.04 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn heston_variance_path_never_negative() {
        let config = SchemeConfig {
            scheme: Scheme::HestonImplicit {
                rate: 0.02,
                kappa: 1.15,
                x_bar: 0.04,
                gamma: 0.2,
                rho: -0.4,
                x0: 0.04,
            },
            step_count: 64,
            horizon: 0.5,
            initial_state: 50.0,
        };
        for seed in [1u64, 2, 3, 99] {
            let batch = simulate(&config, 200, seed).unwrap();
            let vars = batch.variance_paths.unwrap();
            assert!(vars.iter().flatten().all(|v| *v >= 0.0), "seed {seed}");
        }
    }

    #[test]
    fn feller_violation_rejected_for_heston() {
        let config = SchemeConfig {
            scheme: Scheme::HestonImplicit {
                rate: 0.02,
                kappa: 0.5,
                x_bar: 0.04,
                gamma: 0.5,
                rho: -0.4,
                x0: 0.04,
            },
            step_count: 64,
            horizon: 0.5,
            initial_state: 50.0,
        };
        assert!(matches!(simulate(&config, 10, 1), Err(McError::FellerViolation { .. })));
    }

    #[test]
    fn exp_ou_increment_correlation_matches_rho() {
        // standardize each increment by its conditional step volatility,
        // otherwise time-varying vol attenuates the pooled correlation
        let rho = -0.6;
        let (kappa, x_bar, gamma, r) = (1.0, (0.2f64).ln(), 0.3, 0.0);
        let config = SchemeConfig {
            scheme: Scheme::ExpOu { rate: r, kappa, x_bar, gamma, rho, x0: x_bar },
            step_count: 64,
            horizon: 1.0,
            initial_state: 50.0,
        };
        let batch = simulate(&config, 4000, 11).unwrap();
        let vars = batch.variance_paths.as_ref().unwrap();
        let dt = 1.0 / 64.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (srow, vrow) in batch.states.iter().zip(vars) {
            for k in 1..srow.len() {
                let vol = vrow[k - 1].exp();
                let zs = ((srow[k] / srow[k - 1]).ln() - (r - 0.5 * vol * vol) * dt)
                    / (vol * dt.sqrt());
                let zx =
                    (vrow[k] - vrow[k - 1] - kappa * (x_bar - vrow[k - 1]) * dt) / (gamma * dt.sqrt());
                xs.push(zs);
                ys.push(zx);
            }
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            cov += (x - mx) * (y - my);
            vx += (x - mx) * (x - mx);
            vy += (y - my) * (y - my);
        }
        let corr = cov / (vx * vy).sqrt();
        // correlation estimator SE ~ (1 - rho^2)/sqrt(n)
        let se = (1.0 - rho * rho) / n.sqrt();
        assert!((corr - rho).abs() < 4.0 * se, "corr {corr} vs rho {rho} (se {se})");
    }

    #[test]
    fn local_vol_flat_matches_gbm_and_negative_vol_errors() {
        let flat: VolFn = Arc::new(|_t, _s| 0.2);
        let config = SchemeConfig {
            scheme: Scheme::LocalVolEuler { rate: 0.02, vol_fn: flat },
            step_count: 16,
            horizon: 0.25,
            initial_state: 50.0,
        };
        let est = price_european(&config, &OptionSpec::call(50.0), 100_000, 3).unwrap();
        let bs = bs_price(&BsParams::new(50.0, 0.02, 0.0, 0.2, 0.25), &OptionSpec::call(50.0))
            .unwrap();
        assert!((est.mean - bs).abs() < 3.0 * est.std_error);

        let bad: VolFn = Arc::new(|_t, _s| -0.1);
        let config = SchemeConfig {
            scheme: Scheme::LocalVolEuler { rate: 0.02, vol_fn: bad },
            step_count: 16,
            horizon: 0.25,
            initial_state: 50.0,
        };
        assert!(matches!(
            price_european(&config, &OptionSpec::call(50.0), 100, 3),
            Err(McError::NonPositiveState { .. })
        ));
    }

    #[test]
    fn asian_deterministic_limit() {
        // sigma -> 0: average of S0 e^{rt} over [0, T], price known exactly
        let (r, t, s0): (f64, f64, f64) = (0.02, 0.25, 50.0);
        let config = SchemeConfig {
            scheme: Scheme::GbmExact { rate: r, dividend_yield: 0.0, sigma: 1e-8 },
            step_count: 512,
            horizon: t,
            initial_state: s0,
        };
        let strike = 49.0;
        let est = price_asian(&config, strike, 100, 5).unwrap();
        let avg = s0 * ((r * t).exp() - 1.0) / (r * t);
        let want = (-r * t).exp() * (avg - strike).max(0.0);
        // trapezoid-vs-exact integral bias only, no stochastic error
        assert!((est.mean - want).abs() < 1e-6, "{} vs {want}", est.mean);
    }

    #[test]
    fn asian_zero_strike_zero_rate_is_martingale_average() {
        let config = SchemeConfig {
            scheme: Scheme::GbmExact { rate: 0.0, dividend_yield: 0.0, sigma: 0.2 },
            step_count: 64,
            horizon: 0.25,
            initial_state: 50.0,
        };
        let est = price_asian(&config, 0.0, 100_000, 9).unwrap();
        assert!((est.mean - 50.0).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn asian_requires_enough_steps() {
        let config = SchemeConfig { step_count: 32, ..gbm_config(true) };
        assert!(price_asian(&config, 50.0, 100, 1).is_err());
    }

    #[test]
    fn gamblers_ruin_symmetric() {
        let est = gamblers_ruin(-1.0, 1.0, 20_000, 1e-3, 42).unwrap();
        assert!(
            (est.mean - 0.5).abs() < 4.0 * est.std_error,
            "{} +- {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn gamblers_ruin_rejects_bad_inputs() {
        assert!(gamblers_ruin(1.0, 2.0, 100, 1e-4, 1).is_err());
        assert!(gamblers_ruin(-1.0, 1.0, 100, 0.5, 1).is_err());
    }

    #[test]
    fn ito_isometry_constant_integrand() {
        // f = 1: Int f dW = W_T with variance T
        let report = ito_isometry_check(&[1.0; 64], 1.0, 50_000, 13).unwrap();
        assert!(report.sample_mean.abs() < 4.0 * report.mean_std_error);
        assert!((report.sample_variance - 1.0).abs() < 4.0 * report.variance_std_error);
        assert!((report.integral_f_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ito_isometry_zero_integrand() {
        let report = ito_isometry_check(&[0.0; 16], 1.0, 100, 13).unwrap();
        assert_eq!(report.sample_variance, 0.0);
        assert_eq!(report.integral_f_squared, 0.0);
    }

    #[test]
    fn ito_isometry_linear_integrand() {
        // f(t) = t sampled on the step grid: Int f^2 dt ~ T^3 / 3
        let n = 256;
        let t_grid: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let report = ito_isometry_check(&t_grid, 1.0, 50_000, 21).unwrap();
        assert!(
            (report.sample_variance - 1.0 / 3.0).abs() < 4.0 * report.variance_std_error,
            "variance {} +- {}",
            report.sample_variance,
            report.variance_std_error
        );
    }

    #[test]
    fn weak_convergence_of_euler_under_state_dependent_vol() {
        // a steep vol transition around the spot makes the Euler bias
        // dominate the sampling noise; refining dt must shrink it
        let vol: VolFn = Arc::new(|_t, s: f64| 0.15 + 0.25 / (1.0 + ((s - 50.0) / 2.0).exp()));
        let price_at = |steps: usize| {
            let config = SchemeConfig {
                scheme: Scheme::LocalVolEuler { rate: 0.02, vol_fn: vol.clone() },
                step_count: steps,
                horizon: 1.0,
                initial_state: 50.0,
            };
            price_european(&config, &OptionSpec::call(50.0), 150_000, 77).unwrap()
        };
        let reference = price_at(128).mean;
        let errs: Vec<f64> = [2usize, 8, 32]
            .iter()
            .map(|&steps| (price_at(steps).mean - reference).abs())
            .collect();
        assert!(
            errs[0] > errs[1] && errs[1] > errs[2],
            "discretization error did not shrink monotonically: {errs:?}"
        );
    }
}

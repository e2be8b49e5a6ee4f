//! Closed-form European pricing and Greeks.
//!
//! The market model is geometric Brownian motion under the risk-neutral
//! measure with a continuous dividend yield q:
//!
//! ```text
//! dS_t / S_t = (r - q) dt + sigma dW_t
//! ```
//!
//! Prices follow the dividend-adjusted call/put formulas
//!
//! ```text
//! C = S e^{-q tau} N(d1) - K e^{-r tau} N(d2)
//! d1 = (log(S/K) + (r - q + sigma^2/2) tau) / (sigma sqrt(tau)),  d2 = d1 - sigma sqrt(tau)
//! ```
//!
//! All Greeks are exact derivatives of these formulas (Theta is the
//! calendar derivative dC/dt at fixed maturity, reported per year) and
//! every one of them is validated against central finite differences in
//! the tests.

use crate::numerics::special::{norm_cdf, norm_pdf};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionKind::Call => write!(f, "call"),
            OptionKind::Put => write!(f, "put"),
        }
    }
}

/// Vanilla contract description.
#[derive(Clone, Copy, Debug)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
}

impl OptionSpec {
    pub fn call(strike: f64) -> Self {
        Self {
            kind: OptionKind::Call,
            strike,
        }
    }

    pub fn put(strike: f64) -> Self {
        Self {
            kind: OptionKind::Put,
            strike,
        }
    }

    pub fn payoff(&self, terminal: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (terminal - self.strike).max(0.0),
            OptionKind::Put => (self.strike - terminal).max(0.0),
        }
    }

    fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "strike must be positive and finite, got {}",
                self.strike
            )));
        }
        Ok(())
    }
}

/// Market state for Black-Scholes pricing.
#[derive(Clone, Copy, Debug)]
pub struct BsParams {
    pub spot: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub sigma: f64,
    pub time_to_maturity: f64,
}

impl BsParams {
    pub fn new(spot: f64, rate: f64, dividend_yield: f64, sigma: f64, time_to_maturity: f64) -> Self {
        Self {
            spot,
            rate,
            dividend_yield,
            sigma,
            time_to_maturity,
        }
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.spot > 0.0) || !self.spot.is_finite() {
            return Err(AnalyticError::Domain(format!("spot must be > 0, got {}", self.spot)));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "sigma must be > 0, got {} (use intrinsic_forward for the deterministic limit)",
                self.sigma
            )));
        }
        if !(self.time_to_maturity > 0.0) || !self.time_to_maturity.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "time_to_maturity must be > 0, got {} (use intrinsic_forward for the deterministic limit)",
                self.time_to_maturity
            )));
        }
        if self.dividend_yield < 0.0 || !self.rate.is_finite() || !self.dividend_yield.is_finite() {
            return Err(AnalyticError::Domain(format!(
                "rate {} / dividend_yield {} out of domain",
                self.rate, self.dividend_yield
            )));
        }
        Ok(())
    }

    pub fn d1(&self, strike: f64) -> f64 {
        let tau = self.time_to_maturity;
        let st = self.sigma * tau.sqrt();
        ((self.spot / strike).ln() + (self.rate - self.dividend_yield + 0.5 * self.sigma * self.sigma) * tau)
            / st
    }

    pub fn d2(&self, strike: f64) -> f64 {
        self.d1(strike) - self.sigma * self.time_to_maturity.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticError {
    Domain(String),
}

impl fmt::Display for AnalyticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticError::Domain(msg) => write!(f, "domain error: {msg}"),
        }
    }
}

impl std::error::Error for AnalyticError {}

/// Black-Scholes price of a European call or put on a dividend-paying asset.
pub fn bs_price(params: &BsParams, spec: &OptionSpec) -> Result<f64, AnalyticError> {
    params.validate()?;
    spec.validate()?;
    let tau = params.time_to_maturity;
    let df_r = (-params.rate * tau).exp();
    let df_q = (-params.dividend_yield * tau).exp();
    let d1 = params.d1(spec.strike);
    let d2 = params.d2(spec.strike);
    let price = match spec.kind {
        OptionKind::Call => params.spot * df_q * norm_cdf(d1) - spec.strike * df_r * norm_cdf(d2),
        OptionKind::Put => spec.strike * df_r * norm_cdf(-d2) - params.spot * df_q * norm_cdf(-d1),
    };
    Ok(price)
}

/// Deterministic-limit value: the discounted forward intrinsic
/// `(S e^{-q tau} - K e^{-r tau})^+` (call) or its mirror (put). Serves the
/// sigma -> 0 and tau -> 0 limits that `bs_price` rejects.
pub fn intrinsic_forward(spot: f64, rate: f64, dividend_yield: f64, tau: f64, spec: &OptionSpec) -> f64 {
    let fwd = spot * (-dividend_yield * tau).exp();
    let k = spec.strike * (-rate * tau).exp();
    match spec.kind {
        OptionKind::Call => (fwd - k).max(0.0),
        OptionKind::Put => (k - fwd).max(0.0),
    }
}

/// C - P - (S e^{-q tau} - K e^{-r tau}); zero up to roundoff by put-call parity.
pub fn put_call_parity_gap(params: &BsParams, strike: f64) -> Result<f64, AnalyticError> {
    let call = bs_price(params, &OptionSpec::call(strike))?;
    let put = bs_price(params, &OptionSpec::put(strike))?;
    let tau = params.time_to_maturity;
    let fwd_leg =
        params.spot * (-params.dividend_yield * tau).exp() - strike * (-params.rate * tau).exp();
    Ok(call - put - fwd_leg)
}

/// Black-76: option on a future. Identical to `bs_price` with the spot
/// replaced by the future price and the dividend yield set to r.
pub fn black76_price(
    future_price: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    tau: f64,
    kind: OptionKind,
) -> Result<f64, AnalyticError> {
    let params = BsParams::new(future_price, rate, rate, sigma, tau);
    bs_price(&params, &OptionSpec { kind, strike })
}

/// Forward price of a stock paying proportional discrete dividends
/// (log rates `delta_i` inside (t, T]): `F = S exp(r tau - sum delta_i)`.
pub fn discrete_dividend_forward(
    spot: f64,
    rate: f64,
    tau: f64,
    dividend_log_rates: &[f64],
) -> Result<f64, AnalyticError> {
    if dividend_log_rates.iter().any(|d| *d < 0.0 || !d.is_finite()) {
        return Err(AnalyticError::Domain(
            "dividend log rates must be nonnegative".into(),
        ));
    }
    if !(spot > 0.0) || !(tau >= 0.0) {
        return Err(AnalyticError::Domain("spot must be > 0 and tau >= 0".into()));
    }
    let total: f64 = dividend_log_rates.iter().sum();
    Ok(spot * (rate * tau - total).exp())
}

/// Two-asset exchange option (right to swap asset 2 for asset 1 at maturity).
#[derive(Clone, Copy, Debug)]
pub struct ExchangeSpec {
    pub s1: f64,
    pub s2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub time_to_maturity: f64,
}

impl ExchangeSpec {
    /// Combined variance of the log ratio: sigma1^2 + sigma2^2 - 2 rho sigma1 sigma2.
    pub fn combined_variance(&self) -> f64 {
        self.sigma1 * self.sigma1 + self.sigma2 * self.sigma2
            - 2.0 * self.rho * self.sigma1 * self.sigma2
    }

    fn validate(&self) -> Result<(), AnalyticError> {
        if !(self.s1 > 0.0 && self.s2 > 0.0) {
            return Err(AnalyticError::Domain("asset prices must be > 0".into()));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(AnalyticError::Domain("volatilities must be > 0".into()));
        }
        if self.rho.abs() >= 1.0 {
            return Err(AnalyticError::Domain(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if !(self.time_to_maturity > 0.0) {
            return Err(AnalyticError::Domain("time_to_maturity must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MargrabeResult {
    pub price: f64,
    /// True when the combined variance vanished and the price fell back to
    /// the deterministic intrinsic (s1 - s2)^+.
    pub degenerate_variance: bool,
}

/// Margrabe formula: `s1 N(d1) - s2 N(d2)`, the Black-Scholes call with
/// r = 0, spot s1, strike s2 and the combined volatility of the log ratio.
pub fn margrabe_price(spec: &ExchangeSpec) -> Result<MargrabeResult, AnalyticError> {
    spec.validate()?;
    let var = spec.combined_variance();
    if var * spec.time_to_maturity < 1e-30 {
        return Ok(MargrabeResult {
            price: (spec.s1 - spec.s2).max(0.0),
            degenerate_variance: spec.s1 != spec.s2,
        });
    }
    let sig_rt = (var * spec.time_to_maturity).sqrt();
    let d1 = ((spec.s1 / spec.s2).ln() + 0.5 * var * spec.time_to_maturity) / sig_rt;
    let d2 = d1 - sig_rt;
    Ok(MargrabeResult {
        price: spec.s1 * norm_cdf(d1) - spec.s2 * norm_cdf(d2),
        degenerate_variance: false,
    })
}

/// Full Greek set. All entries are exact partial derivatives of the
/// dividend-adjusted Black-Scholes formulas.
#[derive(Clone, Copy, Debug)]
pub struct GreeksReport {
    pub delta: f64,
    /// Calendar derivative dC/dt at fixed maturity, per year.
    pub theta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub rho: f64,
    /// Elasticity: delta * S / price.
    pub lambda_elasticity: f64,
    pub vanna: f64,
    pub volga: f64,
}

pub fn greeks(params: &BsParams, spec: &OptionSpec) -> Result<GreeksReport, AnalyticError> {
    params.validate()?;
    spec.validate()?;
    let (s, k, tau) = (params.spot, spec.strike, params.time_to_maturity);
    let (r, q, sigma) = (params.rate, params.dividend_yield, params.sigma);
    let sqrt_tau = tau.sqrt();
    let df_r = (-r * tau).exp();
    let df_q = (-q * tau).exp();
    let d1 = params.d1(k);
    let d2 = params.d2(k);
    let pdf_d1 = norm_pdf(d1);

    let gamma = df_q * pdf_d1 / (s * sigma * sqrt_tau);
    let vega = s * df_q * pdf_d1 * sqrt_tau;
    let vanna = -df_q * pdf_d1 * d2 / sigma;
    let volga = vega * d1 * d2 / sigma;
    let price = bs_price(params, spec)?;

    let (delta, theta, rho) = match spec.kind {
        OptionKind::Call => (
            df_q * norm_cdf(d1),
            -s * df_q * pdf_d1 * sigma / (2.0 * sqrt_tau) + q * s * df_q * norm_cdf(d1)
                - r * k * df_r * norm_cdf(d2),
            k * tau * df_r * norm_cdf(d2),
        ),
        OptionKind::Put => (
            -df_q * norm_cdf(-d1),
            -s * df_q * pdf_d1 * sigma / (2.0 * sqrt_tau) - q * s * df_q * norm_cdf(-d1)
                + r * k * df_r * norm_cdf(-d2),
            -k * tau * df_r * norm_cdf(-d2),
        ),
    };

    Ok(GreeksReport {
        delta,
        theta,
        gamma,
        vega,
        rho,
        lambda_elasticity: if price != 0.0 { delta * s / price } else { f64::NAN },
        vanna,
        volga,
    })
}

/// Premium of the delta hedge over the risk-free rate per unit time:
/// `-Theta - (sigma^2 S^2 / 2) Gamma`. For q = 0 this equals
/// `r K e^{-r tau} N(d2)` for calls and `-r K e^{-r tau} N(-d2)` for puts.
pub fn hedge_premium(params: &BsParams, spec: &OptionSpec) -> Result<f64, AnalyticError> {
    let g = greeks(params, spec)?;
    let s = params.spot;
    Ok(-g.theta - 0.5 * params.sigma * params.sigma * s * s * g.gamma)
}

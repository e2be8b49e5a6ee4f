//! Hamilton-Jacobi-Bellman solutions for optimal investment.
//!
//! Closed forms for the log- and power-utility Merton problems and the
//! infinite-horizon log-consumption problem; Riccati-based solutions for
//! the stochastic-returns model (with its finite-time blowup) and the
//! affine square-root variance model; the distortion transform that
//! linearizes the exponential-utility stochastic-volatility equation;
//! and the utility-indifference price inversion.
//!
//! Every solution exposes analytic partial derivatives of its value
//! function so tests can evaluate the HJB residual on grids directly.
//! The distortion exponent is never hardcoded: `exp_utility_sv_transform`
//! substitutes g = psi^q into the nonlinear equation for both candidate
//! exponents and selects whichever cancels the quadratic term.
//!
//! All Riccati problems are reduced to the canonical form
//!
//! ```text
//! da/dtau = p a^2 + q a + r,   a(0) = 0,   tau = time to horizon,
//! ```
//!
//! solved explicitly per root regime, with integrals of a available in
//! closed form for the companion linear coefficient.

use crate::numerics::ode::{terminal_state, OdeOptions};
use crate::numerics::quad::integrate_composite;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum ControlError {
    Domain(String),
    /// Requested horizon reaches or passes the value-function blowup.
    HorizonBeyondBlowup { blowup_tau: f64 },
    /// Affine Riccati produced complex roots (not expected for real data).
    RiccatiBlowup { blowup_tau: f64 },
    /// Neither candidate distortion exponent cancels the nonlinearity.
    NoLinearizingExponent { residuals: (f64, f64) },
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlError::Domain(m) => write!(f, "domain error: {m}"),
            ControlError::HorizonBeyondBlowup { blowup_tau } => {
                write!(f, "value function blows up {blowup_tau} years before the horizon end")
            }
            ControlError::RiccatiBlowup { blowup_tau } => {
                write!(f, "Riccati solution blows up at time-to-horizon {blowup_tau}")
            }
            ControlError::NoLinearizingExponent { residuals } => write!(
                f,
                "no linearizing exponent: residuals {:.3e} and {:.3e}",
                residuals.0, residuals.1
            ),
        }
    }
}

impl std::error::Error for ControlError {}

// ---------------------------------------------------------------------
// Canonical Riccati kernel
// ---------------------------------------------------------------------

/// Explicit solution of da/dtau = p a^2 + q a + r with a(0) = 0.
#[derive(Clone, Debug)]
pub enum Riccati {
    /// p = 0: the equation is linear.
    Linear { q: f64, r: f64 },
    /// Distinct real roots m_pm of p m^2 + ... (scaled form): no blowup
    /// reachable from a(0) = 0.
    Real { p: f64, r: f64, m_plus: f64, m_minus: f64 },
    Repeated { p: f64, r: f64, m0: f64 },
    /// Complex roots: a(tau) = (d tan(d tau + phi0) - q/2) / p with blowup
    /// at tau* = (pi/2 - phi0) / d.
    Complex { p: f64, q: f64, d: f64, phi0: f64 },
}

impl Riccati {
    pub fn solve(p: f64, q: f64, r: f64) -> Riccati {
        if p.abs() < 1e-14 {
            return Riccati::Linear { q, r };
        }
        // roots of m^2 + (-q) m + p r = 0 shifted form: m_pm = q/2 +- sqrt(disc)
        // are the exponents of the associated linear second-order equation;
        // equivalently p a^2 + q a + r has roots m_pm / p.
        let disc = 0.25 * q * q - p * r;
        let scale = (0.25 * q * q).abs() + (p * r).abs();
        if disc.abs() <= 1e-13 * scale.max(1e-30) {
            Riccati::Repeated { p, r, m0: -0.5 * q }
        } else if disc > 0.0 {
            let delta = disc.sqrt();
            Riccati::Real {
                p,
                r,
                m_plus: -0.5 * q + delta,
                m_minus: -0.5 * q - delta,
            }
        } else {
            let d = (-disc).sqrt();
            Riccati::Complex { p, q, d, phi0: (0.5 * q / d).atan() }
        }
    }

    /// Time-to-horizon at which the solution diverges, if any.
    pub fn blowup_tau(&self) -> Option<f64> {
        match self {
            Riccati::Complex { d, phi0, .. } => Some((std::f64::consts::FRAC_PI_2 - phi0) / d),
            _ => None,
        }
    }

    pub fn a(&self, tau: f64) -> f64 {
        match *self {
            Riccati::Linear { q, r } => {
                if q.abs() < 1e-14 {
                    r * tau
                } else {
                    r * ((q * tau).exp() - 1.0) / q
                }
            }
            Riccati::Real { r, m_plus, m_minus, .. } => {
                // a = r (1 - e^{-2 delta tau}) / (m+ - m- e^{-2 delta tau})
                let decay = (-(m_plus - m_minus) * tau).exp();
                r * (1.0 - decay) / (m_plus - m_minus * decay)
            }
            Riccati::Repeated { p, r, m0 } => {
                let _ = p;
                r * tau / (1.0 + m0 * tau)
            }
            Riccati::Complex { p, q, d, phi0 } => (d * (d * tau + phi0).tan() - 0.5 * q) / p,
        }
    }

    /// Int_0^tau a(s) ds in closed form.
    pub fn integral(&self, tau: f64) -> f64 {
        match *self {
            Riccati::Linear { q, r } => {
                if q.abs() < 1e-14 {
                    0.5 * r * tau * tau
                } else {
                    r * (((q * tau).exp() - 1.0) / q - tau) / q
                }
            }
            Riccati::Real { p, m_plus, m_minus, .. } => {
                // Int a = -(1/p) ln v(tau), v = (m- e^{-m+ tau} - m+ e^{-m- tau})/(m- - m+),
                // with the growing exponential factored out for stability
                let two_delta = m_plus - m_minus;
                let ln_v = -m_minus * tau
                    + ((m_minus * (-two_delta * tau).exp() - m_plus) / (m_minus - m_plus)).ln();
                -ln_v / p
            }
            Riccati::Repeated { p, r, m0 } => {
                let _ = p;
                if m0.abs() < 1e-14 {
                    0.5 * r * tau * tau
                } else {
                    r * (tau / m0 - (1.0 + m0 * tau).ln() / (m0 * m0))
                }
            }
            Riccati::Complex { p, q, d, phi0 } => {
                -(((d * tau + phi0).cos() / phi0.cos()).ln()) / p - 0.5 * q * tau / p
            }
        }
    }
}

// ---------------------------------------------------------------------
// Merton problems
// ---------------------------------------------------------------------

/// Market and preference parameters for the single-asset problems.
#[derive(Clone, Copy, Debug)]
pub struct MertonSpec {
    pub mu: f64,
    pub rate: f64,
    pub sigma: f64,
    /// Risk aversion (power utility needs gamma != 1).
    pub gamma: f64,
    /// Subjective discount rate for the consumption problem.
    pub beta: f64,
    pub horizon: f64,
}

impl MertonSpec {
    fn validate(&self) -> Result<(), ControlError> {
        if !(self.sigma > 0.0) {
            return Err(ControlError::Domain("sigma must be > 0".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(ControlError::Domain("gamma must be > 0".into()));
        }
        Ok(())
    }

    fn excess(&self) -> f64 {
        self.mu - self.rate
    }
}

/// Log-utility terminal wealth: constant allocation, zero consumption.
#[derive(Clone, Copy, Debug)]
pub struct MertonLogSolution {
    pub spec: MertonSpec,
    /// (mu - r) / sigma^2.
    pub allocation: f64,
}

pub fn merton_log(spec: &MertonSpec) -> Result<MertonLogSolution, ControlError> {
    spec.validate()?;
    Ok(MertonLogSolution {
        spec: *spec,
        allocation: spec.excess() / (spec.sigma * spec.sigma),
    })
}

impl MertonLogSolution {
    fn growth(&self) -> f64 {
        let e = self.spec.excess();
        e * e / (2.0 * self.spec.sigma * self.spec.sigma)
    }

    /// V(t, x) = log(x) + (r + (mu-r)^2/(2 sigma^2)) (T - t).
    pub fn value(&self, t: f64, x: f64) -> f64 {
        x.ln() + (self.spec.rate + self.growth()) * (self.spec.horizon - t)
    }

    /// Certainty equivalent e^{-r tau} U^{-1}(V) = x e^{(mu-r)^2 tau / (2 sigma^2)}.
    pub fn certainty_equivalent(&self, t: f64, x: f64) -> f64 {
        x * (self.growth() * (self.spec.horizon - t)).exp()
    }

    /// HJB residual at the optimal control, from analytic partials.
    pub fn hjb_residual(&self, _t: f64, x: f64) -> f64 {
        let spec = &self.spec;
        let v_t = -(spec.rate + self.growth());
        let v_x = 1.0 / x;
        let v_xx = -1.0 / (x * x);
        let pi = self.allocation;
        v_t + 0.5 * spec.sigma * spec.sigma * pi * pi * x * x * v_xx
            + (spec.rate + pi * spec.excess()) * x * v_x
    }

    /// Inner HJB expression as a function of the control, for concavity checks.
    pub fn hjb_inner(&self, x: f64, pi: f64) -> f64 {
        let spec = &self.spec;
        let v_x = 1.0 / x;
        let v_xx = -1.0 / (x * x);
        0.5 * spec.sigma * spec.sigma * pi * pi * x * x * v_xx + pi * spec.excess() * x * v_x
    }
}

/// Power-utility terminal wealth: U(x) = x^{1-gamma}/(1-gamma),
/// V(t, x) = U(x) g(t).
#[derive(Clone, Copy, Debug)]
pub struct MertonPowerSolution {
    pub spec: MertonSpec,
    /// (mu - r) / (gamma sigma^2).
    pub allocation: f64,
}

pub fn merton_power(spec: &MertonSpec) -> Result<MertonPowerSolution, ControlError> {
    spec.validate()?;
    if (spec.gamma - 1.0).abs() < 1e-12 {
        return Err(ControlError::Domain("gamma = 1 is the log problem; use merton_log".into()));
    }
    Ok(MertonPowerSolution {
        spec: *spec,
        allocation: spec.excess() / (spec.gamma * spec.sigma * spec.sigma),
    })
}

impl MertonPowerSolution {
    fn utility(&self, x: f64) -> f64 {
        x.powf(1.0 - self.spec.gamma) / (1.0 - self.spec.gamma)
    }

    fn rate_term(&self) -> f64 {
        let spec = &self.spec;
        let e = spec.excess();
        spec.rate + e * e / (2.0 * spec.gamma * spec.sigma * spec.sigma)
    }

    /// g(t) = e^{(1-gamma)(T-t)(r + (mu-r)^2/(2 gamma sigma^2))}.
    pub fn g(&self, t: f64) -> f64 {
        ((1.0 - self.spec.gamma) * (self.spec.horizon - t) * self.rate_term()).exp()
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.utility(x) * self.g(t)
    }

    pub fn certainty_equivalent(&self, t: f64, x: f64) -> f64 {
        let spec = &self.spec;
        let e = spec.excess();
        x * ((spec.horizon - t) * e * e / (2.0 * spec.gamma * spec.sigma * spec.sigma)).exp()
    }

    /// Residual of the nonlinear HJB form
    /// V_t + r x V_x - ((mu - r) V_x)^2 / (2 sigma^2 V_xx).
    pub fn hjb_residual(&self, t: f64, x: f64) -> f64 {
        let spec = &self.spec;
        let gamma = spec.gamma;
        let u = self.utility(x);
        let g = self.g(t);
        let v_t = -(1.0 - gamma) * self.rate_term() * u * g;
        let v_x = (1.0 - gamma) / x * u * g;
        let v_xx = -gamma * (1.0 - gamma) / (x * x) * u * g;
        let e = spec.excess();
        v_t + spec.rate * x * v_x - (e * v_x) * (e * v_x) / (2.0 * spec.sigma * spec.sigma * v_xx)
    }

    pub fn hjb_inner(&self, t: f64, x: f64, pi: f64) -> f64 {
        let spec = &self.spec;
        let gamma = spec.gamma;
        let u = self.utility(x);
        let g = self.g(t);
        let v_x = (1.0 - gamma) / x * u * g;
        let v_xx = -gamma * (1.0 - gamma) / (x * x) * u * g;
        0.5 * spec.sigma * spec.sigma * pi * pi * x * x * v_xx + pi * spec.excess() * x * v_x
    }
}

/// Infinite-horizon log utility of consumption:
/// V(x) = a log(x) + b with a = 1/beta.
#[derive(Clone, Copy, Debug)]
pub struct LogConsumptionSolution {
    pub spec: MertonSpec,
    pub a: f64,
    pub b: f64,
    pub allocation: f64,
    /// Optimal proportional consumption rate c = beta.
    pub consumption_rate: f64,
}

pub fn merton_log_consumption(spec: &MertonSpec) -> Result<LogConsumptionSolution, ControlError> {
    spec.validate()?;
    if !(spec.beta > 0.0) {
        return Err(ControlError::Domain("discount rate beta must be > 0".into()));
    }
    let e = spec.excess();
    let sharpe_sq = e * e / (spec.sigma * spec.sigma);
    let a = 1.0 / spec.beta;
    let b = sharpe_sq / (2.0 * spec.beta * spec.beta) + spec.rate / (spec.beta * spec.beta)
        + (spec.beta.ln() - 1.0) / spec.beta;
    Ok(LogConsumptionSolution {
        spec: *spec,
        a,
        b,
        allocation: e / (spec.sigma * spec.sigma),
        consumption_rate: spec.beta,
    })
}

impl LogConsumptionSolution {
    pub fn value(&self, x: f64) -> f64 {
        self.a * x.ln() + self.b
    }

    /// Residual of the stationary HJB at the optimal (pi, c).
    pub fn hjb_residual(&self, x: f64) -> f64 {
        let spec = &self.spec;
        let v_x = self.a / x;
        let v_xx = -self.a / (x * x);
        let (pi, c) = (self.allocation, self.consumption_rate);
        0.5 * spec.sigma * spec.sigma * pi * pi * x * x * v_xx
            + (spec.rate + pi * spec.excess() - c) * x * v_x
            - spec.beta * self.value(x)
            + (c * x).ln()
    }

    pub fn hjb_inner(&self, x: f64, pi: f64, c: f64) -> f64 {
        let spec = &self.spec;
        let v_x = self.a / x;
        let v_xx = -self.a / (x * x);
        0.5 * spec.sigma * spec.sigma * pi * pi * x * x * v_xx
            + (spec.rate + pi * spec.excess() - c) * x * v_x
            + (c * x).ln()
    }
}

// ---------------------------------------------------------------------
// Stochastic returns (OU drift) with power utility
// ---------------------------------------------------------------------

/// dS/S = Y dt + sigma dW, dY = kappa (mu - Y) dt + beta_vol dB,
/// corr(dW, dB) = rho, power utility with risk aversion gamma.
/// The closed-form treatment requires the mu = r = 0 regime.
#[derive(Clone, Copy, Debug)]
pub struct StochReturnsSpec {
    pub kappa: f64,
    pub mu: f64,
    pub beta_vol: f64,
    pub sigma: f64,
    pub rho: f64,
    pub gamma: f64,
    pub horizon: f64,
}

impl StochReturnsSpec {
    fn validate(&self) -> Result<(), ControlError> {
        if self.rho.abs() >= 1.0 {
            return Err(ControlError::Domain("|rho| must be < 1".into()));
        }
        if !(self.sigma > 0.0 && self.beta_vol > 0.0 && self.kappa > 0.0 && self.gamma > 0.0) {
            return Err(ControlError::Domain(
                "sigma, beta_vol, kappa, gamma must be > 0".into(),
            ));
        }
        if self.mu != 0.0 {
            return Err(ControlError::Domain(
                "the explicit solution assumes the mu = r = 0 regime".into(),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(ControlError::Domain("horizon must be > 0".into()));
        }
        Ok(())
    }

    /// Canonical Riccati coefficients for da/dtau = p a^2 + q a + r:
    /// the value ansatz V = U(x) e^{a(t) y^2 + b(t)} demands
    /// a'(t) = -(P a^2 + Q a + R) with these P, Q, R.
    pub fn riccati_coefficients(&self) -> (f64, f64, f64) {
        let g = self.gamma;
        let p = 2.0 * self.beta_vol * self.beta_vol * (1.0 + (1.0 - g) * self.rho * self.rho / g);
        let q = 2.0 * (self.rho * self.beta_vol * (1.0 - g) / (self.sigma * g) - self.kappa);
        let r = (1.0 - g) / (2.0 * self.sigma * self.sigma * g);
        (p, q, r)
    }
}

#[derive(Clone, Debug)]
pub struct StochReturnsSolution {
    pub spec: StochReturnsSpec,
    riccati: Riccati,
    /// Time-to-horizon at which the value function diverges, when the
    /// Riccati roots are complex.
    pub blowup_tau: Option<f64>,
}

pub fn stoch_returns_solution(spec: &StochReturnsSpec) -> Result<StochReturnsSolution, ControlError> {
    spec.validate()?;
    let (p, q, r) = spec.riccati_coefficients();
    let riccati = Riccati::solve(p, q, r);
    let blowup_tau = riccati.blowup_tau();
    if let Some(tau_star) = blowup_tau {
        if spec.horizon >= tau_star {
            return Err(ControlError::HorizonBeyondBlowup { blowup_tau: tau_star });
        }
    }
    Ok(StochReturnsSolution {
        spec: *spec,
        riccati,
        blowup_tau,
    })
}

impl StochReturnsSolution {
    /// Quadratic value coefficient at calendar time t: g = e^{a y^2 + b}.
    pub fn a(&self, t: f64) -> f64 {
        self.riccati.a(self.spec.horizon - t)
    }

    /// b(t) = beta_vol^2 Int a (terminal condition b(T) = 0).
    pub fn b(&self, t: f64) -> f64 {
        self.spec.beta_vol * self.spec.beta_vol * self.riccati.integral(self.spec.horizon - t)
    }

    /// Optimal allocation pi(t, y) = y (1 + 2 rho beta sigma a) / (gamma sigma^2).
    pub fn allocation(&self, t: f64, y: f64) -> f64 {
        let s = &self.spec;
        y * (1.0 + 2.0 * s.rho * s.beta_vol * s.sigma * self.a(t)) / (s.gamma * s.sigma * s.sigma)
    }

    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        let g = self.spec.gamma;
        x.powf(1.0 - g) / (1.0 - g) * (self.a(t) * y * y + self.b(t)).exp()
    }

    /// Residual of the full HJB at the optimum, from analytic partials;
    /// a'(t) and b'(t) come from the Riccati ODE itself.
    pub fn hjb_residual(&self, t: f64, x: f64, y: f64) -> f64 {
        let s = &self.spec;
        let gamma = s.gamma;
        let (p, q, r) = s.riccati_coefficients();
        let a = self.a(t);
        let b = self.b(t);
        let a_dot_t = -(p * a * a + q * a + r); // da/dt
        let b_dot_t = -s.beta_vol * s.beta_vol * a;
        let u = x.powf(1.0 - gamma) / (1.0 - gamma);
        let g_val = (a * y * y + b).exp();
        let v = u * g_val;
        let v_t = (a_dot_t * y * y + b_dot_t) * v;
        let v_x = (1.0 - gamma) * v / x;
        let v_xx = -gamma * (1.0 - gamma) * v / (x * x);
        let v_y = 2.0 * a * y * v;
        let v_yy = (2.0 * a + 4.0 * a * a * y * y) * v;
        let v_xy = (1.0 - gamma) / x * 2.0 * a * y * v;
        let pi = self.allocation(t, y);
        v_t + 0.5 * s.beta_vol * s.beta_vol * v_yy - s.kappa * y * v_y
            + 0.5 * s.sigma * s.sigma * x * x * pi * pi * v_xx
            + pi * x * y * v_x
            + s.rho * pi * x * s.beta_vol * s.sigma * v_xy
    }

    pub fn hjb_inner(&self, t: f64, x: f64, y: f64, pi: f64) -> f64 {
        let s = &self.spec;
        let gamma = s.gamma;
        let v = self.value(t, x, y);
        let v_x = (1.0 - gamma) * v / x;
        let v_xx = -gamma * (1.0 - gamma) * v / (x * x);
        let v_xy = (1.0 - gamma) / x * 2.0 * self.a(t) * y * v;
        0.5 * s.sigma * s.sigma * x * x * pi * pi * v_xx
            + pi * x * y * v_x
            + s.rho * pi * x * s.beta_vol * s.sigma * v_xy
    }
}

// ---------------------------------------------------------------------
// Exponential utility under stochastic volatility: distortion transform
// ---------------------------------------------------------------------

pub type YFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficient functions of dY = alpha(y) dt + beta(y) dB and the asset's
/// Sharpe ratio lambda(y) = (mu(y) - r) / sigma(y); corr(dW, dB) = rho.
#[derive(Clone)]
pub struct SvControlModel {
    pub alpha: YFn,
    pub beta: YFn,
    pub sharpe: YFn,
    pub rho: f64,
}

/// Linear PDE obtained from g = psi^q:
/// psi_t + diffusion psi_yy + drift psi_y - decay psi = 0.
#[derive(Clone)]
pub struct LinearPdeCoefficients {
    model: SvControlModel,
    pub q: f64,
}

impl LinearPdeCoefficients {
    pub fn diffusion(&self, y: f64) -> f64 {
        let b = (self.model.beta)(y);
        0.5 * b * b
    }

    pub fn drift(&self, y: f64) -> f64 {
        (self.model.alpha)(y) - self.model.rho * (self.model.sharpe)(y) * (self.model.beta)(y)
    }

    pub fn decay(&self, y: f64) -> f64 {
        let l = (self.model.sharpe)(y);
        l * l / (2.0 * self.q)
    }
}

#[derive(Clone, Debug)]
pub struct DistortionReport {
    /// Candidate exponents (1/(1+rho^2), 1/(1-rho^2)) and their residuals.
    pub candidates: (f64, f64),
    pub residuals: (f64, f64),
    pub q_selected: f64,
    pub residual_selected: f64,
}

/// Residual left in the nonlinear equation when g = psi^q is substituted
/// and psi is charged with the linear equation: anything nonzero means q
/// fails to linearize. Evaluated with analytic derivatives of a
/// manufactured psi, so the result is free of discretization error.
fn distortion_excess(model: &SvControlModel, q: f64, y_grid: &[f64]) -> f64 {
    // psi = exp(y/2 + const): psi_y = psi/2, psi_yy = psi/4, any psi_t
    // cancels between the two operators
    let mut worst: f64 = 0.0;
    for &y in y_grid {
        let psi: f64 = (0.5 * y).exp();
        let psi_y = 0.5 * psi;
        let psi_yy = 0.25 * psi;
        let psi_t = 0.3 * psi; // arbitrary; cancels exactly
        let alpha = (model.alpha)(y);
        let beta = (model.beta)(y);
        let lambda = (model.sharpe)(y);
        let g = psi.powf(q);
        let g_t = q * g / psi * psi_t;
        let g_y = q * g / psi * psi_y;
        let g_yy = q * g * (psi_yy / psi + (q - 1.0) * (psi_y / psi) * (psi_y / psi));
        let ratio = lambda + model.rho * beta * g_y / g;
        let nonlinear = g_t + 0.5 * beta * beta * g_yy + alpha * g_y - 0.5 * ratio * ratio * g;
        let linear = psi_t + 0.5 * beta * beta * psi_yy + (alpha - model.rho * lambda * beta) * psi_y
            - lambda * lambda / (2.0 * q) * psi;
        let excess = nonlinear - q * psi.powf(q - 1.0) * linear;
        worst = worst.max(excess.abs());
    }
    worst
}

/// Resolve the distortion exponent empirically and return the linear PDE
/// coefficients for the winner. Candidates are 1/(1+rho^2) and
/// 1/(1-rho^2); the one whose substitution residual vanishes is selected.
pub fn exp_utility_sv_transform(
    model: &SvControlModel,
) -> Result<(LinearPdeCoefficients, DistortionReport), ControlError> {
    if model.rho.abs() >= 1.0 {
        return Err(ControlError::Domain("|rho| must be < 1".into()));
    }
    let rho2 = model.rho * model.rho;
    let candidates = (1.0 / (1.0 + rho2), 1.0 / (1.0 - rho2));
    let y_grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let residuals = (
        distortion_excess(model, candidates.0, &y_grid),
        distortion_excess(model, candidates.1, &y_grid),
    );
    let (q_selected, residual_selected) = if residuals.0 <= 1e-8 {
        (candidates.0, residuals.0)
    } else if residuals.1 <= 1e-8 {
        (candidates.1, residuals.1)
    } else {
        return Err(ControlError::NoLinearizingExponent { residuals });
    };
    let report = DistortionReport {
        candidates,
        residuals,
        q_selected,
        residual_selected,
    };
    Ok((
        LinearPdeCoefficients {
            model: model.clone(),
            q: q_selected,
        },
        report,
    ))
}

// ---------------------------------------------------------------------
// Fully affine square-root variance model
// ---------------------------------------------------------------------

/// Futures with dF/F = mu Y dt + sqrt(Y) dW, dY = kappa (y_bar - Y) dt +
/// beta sqrt(Y) dB; exponential utility of terminal wealth.
#[derive(Clone, Copy, Debug)]
pub struct AffineHestonSpec {
    pub kappa: f64,
    pub y_bar: f64,
    pub beta: f64,
    pub rho: f64,
    pub mu: f64,
    pub gamma: f64,
    pub rate: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug)]
pub struct AffineHestonSolution {
    pub spec: AffineHestonSpec,
    pub q: f64,
    /// gamma^2 <= 2 kappa y_bar diagnostic for the variance factor.
    pub feller_satisfied: bool,
    riccati: Riccati,
}

/// Solve the exponential ODE system psi = e^{a(t) y + b(t)}:
/// a' + (beta^2/2) a^2 - (kappa + rho mu beta) a - mu^2/(2q) = 0,
/// b' + kappa y_bar a = 0, a(T) = b(T) = 0. The distortion exponent q is
/// selected at runtime by the residual test, never assumed.
pub fn affine_heston_control(spec: &AffineHestonSpec) -> Result<AffineHestonSolution, ControlError> {
    if spec.rho.abs() >= 1.0 {
        return Err(ControlError::Domain("|rho| must be < 1".into()));
    }
    if !(spec.kappa > 0.0 && spec.y_bar > 0.0 && spec.beta > 0.0 && spec.gamma > 0.0) {
        return Err(ControlError::Domain("kappa, y_bar, beta, gamma must be > 0".into()));
    }
    if !(spec.horizon > 0.0) {
        return Err(ControlError::Domain("horizon must be > 0".into()));
    }
    let s = *spec;
    let model = SvControlModel {
        alpha: Arc::new(move |y: f64| s.kappa * (s.y_bar - y)),
        beta: Arc::new(move |y: f64| s.beta * y.abs().sqrt()),
        sharpe: Arc::new(move |y: f64| s.mu * y.abs().sqrt()),
        rho: s.rho,
    };
    let (_, report) = exp_utility_sv_transform(&model)?;
    let q = report.q_selected;
    // a'(t) = (beta^2/2) a^2 ... in tau: da/dtau = p a^2 + q a + r
    let p = 0.5 * spec.beta * spec.beta;
    let q_coef = -(spec.kappa + spec.rho * spec.mu * spec.beta);
    let r = -spec.mu * spec.mu / (2.0 * q);
    let riccati = Riccati::solve(p, q_coef, r);
    if let Some(tau_star) = riccati.blowup_tau() {
        if spec.horizon >= tau_star {
            return Err(ControlError::RiccatiBlowup { blowup_tau: tau_star });
        }
    }
    Ok(AffineHestonSolution {
        spec: *spec,
        q,
        feller_satisfied: spec.beta * spec.beta <= 2.0 * spec.kappa * spec.y_bar,
        riccati,
    })
}

impl AffineHestonSolution {
    pub fn a(&self, t: f64) -> f64 {
        self.riccati.a(self.spec.horizon - t)
    }

    /// b from the quadrature of the explicit a: b(t) = kappa y_bar Int_t^T a.
    pub fn b(&self, t: f64) -> f64 {
        let tau = self.spec.horizon - t;
        let s = &self.spec;
        s.kappa * s.y_bar * integrate_composite(|u| self.riccati.a(u), 0.0, tau, 16, 16)
    }

    /// V(t, x, y) = U(x e^{r(T-t)}) psi^q with psi = e^{a y + b}.
    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        let s = &self.spec;
        let tau = s.horizon - t;
        let z = x * (s.rate * tau).exp();
        -(1.0 / s.gamma) * (-s.gamma * z + self.q * (self.a(t) * y + self.b(t))).exp()
    }

    /// Optimal futures position: e^{-r tau}(mu + rho beta q a)/gamma.
    pub fn allocation(&self, t: f64) -> f64 {
        let s = &self.spec;
        let tau = s.horizon - t;
        (-s.rate * tau).exp() * (s.mu + s.rho * s.beta * self.q * self.a(t)) / s.gamma
    }

    /// Full HJB residual at the optimum from analytic partials.
    pub fn hjb_residual(&self, t: f64, x: f64, y: f64) -> f64 {
        let s = &self.spec;
        let tau = s.horizon - t;
        let q = self.q;
        let a = self.a(t);
        let p_c = 0.5 * s.beta * s.beta;
        let q_c = -(s.kappa + s.rho * s.mu * s.beta);
        let r_c = -s.mu * s.mu / (2.0 * q);
        let a_dot_t = -(p_c * a * a + q_c * a + r_c);
        let b_dot_t = -s.kappa * s.y_bar * a;
        let e_r = (s.rate * tau).exp();
        let v = self.value(t, x, y);
        let v_t = v * (s.gamma * s.rate * x * e_r + q * (a_dot_t * y + b_dot_t));
        let v_x = v * (-s.gamma * e_r);
        let v_xx = v * s.gamma * s.gamma * e_r * e_r;
        let v_y = v * q * a;
        let v_yy = v * q * q * a * a;
        let v_xy = v * (-s.gamma * e_r) * q * a;
        let pi = self.allocation(t);
        v_t + s.rate * x * v_x
            + 0.5 * s.beta * s.beta * y * v_yy
            + s.kappa * (s.y_bar - y) * v_y
            + 0.5 * pi * pi * y * v_xx
            + pi * y * (s.mu * v_x + s.rho * s.beta * v_xy)
    }

    pub fn hjb_inner(&self, t: f64, x: f64, y: f64, pi: f64) -> f64 {
        let s = &self.spec;
        let tau = s.horizon - t;
        let e_r = (s.rate * tau).exp();
        let v = self.value(t, x, y);
        let v_x = v * (-s.gamma * e_r);
        let v_xx = v * s.gamma * s.gamma * e_r * e_r;
        let v_xy = v * (-s.gamma * e_r) * self.q * self.a(t);
        0.5 * pi * pi * y * v_xx + pi * y * (s.mu * v_x + s.rho * s.beta * v_xy)
    }
}

// ---------------------------------------------------------------------
// Indifference pricing
// ---------------------------------------------------------------------

/// Utility-indifference price of a short claim under exponential utility:
/// the cash p with U(p e^{r tau}) = g_plain / g_hedged, i.e.
/// p = e^{-r tau} log(g_hedged / g_plain) / gamma.
pub fn indifference_price(
    g_plain: f64,
    g_hedged: f64,
    gamma: f64,
    rate: f64,
    tau: f64,
) -> Result<f64, ControlError> {
    if !(g_plain > 0.0 && g_hedged > 0.0) {
        return Err(ControlError::Domain("g values must be positive".into()));
    }
    if !(gamma > 0.0) {
        return Err(ControlError::Domain("gamma must be > 0".into()));
    }
    Ok((-rate * tau).exp() * (g_hedged / g_plain).ln() / gamma)
}

// ---------------------------------------------------------------------

/// Integrate the canonical Riccati numerically (oracle for the explicit
/// solutions); returns Err(tau) at the divergence time when |a| passes 1e6.
pub fn riccati_numeric(p: f64, q: f64, r: f64, tau_end: f64) -> Result<f64, f64> {
    terminal_state(
        |_, y| vec![p * y[0] * y[0] + q * y[0] + r],
        0.0,
        tau_end,
        &[0.0],
        &OdeOptions::default(),
    )
    .map(|y| y[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> MertonSpec {
        MertonSpec {
            mu: 0.07,
            rate: 0.02,
            sigma: 0.2,
            gamma: 2.0,
            beta: 0.05,
            horizon: 2.0,
        }
    }

    #[test]
    fn log_allocation_and_certainty_equivalent() {
        let sol = merton_log(&base_spec()).unwrap();
        assert!((sol.allocation - 1.25).abs() < 1e-14);
        // CE at T - t = 2 with (mu - r)^2/(2 sigma^2) = 0.03125
        let ce = sol.certainty_equivalent(0.0, 1.0);
        assert!((ce - (2.0 * 0.03125f64).exp()).abs() < 1e-14);

        let flat = merton_log(&MertonSpec { mu: 0.02, ..base_spec() }).unwrap();
        assert_eq!(flat.allocation, 0.0);
        assert!((flat.certainty_equivalent(0.5, 3.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn log_hjb_residual_on_grid() {
        let sol = merton_log(&base_spec()).unwrap();
        for i in 1..=50 {
            for j in 0..50 {
                let x = 0.2 + 0.2 * i as f64;
                let t = 2.0 * j as f64 / 50.0;
                assert!(sol.hjb_residual(t, x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_allocation_and_residual_grid() {
        let sol = merton_power(&base_spec()).unwrap();
        assert!((sol.allocation - 0.625).abs() < 1e-14);
        let mut worst: f64 = 0.0;
        for i in 1..=50 {
            for j in 0..50 {
                let x = 0.2 + 0.2 * i as f64;
                let t = 2.0 * j as f64 / 50.0;
                worst = worst.max(sol.hjb_residual(t, x).abs());
            }
        }
        assert!(worst < 1e-8, "max residual {worst}");
    }

    #[test]
    fn power_approaches_log_as_gamma_to_one() {
        let log_sol = merton_log(&base_spec()).unwrap();
        let near = merton_power(&MertonSpec { gamma: 1.0 + 1e-6, ..base_spec() }).unwrap();
        assert!((near.allocation - log_sol.allocation).abs() < 1e-5);
        assert!(merton_power(&MertonSpec { gamma: 1.0, ..base_spec() }).is_err());
    }

    #[test]
    fn power_value_partials_match_finite_differences() {
        let sol = merton_power(&base_spec()).unwrap();
        let (t, x) = (0.7, 1.3);
        let h = 1e-5;
        let fd_t = (sol.value(t + h, x) - sol.value(t - h, x)) / (2.0 * h);
        let spec = base_spec();
        let analytic_t = -(1.0 - spec.gamma)
            * (spec.rate + spec.excess() * spec.excess() / (2.0 * spec.gamma * spec.sigma * spec.sigma))
            * sol.value(t, x);
        assert!((fd_t - analytic_t).abs() < 1e-6 * analytic_t.abs().max(1.0));
        let fd_x = (sol.value(t, x + h) - sol.value(t, x - h)) / (2.0 * h);
        let analytic_x = (1.0 - spec.gamma) * sol.value(t, x) / x;
        assert!((fd_x - analytic_x).abs() < 1e-6 * analytic_x.abs().max(1.0));
    }

    #[test]
    fn power_scaling_covariance() {
        let sol = merton_power(&base_spec()).unwrap();
        let gamma = base_spec().gamma;
        let lam: f64 = 3.5;
        let v1 = sol.value(0.3, 1.0);
        let v2 = sol.value(0.3, lam);
        assert!((v2 - lam.powf(1.0 - gamma) * v1).abs() < 1e-12 * v1.abs());
    }

    #[test]
    fn power_concavity_around_optimum() {
        let sol = merton_power(&base_spec()).unwrap();
        for i in 1..=20 {
            let x = 0.5 * i as f64;
            let t = 0.1 * i as f64;
            let at_opt = sol.hjb_inner(t, x, sol.allocation);
            assert!(sol.hjb_inner(t, x, sol.allocation + 1e-3) < at_opt);
            assert!(sol.hjb_inner(t, x, sol.allocation - 1e-3) < at_opt);
        }
    }

    #[test]
    fn log_consumption_coefficients() {
        // beta = 0.05, mu - r = 0.05, sigma = 0.2: a = 20, c = 0.05, pi = 1.25
        let sol = merton_log_consumption(&base_spec()).unwrap();
        assert!((sol.a - 20.0).abs() < 1e-12);
        assert!((sol.consumption_rate - 0.05).abs() < 1e-14);
        assert!((sol.allocation - 1.25).abs() < 1e-14);

        // mu = r case: c = beta, pi = 0, b = r/beta^2 + (log beta - 1)/beta
        let spec = MertonSpec { mu: 0.02, beta: 0.1, ..base_spec() };
        let sol = merton_log_consumption(&spec).unwrap();
        assert_eq!(sol.allocation, 0.0);
        assert!((sol.consumption_rate - 0.1).abs() < 1e-14);
        let want_b = 0.02 / 0.01 + (0.1f64.ln() - 1.0) / 0.1;
        assert!((sol.b - want_b).abs() < 1e-12);
    }

    #[test]
    fn log_consumption_residual_random_wealth() {
        let sol = merton_log_consumption(&base_spec()).unwrap();
        use rand::rngs::SmallRng;
        use rand::{Rng, SeedableRng};
        let mut rng = SmallRng::seed_from_u64(2);
        for _ in 0..100 {
            let x = rng.random_range(0.01..100.0);
            assert!(sol.hjb_residual(x).abs() < 1e-10, "x = {x}");
        }
    }

    fn real_root_spec() -> StochReturnsSpec {
        // gamma > 1 with rho = 0: discriminant = kappa^2 - beta^2 (1-gamma)/(sigma^2 gamma)
        // exceeds kappa^2, so the roots are real and nothing blows up
        StochReturnsSpec {
            kappa: 0.5,
            mu: 0.0,
            beta_vol: 0.3,
            sigma: 0.25,
            rho: 0.0,
            gamma: 2.0,
            horizon: 3.0,
        }
    }

    fn complex_root_spec() -> StochReturnsSpec {
        StochReturnsSpec {
            kappa: 0.1,
            mu: 0.0,
            beta_vol: 0.5,
            sigma: 0.2,
            rho: 0.9,
            gamma: 0.5,
            horizon: 0.25,
        }
    }

    #[test]
    fn real_roots_have_no_blowup_and_terminal_conditions_hold() {
        let spec = real_root_spec();
        let (p, q, r) = spec.riccati_coefficients();
        assert!(0.25 * q * q - p * r > 0.0, "expected real roots");
        let sol = stoch_returns_solution(&spec).unwrap();
        assert!(sol.blowup_tau.is_none());
        assert_eq!(sol.a(spec.horizon), 0.0);
        assert_eq!(sol.b(spec.horizon), 0.0);
    }

    #[test]
    fn explicit_riccati_matches_numerical_integration() {
        let spec = real_root_spec();
        let (p, q, r) = spec.riccati_coefficients();
        let sol = stoch_returns_solution(&spec).unwrap();
        for tau in [0.1, 0.5, 1.0, 2.0, 3.0] {
            let numeric = riccati_numeric(p, q, r, tau).unwrap();
            let explicit = sol.a(spec.horizon - tau);
            assert!(
                (numeric - explicit).abs() < 1e-8,
                "tau {tau}: {explicit} vs {numeric}"
            );
        }
        // b against numerical quadrature of the numerical a
        let tau = 2.0;
        let n = 2000;
        let mut acc = 0.0;
        for i in 0..n {
            let u = tau * (i as f64 + 0.5) / n as f64;
            acc += riccati_numeric(p, q, r, u).unwrap();
        }
        let b_numeric = spec.beta_vol * spec.beta_vol * acc * tau / n as f64;
        let b_explicit = sol.b(spec.horizon - tau);
        assert!((b_numeric - b_explicit).abs() < 1e-6, "{b_explicit} vs {b_numeric}");
    }

    #[test]
    fn blowup_time_matches_numerical_divergence() {
        let spec = complex_root_spec();
        let (p, q, r) = spec.riccati_coefficients();
        let sol = stoch_returns_solution(&spec).unwrap();
        let tau_star = sol.blowup_tau.expect("complex roots must report blowup");
        // numerical Riccati diverges within 1e-3 of the formula
        let err = riccati_numeric(p, q, r, tau_star + 0.05).unwrap_err();
        assert!(
            (err - tau_star).abs() < 1e-3,
            "formula {tau_star} vs numeric divergence {err}"
        );
        // horizon at or past the blowup is rejected
        let long = StochReturnsSpec { horizon: tau_star + 0.01, ..spec };
        assert!(matches!(
            stoch_returns_solution(&long),
            Err(ControlError::HorizonBeyondBlowup { .. })
        ));
    }

    #[test]
    fn stoch_returns_hjb_residual_grid() {
        let sol = stoch_returns_solution(&real_root_spec()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 1..=20 {
            for j in 0..20 {
                for l in 0..5 {
                    let x = 0.3 * i as f64;
                    let t = 3.0 * j as f64 / 20.0;
                    let y = -0.2 + 0.1 * l as f64;
                    let v = sol.value(t, x, y).abs();
                    worst = worst.max(sol.hjb_residual(t, x, y).abs() / v.max(1e-12));
                }
            }
        }
        assert!(worst < 1e-8, "max scaled residual {worst}");
    }

    #[test]
    fn stoch_returns_concavity() {
        let sol = stoch_returns_solution(&real_root_spec()).unwrap();
        for l in 0..5 {
            let y = -0.2 + 0.1 * l as f64;
            let pi = sol.allocation(1.0, y);
            let at_opt = sol.hjb_inner(1.0, 2.0, y, pi);
            assert!(sol.hjb_inner(1.0, 2.0, y, pi + 1e-3) < at_opt);
            assert!(sol.hjb_inner(1.0, 2.0, y, pi - 1e-3) < at_opt);
        }
    }

    #[test]
    fn distortion_exponent_selected_by_residual() {
        let model = SvControlModel {
            alpha: Arc::new(|y: f64| 1.0 - y),
            beta: Arc::new(|_| 0.5),
            sharpe: Arc::new(|y: f64| 0.25 + 0.1 * y),
            rho: 0.5,
        };
        let (coeffs, report) = exp_utility_sv_transform(&model).unwrap();
        // 1/(1 - rho^2) linearizes; 1/(1 + rho^2) leaves an O(1) residual
        assert!((report.q_selected - 1.0 / (1.0 - 0.25)).abs() < 1e-14);
        assert!(report.residual_selected <= 1e-8);
        assert!(report.residuals.0 >= 1e-3, "rejected residual {}", report.residuals.0);
        assert_eq!(coeffs.q, report.q_selected);
    }

    #[test]
    fn distortion_trivial_for_zero_correlation() {
        let model = SvControlModel {
            alpha: Arc::new(|y: f64| -y),
            beta: Arc::new(|_| 0.4),
            sharpe: Arc::new(|_| 0.3),
            rho: 0.0,
        };
        let (coeffs, report) = exp_utility_sv_transform(&model).unwrap();
        assert_eq!(report.candidates, (1.0, 1.0));
        assert!(report.residual_selected < 1e-14);
        // pi* reduces to (mu - r)/(gamma sigma^2) discounting aside: the
        // drift correction vanishes with rho
        assert!((coeffs.drift(0.3) - (-0.3)).abs() < 1e-14);
    }

    #[test]
    fn constant_coefficient_decay_solution() {
        // sigma(y) = sigma, beta = 0: psi solves pure decay and
        // g = psi^q = e^{-(mu-r)^2 tau / (2 sigma^2)}
        let lambda = 0.3; // (mu - r)/sigma
        let model = SvControlModel {
            alpha: Arc::new(|_| 0.0),
            beta: Arc::new(|_| 0.0),
            sharpe: Arc::new(move |_| lambda),
            rho: 0.4,
        };
        let (coeffs, report) = exp_utility_sv_transform(&model).unwrap();
        let tau = 1.7;
        let psi = (-coeffs.decay(0.0) * tau).exp();
        let g = psi.powf(report.q_selected);
        let want = (-lambda * lambda * tau / 2.0).exp();
        assert!((g - want).abs() < 1e-14, "{g} vs {want}");
    }

    fn affine_spec() -> AffineHestonSpec {
        AffineHestonSpec {
            kappa: 2.0,
            y_bar: 0.04,
            beta: 0.25,
            rho: -0.5,
            mu: 0.5,
            gamma: 1.0,
            rate: 0.0,
            horizon: 1.0,
        }
    }

    #[test]
    fn affine_terminal_conditions_and_feller() {
        let sol = affine_heston_control(&affine_spec()).unwrap();
        assert_eq!(sol.a(1.0), 0.0);
        assert!(sol.b(1.0).abs() < 1e-15);
        assert!(sol.feller_satisfied); // 0.0625 <= 0.16
        assert!((sol.q - 1.0 / (1.0 - 0.25)).abs() < 1e-14);
    }

    #[test]
    fn affine_explicit_matches_numerical_ode() {
        let spec = affine_spec();
        let sol = affine_heston_control(&spec).unwrap();
        let p = 0.5 * spec.beta * spec.beta;
        let q_c = -(spec.kappa + spec.rho * spec.mu * spec.beta);
        let r = -spec.mu * spec.mu / (2.0 * sol.q);
        for tau in [0.1, 0.25, 0.5, 0.75, 1.0] {
            let numeric = riccati_numeric(p, q_c, r, tau).unwrap();
            let explicit = sol.a(spec.horizon - tau);
            assert!((numeric - explicit).abs() < 1e-8, "tau {tau}");
        }
        // b against the ODE b' = -kappa y_bar a integrated alongside
        let out = terminal_state(
            |_, y| {
                vec![
                    p * y[0] * y[0] + q_c * y[0] + r,
                    spec.kappa * spec.y_bar * y[0],
                ]
            },
            0.0,
            1.0,
            &[0.0, 0.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((out[1] - sol.b(0.0)).abs() < 1e-8, "{} vs {}", out[1], sol.b(0.0));
    }

    #[test]
    fn affine_zero_premium_is_trivial() {
        let sol = affine_heston_control(&AffineHestonSpec { mu: 0.0, ..affine_spec() }).unwrap();
        for t in [0.0, 0.3, 0.9] {
            assert_eq!(sol.a(t), 0.0);
            assert!(sol.b(t).abs() < 1e-15);
        }
        // value reduces to U(x e^{r tau})
        let v = sol.value(0.0, 1.5, 0.04);
        assert!((v - (-(1.0f64) * (-1.0 * 1.5f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn affine_hjb_residual_grid() {
        let sol = affine_heston_control(&affine_spec()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..50 {
            for j in 1..=50 {
                let t = i as f64 / 50.0;
                let y = 0.005 + 0.004 * j as f64;
                let x = 0.5 + 0.05 * j as f64;
                let v = sol.value(t, x, y).abs();
                worst = worst.max(sol.hjb_residual(t, x, y).abs() / v.max(1e-12));
            }
        }
        assert!(worst < 1e-8, "max scaled residual {worst}");
    }

    #[test]
    fn affine_matches_general_transform_pde() {
        // psi = e^{a y + b} satisfies the linear PDE produced by the
        // general transform for the affine coefficient functions
        let spec = affine_spec();
        let sol = affine_heston_control(&spec).unwrap();
        let s = spec;
        let model = SvControlModel {
            alpha: Arc::new(move |y: f64| s.kappa * (s.y_bar - y)),
            beta: Arc::new(move |y: f64| s.beta * y.abs().sqrt()),
            sharpe: Arc::new(move |y: f64| s.mu * y.abs().sqrt()),
            rho: s.rho,
        };
        let (coeffs, _) = exp_utility_sv_transform(&model).unwrap();
        let p = 0.5 * spec.beta * spec.beta;
        let q_c = -(spec.kappa + spec.rho * spec.mu * spec.beta);
        let r = -spec.mu * spec.mu / (2.0 * sol.q);
        for t in [0.0, 0.4, 0.8] {
            for y in [0.01, 0.04, 0.1] {
                let a = sol.a(t);
                let b = sol.b(t);
                let psi = (a * y + b).exp();
                let a_dot = -(p * a * a + q_c * a + r);
                let b_dot = -spec.kappa * spec.y_bar * a;
                let psi_t = (a_dot * y + b_dot) * psi;
                let psi_y = a * psi;
                let psi_yy = a * a * psi;
                let residual = psi_t + coeffs.diffusion(y) * psi_yy + coeffs.drift(y) * psi_y
                    - coeffs.decay(y) * psi;
                assert!(residual.abs() < 1e-8, "t={t} y={y}: {residual}");
            }
        }
    }

    #[test]
    fn indifference_price_inversion() {
        assert_eq!(indifference_price(2.0, 2.0, 1.3, 0.05, 1.0).unwrap(), 0.0);
        let p = indifference_price(1.0, std::f64::consts::E, 1.0, 0.0, 1.0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(indifference_price(0.7, 0.9, 2.0, 0.0, 1.0).unwrap() > 0.0);
        assert!(indifference_price(-1.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn indifference_price_replicates_forward() {
        // complete-market check: hedging a forward payoff S_T - K shifts g
        // by the scaling e^{gamma p0 e^{r tau}}, so the indifference price
        // is exactly the model-free forward value
        let (s0, k, r, tau, gamma) = (50.0, 48.0, 0.03, 0.75, 1.7);
        let p0 = s0 - k * f64::exp(-r * tau);
        let g_plain = 0.8;
        let g_hedged = g_plain * (gamma * p0 * f64::exp(r * tau)).exp();
        let p = indifference_price(g_plain, g_hedged, gamma, r, tau).unwrap();
        assert!((p - p0).abs() < 1e-10, "{p} vs {p0}");
    }
}

//! Derivatives pricing, volatility-surface calibration, and optimal-investment engine.
//!
//! The crate is organized around independently testable pricing routes that
//! cross-validate one another:
//!
//! - [`market`]: discrete time-space markets: replication, equivalent
//!   martingale measures, and arbitrage detection by linear programming.
//! - [`analytic`]: closed-form European pricing (Black-Scholes with
//!   dividends, Black-76 on futures, Margrabe exchange options) and the
//!   full Greek set.
//! - [`vol`]: implied-volatility inversion, SVI slice fitting with
//!   no-arbitrage checks, and Dupire local-volatility extraction.
//! - [`fourier`]: characteristic-function models (GBM, Heston, Merton
//!   jump diffusion) priced by Gil-Pelaez inversion and by payoff
//!   transforms along regularity strips.
//! - [`mc`]: Monte Carlo path simulation (exact GBM, log-Euler, local
//!   vol, exponential-OU stochastic vol, implicit square-root Heston)
//!   with seeded, reproducible substreams.
//! - [`pde`]: binomial trees for American/Bermuda exercise and
//!   Crank-Nicolson finite differences, including the reduced-dimension
//!   Asian equation.
//! - [`control`]: closed-form and ODE-based solutions of
//!   Hamilton-Jacobi-Bellman problems (log/power/exponential utility,
//!   stochastic returns with finite-time blowup, affine variance models,
//!   indifference pricing).

pub mod analytic;
pub mod control;
pub mod fourier;
pub mod market;
pub mod mc;
pub mod numerics;
pub mod pde;
pub mod vol;

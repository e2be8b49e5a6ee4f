//! Cross-module consistency: every pricing route is validated against an
//! independent route built from different machinery.

use pricer_core::analytic::{
    bs_price, discrete_dividend_forward, margrabe_price, BsParams, ExchangeSpec, OptionKind,
    OptionSpec,
};
use pricer_core::fourier::{
    heston_explicit_price, price_call_gil_pelaez, CharFnModel, ModelDynamics, QuadratureConfig,
};
use pricer_core::mc::{self, Scheme, SchemeConfig, VolFn};
use pricer_core::numerics::mean_and_se;
use pricer_core::pde::{fd_solve_asian_reduced, FdConfig};
use pricer_core::vol::{
    check_butterfly_arbitrage, check_calendar_arbitrage, dupire_local_vol, fit_svi, implied_vol,
    LocalVolGrid, SurfaceGrid,
};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use std::sync::Arc;

fn heston_model() -> CharFnModel {
    CharFnModel {
        dynamics: ModelDynamics::Heston {
            kappa: 1.15,
            x_bar: 0.04,
            gamma: 0.2,
            rho: -0.4,
            x0: 0.04,
            rate: 0.02,
        },
        spot: 50.0,
        horizon: 0.5,
    }
}

#[test]
fn margrabe_matches_two_asset_mc() {
    let spec = ExchangeSpec {
        s1: 55.0,
        s2: 50.0,
        sigma1: 0.2,
        sigma2: 0.3,
        rho: -0.5,
        time_to_maturity: 0.5,
    };
    let analytic = margrabe_price(&spec).unwrap().price;

    // terminal draws of two correlated lognormals under the EMM (r = 0.03;
    // the exchange price is rate-free, so any r must wash out)
    let r = 0.03;
    let t = spec.time_to_maturity;
    let n = 400_000;
    let mut rng = SmallRng::seed_from_u64(2024);
    let mut payoffs = Vec::with_capacity(n);
    let orth = (1.0 - spec.rho * spec.rho).sqrt();
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w1 = z1;
        let w2 = spec.rho * z1 + orth * z2;
        let s1 = spec.s1 * ((r - 0.5 * spec.sigma1 * spec.sigma1) * t + spec.sigma1 * t.sqrt() * w1).exp();
        let s2 = spec.s2 * ((r - 0.5 * spec.sigma2 * spec.sigma2) * t + spec.sigma2 * t.sqrt() * w2).exp();
        payoffs.push((-r * t).exp() * (s1 - s2).max(0.0));
    }
    let (mean, se) = mean_and_se(&payoffs);
    assert!(
        (mean - analytic).abs() < 3.0 * se,
        "margrabe {analytic} vs mc {mean} +- {se}"
    );
}

#[test]
fn discrete_dividend_forward_matches_mc() {
    // log S_T = log S_0 + (r - sigma^2/2) T + sigma W_T - sum delta_i
    let (s0, r, sigma, t) = (100.0, 0.04, 0.25, 1.5);
    let dividends = [0.015, 0.02];
    let fwd = discrete_dividend_forward(s0, r, t, &dividends).unwrap();

    let n = 400_000;
    let mut rng = SmallRng::seed_from_u64(7);
    let drop: f64 = dividends.iter().sum();
    let mut terminals = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let log_s = s0.ln() + (r - 0.5 * sigma * sigma) * t + sigma * t.sqrt() * z - drop;
        terminals.push(log_s.exp());
    }
    let (mean, se) = mean_and_se(&terminals);
    assert!((mean - fwd).abs() < 3.0 * se, "forward {fwd} vs mc {mean} +- {se}");
}

#[test]
fn heston_mc_agrees_with_fourier() {
    let model = heston_model();
    let fourier = heston_explicit_price(&model, 50.0, &QuadratureConfig::default()).unwrap();
    let config = SchemeConfig {
        scheme: Scheme::HestonImplicit {
            rate: 0.02,
            kappa: 1.15,
            x_bar: 0.04,
            gamma: 0.2,
            rho: -0.4,
            x0: 0.04,
        },
        step_count: 128,
        horizon: 0.5,
        initial_state: 50.0,
    };
    let est = mc::price_european(&config, &OptionSpec::call(50.0), 400_000, 11).unwrap();
    assert!(
        (est.mean - fourier.price).abs() < 3.0 * est.std_error,
        "fourier {} vs mc {} +- {}",
        fourier.price,
        est.mean,
        est.std_error
    );
}

#[test]
fn asian_pde_agrees_with_mc() {
    let params = BsParams::new(50.0, 0.02, 0.0, 0.2, 0.25);
    let pde = fd_solve_asian_reduced(&params, 50.0, &FdConfig::default()).unwrap();
    let config = SchemeConfig {
        scheme: Scheme::GbmExact { rate: 0.02, dividend_yield: 0.0, sigma: 0.2 },
        step_count: 256,
        horizon: 0.25,
        initial_state: 50.0,
    };
    let est = mc::price_asian(&config, 50.0, 400_000, 3).unwrap();
    let tol = (3.0 * est.std_error).max(1e-3 * 50.0);
    assert!((pde - est.mean).abs() < tol, "pde {pde} vs mc {} +- {}", est.mean, est.std_error);
}

#[test]
fn asian_pde_zero_strike_slice_matches_mc() {
    // x0 = K/S with K -> 0 collapses to the martingale average; exercise the
    // solver away from the kink and compare with simulation
    let params = BsParams::new(50.0, 0.02, 0.0, 0.2, 0.25);
    let strike = 5.0;
    let pde = fd_solve_asian_reduced(&params, strike, &FdConfig::default()).unwrap();
    let config = SchemeConfig {
        scheme: Scheme::GbmExact { rate: 0.02, dividend_yield: 0.0, sigma: 0.2 },
        step_count: 256,
        horizon: 0.25,
        initial_state: 50.0,
    };
    let est = mc::price_asian(&config, strike, 200_000, 5).unwrap();
    let tol = (3.0 * est.std_error).max(1e-3 * 50.0);
    assert!((pde - est.mean).abs() < tol, "pde {pde} vs mc {}", est.mean);
}

/// Implied-vol surface fitted to Heston prices across maturities.
fn heston_fitted_surface() -> SurfaceGrid {
    let (spot, rate) = (50.0, 0.02);
    let maturities = [0.25, 0.5, 0.75, 1.0];
    let quad = QuadratureConfig::default();
    let mut slices = Vec::new();
    for t in maturities {
        let model = CharFnModel { horizon: t, ..heston_model() };
        let mut points = Vec::new();
        for i in 0..15 {
            let strike = 38.0 + 1.8 * i as f64;
            let price = heston_explicit_price(&model, strike, &quad).unwrap().price;
            let sigma_hat =
                implied_vol(spot, rate, 0.0, t, &OptionSpec::call(strike), price).unwrap();
            let k = (strike * (-rate * t).exp() / spot).ln();
            points.push((k, sigma_hat * sigma_hat * t));
        }
        let fit = fit_svi(&points, t).unwrap();
        assert!(fit.loss < 1e-3, "T={t}: SVI loss {}", fit.loss);
        slices.push(fit.params);
    }
    SurfaceGrid {
        spot,
        rate,
        log_moneyness: (-12..=12).map(|i| i as f64 * 0.025).collect(),
        maturities: maturities.to_vec(),
        slices,
    }
}

#[test]
fn heston_surface_is_arbitrage_free_and_dupire_reprices() {
    let surface = heston_fitted_surface();
    assert!(check_calendar_arbitrage(&surface).unwrap().pass);
    for slice in &surface.slices {
        let report = check_butterfly_arbitrage(slice, &surface.log_moneyness);
        assert!(report.pass, "T={}: min g {}", slice.maturity, report.min_g);
    }

    // strike-slope bounds contain the measured smile slope on every
    // arbitrage-free fitted slice
    for slice in &surface.slices {
        let t = slice.maturity;
        let sigma_at = |strike: f64| {
            let k = (strike * (-surface.rate * t).exp() / surface.spot).ln();
            (slice.total_variance(k) / t).sqrt()
        };
        for i in -6..=6 {
            let strike = surface.spot * (1.0 + 0.04 * i as f64);
            let h = 1e-4 * strike;
            let measured = (sigma_at(strike + h) - sigma_at(strike - h)) / (2.0 * h);
            let (lo, hi) = pricer_core::vol::strike_slope_bounds(
                surface.spot,
                surface.rate,
                0.0,
                t,
                strike,
                sigma_at(strike),
            )
            .unwrap();
            assert!(
                measured >= lo - 1e-9 && measured <= hi + 1e-9,
                "T={t} K={strike}: slope {measured} outside ({lo}, {hi})"
            );
        }
    }
    let grid = dupire_local_vol(&surface).unwrap();
    assert!(grid.nan_reasons.is_empty(), "{:?}", grid.nan_reasons);

    // local-vol Monte Carlo must reproduce the original Heston price: that
    // is the defining property of the Dupire extraction
    let vol_fn = local_vol_interpolator(&grid, surface.spot, surface.rate);
    let config = SchemeConfig {
        scheme: Scheme::LocalVolEuler { rate: surface.rate, vol_fn },
        step_count: 128,
        horizon: 0.5,
        initial_state: surface.spot,
    };
    let est = mc::price_european(&config, &OptionSpec::call(50.0), 300_000, 17).unwrap();
    let target = heston_explicit_price(&heston_model(), 50.0, &QuadratureConfig::default())
        .unwrap()
        .price;
    let tol = (4.0 * est.std_error).max(0.01 * target);
    assert!(
        (est.mean - target).abs() < tol,
        "local-vol mc {} +- {} vs heston {target}",
        est.mean,
        est.std_error
    );
}

/// Bilinear interpolation of the local-vol grid as sigma(t, s), with flat
/// extrapolation beyond the grid.
fn local_vol_interpolator(grid: &LocalVolGrid, spot: f64, rate: f64) -> VolFn {
    let maturities = grid.maturities.clone();
    let ks = grid.log_moneyness.clone();
    let values = grid.sigma_local.clone();
    Arc::new(move |t: f64, s: f64| {
        let k = (s * (-rate * t).exp() / spot).ln();
        let ti = maturities.partition_point(|m| *m < t).clamp(1, maturities.len() - 1);
        let (t0, t1) = (maturities[ti - 1], maturities[ti]);
        let wt = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let ki = ks.partition_point(|kk| *kk < k).clamp(1, ks.len() - 1);
        let (k0, k1) = (ks[ki - 1], ks[ki]);
        let wk = ((k - k0) / (k1 - k0)).clamp(0.0, 1.0);
        let v00 = values[ti - 1][ki - 1];
        let v01 = values[ti - 1][ki];
        let v10 = values[ti][ki - 1];
        let v11 = values[ti][ki];
        (1.0 - wt) * ((1.0 - wk) * v00 + wk * v01) + wt * ((1.0 - wk) * v10 + wk * v11)
    })
}

#[test]
fn fourier_and_analytic_calls_agree_for_gbm_strike_sweep() {
    let model = CharFnModel {
        dynamics: ModelDynamics::Gbm { rate: 0.02, sigma: 0.2 },
        spot: 50.0,
        horizon: 0.25,
    };
    let params = BsParams::new(50.0, 0.02, 0.0, 0.2, 0.25);
    for strike in [35.0, 42.0, 50.0, 57.0, 68.0] {
        let inv = price_call_gil_pelaez(&model, strike, &QuadratureConfig::default()).unwrap();
        let bs = bs_price(&params, &OptionSpec { kind: OptionKind::Call, strike }).unwrap();
        assert!((inv.price - bs).abs() < 1e-8, "K={strike}: {} vs {bs}", inv.price);
    }
}

#[test]
fn mc_gbm_dividend_drift_prices_dividend_call() {
    let params = BsParams::new(50.0, 0.02, 0.05, 0.2, 0.25);
    let bs = bs_price(&params, &OptionSpec::call(50.0)).unwrap();
    let config = SchemeConfig {
        scheme: Scheme::GbmExact { rate: 0.02, dividend_yield: 0.05, sigma: 0.2 },
        step_count: 1,
        horizon: 0.25,
        initial_state: 50.0,
    };
    let est = mc::price_european(&config, &OptionSpec::call(50.0), 400_000, 33).unwrap();
    assert!((est.mean - bs).abs() < 3.0 * est.std_error);
}

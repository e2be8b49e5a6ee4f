//! Subcommand implementations.

use crate::opts::*;
use crate::output::{sig12, CsvSink};
use crate::CliError;
use pricer_core::analytic::{self, BsParams, OptionKind, OptionSpec};
use pricer_core::control::{self, AffineHestonSpec, ControlError, MertonSpec, StochReturnsSpec};
use pricer_core::fourier::{
    self, CharFnModel, FourierError, ModelDynamics, PayoffKind, PayoffTransform, QuadratureConfig,
};
use pricer_core::market::{self, DiscreteMarket, MarketError};
use pricer_core::mc::{self, McError, Scheme, SchemeConfig};
use pricer_core::pde::{self, ExerciseStyle, FdConfig, FdPayoff, PdeError, TreeConfig};
use pricer_core::vol::{self, QuoteRow, QuoteValue, VolError};
use std::collections::HashMap;
use std::path::Path;

impl From<analytic::AnalyticError> for CliError {
    fn from(e: analytic::AnalyticError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<VolError> for CliError {
    fn from(e: VolError) -> Self {
        match e {
            VolError::NoConvergence { .. } | VolError::ArbitrageViolation(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FourierError> for CliError {
    fn from(e: FourierError) -> Self {
        match e {
            FourierError::NumericOverflow(_) | FourierError::QuadratureNotConverged { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::NonPositiveState { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Domain(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Invalid(_) | MarketError::Csv(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Domain(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn kind_of(k: KindArg) -> OptionKind {
    match k {
        KindArg::Call => OptionKind::Call,
        KindArg::Put => OptionKind::Put,
    }
}

fn bs_params(m: &MarketArgs) -> BsParams {
    BsParams::new(m.spot, m.rate, m.dividend_yield, m.sigma, m.tau)
}

fn parse_kv(s: &str) -> Result<HashMap<String, f64>, CliError> {
    let mut out = HashMap::new();
    for piece in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("expected key=value, got {piece:?}")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|e| CliError::Validation(format!("bad number for {k}: {e}")))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

fn take(map: &HashMap<String, f64>, key: &str) -> Result<f64, CliError> {
    map.get(key)
        .copied()
        .ok_or_else(|| CliError::Validation(format!("missing model parameter {key}")))
}

fn require_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            eprintln!("warning: no --seed given; defaulting to 0 for reproducibility");
            0
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Price { kind, strike, market } => {
            let spec = OptionSpec { kind: kind_of(kind), strike };
            let price = analytic::bs_price(&bs_params(&market), &spec)?;
            let mut sink = CsvSink::new(None)?;
            sink.header(&["method", "price"])?;
            sink.row(&["analytic".into(), sig12(price)])
        }
        Command::Greeks { kind, strike, market } => {
            let spec = OptionSpec { kind: kind_of(kind), strike };
            let g = analytic::greeks(&bs_params(&market), &spec)?;
            let mut sink = CsvSink::new(None)?;
            sink.header(&["greek", "value"])?;
            for (name, value) in [
                ("delta", g.delta),
                ("theta", g.theta),
                ("gamma", g.gamma),
                ("vega", g.vega),
                ("rho", g.rho),
                ("lambda", g.lambda_elasticity),
                ("vanna", g.vanna),
                ("volga", g.volga),
            ] {
                sink.row(&[name.into(), sig12(value)])?;
            }
            Ok(())
        }
        Command::ImpliedVol { kind, strike, spot, rate, dividend_yield, tau, price } => {
            let spec = OptionSpec { kind: kind_of(kind), strike };
            let sigma = vol::implied_vol(spot, rate, dividend_yield, tau, &spec, price)?;
            let mut sink = CsvSink::new(None)?;
            sink.header(&["implied_vol"])?;
            sink.row(&[sig12(sigma)])
        }
        Command::SurfaceFit { input, spot, rate, dividend_yield, output } => {
            let surface = fit_surface(&input, spot, rate, dividend_yield)?;
            let mut sink = CsvSink::new(output.as_deref())?;
            sink.header(&["T", "k", "omega", "a", "b", "rho", "m", "xi"])?;
            for (i, slice) in surface.slices.iter().enumerate() {
                for k in &surface.log_moneyness {
                    sink.row(&[
                        sig12(surface.maturities[i]),
                        sig12(*k),
                        sig12(slice.total_variance(*k)),
                        sig12(slice.a),
                        sig12(slice.b),
                        sig12(slice.rho),
                        sig12(slice.m),
                        sig12(slice.xi),
                    ])?;
                }
            }
            Ok(())
        }
        Command::LocalVol { input, spot, rate, dividend_yield, output } => {
            let surface = fit_surface(&input, spot, rate, dividend_yield)?;
            let grid = vol::dupire_local_vol(&surface)?;
            let mut sink = CsvSink::new(output.as_deref())?;
            sink.header(&["T", "K", "sigma_local"])?;
            for (i, t) in grid.maturities.iter().enumerate() {
                for (j, _) in grid.log_moneyness.iter().enumerate() {
                    sink.row(&[
                        sig12(*t),
                        sig12(grid.strikes[i][j]),
                        sig12(grid.sigma_local[i][j]),
                    ])?;
                }
            }
            Ok(())
        }
        Command::FourierPrice {
            model,
            params,
            spot,
            horizon,
            strike,
            payoff,
            contour,
            method,
            nodes,
            u_max,
        } => {
            let map = parse_kv(&params)?;
            let model = build_model(model, &map, spot, horizon)?;
            let quad = QuadratureConfig { node_count: nodes, u_max };
            let payoff_kind = payoff_of(payoff);
            let mut sink = CsvSink::new(None)?;
            sink.header(&["method", "price"])?;
            let resolved = match method {
                FourierMethod::Auto => {
                    if payoff_kind == PayoffKind::Call {
                        FourierMethod::GilPelaez
                    } else {
                        FourierMethod::Lewis
                    }
                }
                other => other,
            };
            match resolved {
                FourierMethod::GilPelaez => {
                    let out = fourier::price_call_gil_pelaez(&model, strike, &quad)?;
                    sink.row(&["gil-pelaez".into(), sig12(out.price)])?;
                }
                FourierMethod::HestonExplicit => {
                    let out = fourier::heston_explicit_price(&model, strike, &quad)?;
                    if out.branch_cut_warning {
                        eprintln!("warning: complex-log argument crossed a branch cut between nodes");
                    }
                    sink.row(&["heston-explicit".into(), sig12(out.price)])?;
                }
                FourierMethod::Lewis | FourierMethod::Auto => {
                    let transform = PayoffTransform::new(payoff_kind, strike);
                    let z = contour.unwrap_or_else(|| transform.default_contour());
                    let price = fourier::price_lewis(&model, &transform, z, &quad)?;
                    sink.row(&["lewis".into(), sig12(price)])?;
                }
            }
            Ok(())
        }
        Command::Mc {
            scheme,
            spot,
            rate,
            dividend_yield,
            sigma,
            params,
            horizon,
            steps,
            paths,
            seed,
            kind,
            strike,
            asian_strike,
            ruin_a,
            ruin_b,
            dt,
            dump_paths,
        } => {
            let seed = require_seed(seed);
            let mut sink = CsvSink::new(None)?;
            if let (Some(a), Some(b)) = (ruin_a, ruin_b) {
                let dt = dt.ok_or_else(|| {
                    CliError::Validation("gambler's ruin needs --dt".into())
                })?;
                let est = mc::gamblers_ruin(a, b, paths, dt, seed)?;
                sink.header(&["quantity", "mean", "std_error", "n_paths", "seed"])?;
                sink.row(&[
                    "hit_probability".into(),
                    sig12(est.mean),
                    sig12(est.std_error),
                    est.n_paths.to_string(),
                    est.seed.to_string(),
                ])?;
                return Ok(());
            }
            let config = SchemeConfig {
                scheme: build_scheme(scheme, rate, dividend_yield, sigma, params.as_deref())?,
                step_count: steps,
                horizon,
                initial_state: spot,
            };
            if let Some(path) = dump_paths {
                let capped = paths.min(1000);
                let batch = mc::simulate(&config, capped, seed)?;
                let mut psink = CsvSink::new(Some(path.as_path()))?;
                psink.header(&["path_id", "t", "value"])?;
                for (pid, row) in batch.states.iter().enumerate() {
                    for (t, v) in batch.times.iter().zip(row) {
                        psink.row(&[pid.to_string(), sig12(*t), sig12(*v)])?;
                    }
                }
            }
            let est = if let Some(k) = asian_strike {
                mc::price_asian(&config, k, paths, seed)?
            } else {
                let kind = kind.ok_or_else(|| {
                    CliError::Validation("need --kind and --strike (or --asian-strike)".into())
                })?;
                let strike = strike.ok_or_else(|| {
                    CliError::Validation("need --strike with --kind".into())
                })?;
                mc::price_european(&config, &OptionSpec { kind: kind_of(kind), strike }, paths, seed)?
            };
            sink.header(&["mean", "std_error", "n_paths", "seed", "floored_discriminants"])?;
            sink.row(&[
                sig12(est.mean),
                sig12(est.std_error),
                est.n_paths.to_string(),
                est.seed.to_string(),
                est.floored_discriminants.to_string(),
            ])
        }
        Command::Tree { exercise, kind, strike, market, steps, t1, k1, boundary_output } => {
            let exercise = match exercise {
                ExerciseArg::European => ExerciseStyle::European,
                ExerciseArg::American => ExerciseStyle::American,
                ExerciseArg::Bermuda => {
                    let t1 = t1.ok_or_else(|| CliError::Validation("bermuda needs --t1".into()))?;
                    let k1 = k1.ok_or_else(|| CliError::Validation("bermuda needs --k1".into()))?;
                    ExerciseStyle::Bermuda { t1, k1 }
                }
            };
            let config = TreeConfig {
                step_count: steps,
                params: bs_params(&market),
                spec: OptionSpec { kind: kind_of(kind), strike },
                exercise,
            };
            let (price, boundary) = pde::tree_price(&config)?;
            if let Some(path) = boundary_output {
                let mut bsink = CsvSink::new(Some(path.as_path()))?;
                bsink.header(&["t", "s_exercise"])?;
                for (t, s) in boundary.times.iter().zip(&boundary.critical_spot) {
                    if let Some(s) = s {
                        bsink.row(&[sig12(*t), sig12(*s)])?;
                    }
                }
            }
            let mut sink = CsvSink::new(None)?;
            sink.header(&["method", "price"])?;
            sink.row(&["tree".into(), sig12(price)])
        }
        Command::Pde { problem, kind, strike, market, n_space, n_time, theta } => {
            let config = FdConfig { n_space, n_time, theta, ..FdConfig::default() };
            let params = bs_params(&market);
            let price = match problem {
                PdeProblem::Bs => {
                    let spec = OptionSpec { kind: kind_of(kind), strike };
                    pde::fd_solve_bs(&params, FdPayoff::Vanilla(spec), &config)?.value_at(market.spot)
                }
                PdeProblem::Asian => {
                    if matches!(kind, KindArg::Put) {
                        return Err(CliError::Validation(
                            "the reduced-dimension solver prices Asian calls only".into(),
                        ));
                    }
                    pde::fd_solve_asian_reduced(&params, strike, &config)?
                }
            };
            let mut sink = CsvSink::new(None)?;
            sink.header(&["method", "price"])?;
            sink.row(&["fd-pde".into(), sig12(price)])
        }
        Command::Control {
            problem,
            mu,
            rate,
            sigma,
            gamma,
            beta,
            horizon,
            kappa,
            beta_vol,
            rho,
            y_bar,
            g_plain,
            g_hedged,
            tau,
            table_rows,
        } => run_control(ControlInputs {
            problem,
            mu,
            rate,
            sigma,
            gamma,
            beta,
            horizon,
            kappa,
            beta_vol,
            rho,
            y_bar,
            g_plain,
            g_hedged,
            tau,
            table_rows,
        }),
        Command::DiscreteMarket { input, claim } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?;
            let market = DiscreteMarket::from_csv_str(&text)?;
            let mut sink = CsvSink::new(None)?;
            sink.header(&["quantity", "index", "value"])?;
            if let Some(claim) = claim {
                let payoffs: Result<Vec<f64>, _> =
                    claim.split(',').map(|c| c.trim().parse::<f64>()).collect();
                let payoffs =
                    payoffs.map_err(|e| CliError::Validation(format!("bad claim: {e}")))?;
                let rep = market::replicate_claim(&market, &payoffs)?;
                sink.row(&["replication_cost".into(), String::new(), sig12(rep.initial_cost)])?;
                sink.row(&["replication_bank".into(), String::new(), sig12(rep.bank_units)])?;
                for (i, alpha) in rep.asset_units.iter().enumerate() {
                    sink.row(&["replication_asset".into(), (i + 1).to_string(), sig12(*alpha)])?;
                }
            }
            match market::find_emm(&market) {
                Ok(emm) => {
                    for (i, q) in emm.q.iter().enumerate() {
                        sink.row(&["emm_q".into(), (i + 1).to_string(), sig12(*q)])?;
                    }
                    sink.row(&["emm_unique".into(), String::new(), (!emm.non_unique).to_string()])?;
                }
                Err(MarketError::NoEmm(reason)) => {
                    sink.row(&["emm_q".into(), String::new(), format!("none ({reason})")])?;
                }
                Err(e) => return Err(e.into()),
            }
            let report = market::detect_arbitrage(&market)?;
            sink.row(&["arbitrage".into(), String::new(), report.arbitrage.to_string()])?;
            if let Some(cert) = report.certificate {
                sink.row(&["certificate_bank".into(), String::new(), sig12(cert.bank_units)])?;
                for (i, alpha) in cert.asset_units.iter().enumerate() {
                    sink.row(&["certificate_asset".into(), (i + 1).to_string(), sig12(*alpha)])?;
                }
            }
            Ok(())
        }
        Command::Compare { spot, strike, rate, dividend_yield, sigma, tau, paths, seed } => {
            let seed = require_seed(seed);
            let params = BsParams::new(spot, rate, dividend_yield, sigma, tau);
            let spec = OptionSpec::call(strike);
            let analytic_price = analytic::bs_price(&params, &spec)?;
            if dividend_yield != 0.0 {
                return Err(CliError::Validation(
                    "compare prices a zero-dividend call across all methods".into(),
                ));
            }
            let model = CharFnModel {
                dynamics: ModelDynamics::Gbm { rate, sigma },
                spot,
                horizon: tau,
            };
            let fourier_price =
                fourier::price_call_gil_pelaez(&model, strike, &QuadratureConfig::default())?.price;
            let config = SchemeConfig {
                scheme: Scheme::GbmExact { rate, dividend_yield, sigma },
                step_count: 1,
                horizon: tau,
                initial_state: spot,
            };
            let est = mc::price_european(&config, &spec, paths, seed)?;
            let fd = pde::fd_solve_bs(&params, FdPayoff::Vanilla(spec), &FdConfig::default())?
                .value_at(spot);

            let mut sink = CsvSink::new(None)?;
            sink.header(&["method", "price", "std_error"])?;
            sink.row(&["analytic".into(), sig12(analytic_price), String::new()])?;
            sink.row(&["fourier".into(), sig12(fourier_price), String::new()])?;
            sink.row(&["mc".into(), sig12(est.mean), sig12(est.std_error)])?;
            sink.row(&["pde".into(), sig12(fd), String::new()])?;

            // agreement gates, tighter than the acceptance tolerances
            if (fourier_price - analytic_price).abs() > 1e-7 * analytic_price.max(1.0) {
                return Err(CliError::Numerical(format!(
                    "fourier {fourier_price} disagrees with analytic {analytic_price}"
                )));
            }
            if ((fd - analytic_price) / analytic_price).abs() > 1e-3 {
                return Err(CliError::Numerical(format!(
                    "pde {fd} disagrees with analytic {analytic_price}"
                )));
            }
            if (est.mean - analytic_price).abs() > 3.0 * est.std_error {
                return Err(CliError::Numerical(format!(
                    "mc {} +- {} outside 3 SE of analytic {analytic_price}",
                    est.mean, est.std_error
                )));
            }
            Ok(())
        }
        Command::Curve {
            quantity,
            range,
            points,
            kind,
            strike,
            spot,
            rate,
            dividend_yield,
            sigma,
            tau,
            model,
            params,
            steps,
            output,
        } => run_curve(CurveInputs {
            quantity,
            range,
            points,
            kind,
            strike,
            spot,
            rate,
            dividend_yield,
            sigma,
            tau,
            model,
            params,
            steps,
            output,
        }),
    }
}

fn payoff_of(p: PayoffArg) -> PayoffKind {
    match p {
        PayoffArg::Call => PayoffKind::Call,
        PayoffArg::Put => PayoffKind::Put,
        PayoffArg::CoveredCall => PayoffKind::CoveredCall,
        PayoffArg::CashOrNothingCall => PayoffKind::CashOrNothingCall,
        PayoffArg::CashOrNothingPut => PayoffKind::CashOrNothingPut,
        PayoffArg::AssetOrNothingCall => PayoffKind::AssetOrNothingCall,
        PayoffArg::AssetOrNothingPut => PayoffKind::AssetOrNothingPut,
        PayoffArg::ArrowDebreu => PayoffKind::ArrowDebreu,
    }
}

fn build_model(
    model: ModelArg,
    map: &HashMap<String, f64>,
    spot: f64,
    horizon: f64,
) -> Result<CharFnModel, CliError> {
    let dynamics = match model {
        ModelArg::Gbm => ModelDynamics::Gbm {
            rate: take(map, "rate")?,
            sigma: take(map, "sigma")?,
        },
        ModelArg::Heston => ModelDynamics::Heston {
            kappa: take(map, "kappa")?,
            x_bar: take(map, "x_bar")?,
            gamma: take(map, "gamma")?,
            rho: take(map, "rho")?,
            x0: take(map, "x0")?,
            rate: take(map, "rate")?,
        },
        ModelArg::Merton => ModelDynamics::MertonJd {
            rate: take(map, "rate")?,
            sigma: take(map, "sigma")?,
            lambda: take(map, "lambda")?,
            mu_j: take(map, "mu_j")?,
            sigma_j: take(map, "sigma_j")?,
        },
    };
    let model = CharFnModel { dynamics, spot, horizon };
    model.validate()?;
    Ok(model)
}

fn build_scheme(
    scheme: SchemeArg,
    rate: f64,
    dividend_yield: f64,
    sigma: Option<f64>,
    params: Option<&str>,
) -> Result<Scheme, CliError> {
    let need_sigma =
        || sigma.ok_or_else(|| CliError::Validation("this scheme needs --sigma".into()));
    let map = params.map(parse_kv).transpose()?.unwrap_or_default();
    Ok(match scheme {
        SchemeArg::GbmExact => Scheme::GbmExact { rate, dividend_yield, sigma: need_sigma()? },
        SchemeArg::EulerLog => Scheme::EulerLog { rate, dividend_yield, sigma: need_sigma()? },
        SchemeArg::ExpOu => Scheme::ExpOu {
            rate,
            kappa: take(&map, "kappa")?,
            x_bar: take(&map, "x_bar")?,
            gamma: take(&map, "gamma")?,
            rho: take(&map, "rho")?,
            x0: take(&map, "x0")?,
        },
        SchemeArg::HestonImplicit => Scheme::HestonImplicit {
            rate,
            kappa: take(&map, "kappa")?,
            x_bar: take(&map, "x_bar")?,
            gamma: take(&map, "gamma")?,
            rho: take(&map, "rho")?,
            x0: take(&map, "x0")?,
        },
        SchemeArg::RandomWalk => Scheme::RandomWalk,
    })
}

/// Parse the option-chain CSV (strike,maturity,kind,quote_type,quote) and
/// fit one SVI slice per maturity.
fn fit_surface(
    input: &Path,
    spot: f64,
    rate: f64,
    dividend_yield: f64,
) -> Result<vol::SurfaceGrid, CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?;
    let mut quotes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || lineno == 0 {
            continue; // header row
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 5 {
            return Err(CliError::Validation(format!(
                "{}:{}: expected strike,maturity,kind,quote_type,quote",
                input.display(),
                lineno + 1
            )));
        }
        let parse = |f: &str, what: &str| -> Result<f64, CliError> {
            f.parse()
                .map_err(|e| CliError::Validation(format!("bad {what} {f:?}: {e}")))
        };
        let strike = parse(fields[0], "strike")?;
        let maturity = parse(fields[1], "maturity")?;
        let kind = match fields[2] {
            "call" => OptionKind::Call,
            "put" => OptionKind::Put,
            other => {
                return Err(CliError::Validation(format!("kind must be call or put, got {other:?}")))
            }
        };
        let value = parse(fields[4], "quote")?;
        let quote = match fields[3] {
            "price" => QuoteValue::Price(value),
            "vol" | "implied_vol" => QuoteValue::ImpliedVol(value),
            other => {
                return Err(CliError::Validation(format!(
                    "quote_type must be price or vol, got {other:?}"
                )))
            }
        };
        quotes.push(QuoteRow { strike, maturity, kind, quote });
    }
    // log-moneyness grid spanning the chain with a margin
    let mut k_lo = f64::INFINITY;
    let mut k_hi = f64::NEG_INFINITY;
    for q in &quotes {
        let k = (q.strike * (-rate * q.maturity).exp() / spot).ln();
        k_lo = k_lo.min(k);
        k_hi = k_hi.max(k);
    }
    if !k_lo.is_finite() {
        return Err(CliError::Validation("empty option chain".into()));
    }
    let pad = 0.1 * (k_hi - k_lo).max(0.1);
    let grid: Vec<f64> = (0..=40)
        .map(|i| k_lo - pad + (k_hi - k_lo + 2.0 * pad) * i as f64 / 40.0)
        .collect();
    Ok(vol::build_surface(spot, rate, dividend_yield, &quotes, grid)?)
}

struct ControlInputs {
    problem: ControlProblem,
    mu: f64,
    rate: f64,
    sigma: f64,
    gamma: f64,
    beta: f64,
    horizon: f64,
    kappa: Option<f64>,
    beta_vol: Option<f64>,
    rho: Option<f64>,
    y_bar: Option<f64>,
    g_plain: Option<f64>,
    g_hedged: Option<f64>,
    tau: Option<f64>,
    table_rows: usize,
}

fn run_control(inputs: ControlInputs) -> Result<(), CliError> {
    let mut sink = CsvSink::new(None)?;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::Validation(format!("this problem needs --{name}")))
    };
    let spec = MertonSpec {
        mu: inputs.mu,
        rate: inputs.rate,
        sigma: inputs.sigma,
        gamma: inputs.gamma,
        beta: inputs.beta,
        horizon: inputs.horizon,
    };
    match inputs.problem {
        ControlProblem::MertonLog => {
            let sol = control::merton_log(&spec)?;
            sink.header(&["quantity", "value"])?;
            sink.row(&["allocation".into(), sig12(sol.allocation)])?;
            sink.row(&[
                "certainty_equivalent_of_unit_wealth".into(),
                sig12(sol.certainty_equivalent(0.0, 1.0)),
            ])
        }
        ControlProblem::MertonPower => {
            let sol = control::merton_power(&spec)?;
            sink.header(&["quantity", "value"])?;
            sink.row(&["allocation".into(), sig12(sol.allocation)])?;
            sink.row(&[
                "certainty_equivalent_of_unit_wealth".into(),
                sig12(sol.certainty_equivalent(0.0, 1.0)),
            ])?;
            sink.row(&["g_at_zero".into(), sig12(sol.g(0.0))])
        }
        ControlProblem::LogConsumption => {
            let sol = control::merton_log_consumption(&spec)?;
            sink.header(&["quantity", "value"])?;
            sink.row(&["allocation".into(), sig12(sol.allocation)])?;
            sink.row(&["consumption_rate".into(), sig12(sol.consumption_rate)])?;
            sink.row(&["a".into(), sig12(sol.a)])?;
            sink.row(&["b".into(), sig12(sol.b)])
        }
        ControlProblem::StochReturns => {
            let sr = StochReturnsSpec {
                kappa: need(inputs.kappa, "kappa")?,
                mu: 0.0,
                beta_vol: need(inputs.beta_vol, "beta-vol")?,
                sigma: inputs.sigma,
                rho: need(inputs.rho, "rho")?,
                gamma: inputs.gamma,
                horizon: inputs.horizon,
            };
            let sol = control::stoch_returns_solution(&sr)?;
            if let Some(tau_star) = sol.blowup_tau {
                eprintln!("note: value function blows up at time-to-horizon {tau_star:.6}");
            }
            sink.header(&["t", "a", "b"])?;
            for i in 0..inputs.table_rows {
                let t = inputs.horizon * i as f64 / (inputs.table_rows - 1).max(1) as f64;
                sink.row(&[sig12(t), sig12(sol.a(t)), sig12(sol.b(t))])?;
            }
            Ok(())
        }
        ControlProblem::AffineHeston => {
            let spec = AffineHestonSpec {
                kappa: need(inputs.kappa, "kappa")?,
                y_bar: need(inputs.y_bar, "y-bar")?,
                beta: need(inputs.beta_vol, "beta-vol")?,
                rho: need(inputs.rho, "rho")?,
                mu: inputs.mu,
                gamma: inputs.gamma,
                rate: inputs.rate,
                horizon: inputs.horizon,
            };
            let sol = control::affine_heston_control(&spec)?;
            if !sol.feller_satisfied {
                eprintln!("note: Feller condition beta^2 <= 2 kappa y_bar violated");
            }
            sink.header(&["t", "a", "b"])?;
            for i in 0..inputs.table_rows {
                let t = inputs.horizon * i as f64 / (inputs.table_rows - 1).max(1) as f64;
                sink.row(&[sig12(t), sig12(sol.a(t)), sig12(sol.b(t))])?;
            }
            Ok(())
        }
        ControlProblem::Indifference => {
            let price = control::indifference_price(
                need(inputs.g_plain, "g-plain")?,
                need(inputs.g_hedged, "g-hedged")?,
                inputs.gamma,
                inputs.rate,
                need(inputs.tau, "tau")?,
            )?;
            sink.header(&["quantity", "value"])?;
            sink.row(&["indifference_price".into(), sig12(price)])
        }
    }
}

struct CurveInputs {
    quantity: CurveQuantity,
    range: String,
    points: usize,
    kind: KindArg,
    strike: f64,
    spot: f64,
    rate: f64,
    dividend_yield: f64,
    sigma: f64,
    tau: f64,
    model: Option<ModelArg>,
    params: Option<String>,
    steps: usize,
    output: Option<std::path::PathBuf>,
}

fn run_curve(inputs: CurveInputs) -> Result<(), CliError> {
    let (lo, hi) = inputs
        .range
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| CliError::Validation("range must be lo:hi".into()))?;
    if !(hi > lo) || inputs.points < 2 {
        return Err(CliError::Validation("need hi > lo and at least two points".into()));
    }
    let spec = OptionSpec { kind: kind_of(inputs.kind), strike: inputs.strike };
    let xs: Vec<f64> = (0..inputs.points)
        .map(|i| lo + (hi - lo) * i as f64 / (inputs.points - 1) as f64)
        .collect();
    let mut sink = CsvSink::new(inputs.output.as_deref())?;
    let params_at = |s: f64| {
        BsParams::new(s, inputs.rate, inputs.dividend_yield, inputs.sigma, inputs.tau)
    };
    match inputs.quantity {
        CurveQuantity::Payoff => {
            sink.header(&["x", "y"])?;
            for x in xs {
                sink.row(&[sig12(x), sig12(spec.payoff(x))])?;
            }
        }
        CurveQuantity::Price => {
            sink.header(&["x", "y"])?;
            for x in xs {
                if x <= 0.0 {
                    sink.row(&[sig12(x), sig12(spec.payoff(0.0) * (-inputs.rate * inputs.tau).exp())])?;
                    continue;
                }
                sink.row(&[sig12(x), sig12(analytic::bs_price(&params_at(x), &spec)?)])?;
            }
        }
        CurveQuantity::Delta | CurveQuantity::Theta => {
            sink.header(&["x", "y"])?;
            for x in xs {
                if x <= 0.0 {
                    return Err(CliError::Validation("spot range must stay positive".into()));
                }
                let g = analytic::greeks(&params_at(x), &spec)?;
                let y = if matches!(inputs.quantity, CurveQuantity::Delta) { g.delta } else { g.theta };
                sink.row(&[sig12(x), sig12(y)])?;
            }
        }
        CurveQuantity::GammaVega => {
            sink.header(&["x", "gamma", "vega"])?;
            for x in xs {
                if x <= 0.0 {
                    return Err(CliError::Validation("spot range must stay positive".into()));
                }
                let g = analytic::greeks(&params_at(x), &spec)?;
                sink.row(&[sig12(x), sig12(g.gamma), sig12(g.vega)])?;
            }
        }
        CurveQuantity::Boundary => {
            let config = TreeConfig {
                step_count: inputs.steps,
                params: params_at(inputs.spot),
                spec,
                exercise: ExerciseStyle::American,
            };
            let (_, boundary) = pde::tree_price(&config)?;
            sink.header(&["x", "y"])?;
            for (t, s) in boundary.times.iter().zip(&boundary.critical_spot) {
                if let Some(s) = s {
                    sink.row(&[sig12(*t), sig12(*s)])?;
                }
            }
        }
        CurveQuantity::Smile => {
            let model_arg = inputs
                .model
                .ok_or_else(|| CliError::Validation("smile curves need --model".into()))?;
            let map = parse_kv(inputs.params.as_deref().unwrap_or(""))?;
            let model = build_model(model_arg, &map, inputs.spot, inputs.tau)?;
            let quad = QuadratureConfig::default();
            sink.header(&["x", "y"])?;
            for strike in xs {
                if strike <= 0.0 {
                    return Err(CliError::Validation("strike range must stay positive".into()));
                }
                let price = fourier::price_call_gil_pelaez(&model, strike, &quad)?.price;
                let iv = vol::implied_vol(
                    inputs.spot,
                    model.rate(),
                    0.0,
                    inputs.tau,
                    &OptionSpec::call(strike),
                    price,
                )?;
                sink.row(&[sig12(strike), sig12(iv)])?;
            }
        }
    }
    Ok(())
}

//! Argument definitions for every subcommand.

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "pricer",
    about = "Derivatives pricing, volatility calibration, and optimal-investment toolkit",
    after_help = "A plain-text key=value config file can be supplied with --config <path>; \
                  explicit flags override config entries."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum KindArg {
    Call,
    Put,
}

#[derive(Args, Debug, Clone)]
pub struct MarketArgs {
    #[arg(long)]
    pub spot: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dividend_yield: f64,
    #[arg(long)]
    pub sigma: f64,
    /// Time to maturity in years.
    #[arg(long)]
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Gbm,
    Heston,
    Merton,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PayoffArg {
    Call,
    Put,
    CoveredCall,
    CashOrNothingCall,
    CashOrNothingPut,
    AssetOrNothingCall,
    AssetOrNothingPut,
    ArrowDebreu,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FourierMethod {
    /// Gil-Pelaez for calls, payoff transform otherwise.
    Auto,
    GilPelaez,
    Lewis,
    HestonExplicit,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    GbmExact,
    EulerLog,
    ExpOu,
    HestonImplicit,
    RandomWalk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExerciseArg {
    European,
    American,
    Bermuda,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PdeProblem {
    Bs,
    Asian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ControlProblem {
    MertonLog,
    MertonPower,
    LogConsumption,
    StochReturns,
    AffineHeston,
    Indifference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CurveQuantity {
    Payoff,
    Price,
    Delta,
    Theta,
    GammaVega,
    Boundary,
    Smile,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-form European price.
    Price {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        strike: f64,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Full Greek set from the closed forms.
    Greeks {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        strike: f64,
        #[command(flatten)]
        market: MarketArgs,
    },
    /// Invert the pricing formula on a market quote.
    ImpliedVol {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        strike: f64,
        #[arg(long)]
        spot: f64,
        #[arg(long, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        price: f64,
    },
    /// Fit SVI slices to an option chain and emit the surface grid.
    SurfaceFit {
        /// Chain CSV: strike,maturity,kind,quote_type,quote (header row).
        #[arg(long)]
        input: std::path::PathBuf,
        #[arg(long)]
        spot: f64,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        /// Surface CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<std::path::PathBuf>,
    },
    /// Dupire local volatility from a fitted chain.
    LocalVol {
        #[arg(long)]
        input: std::path::PathBuf,
        #[arg(long)]
        spot: f64,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        #[arg(long)]
        output: Option<std::path::PathBuf>,
    },
    /// Characteristic-function pricing.
    FourierPrice {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Model parameters as k=v pairs, e.g. rate=0.02,sigma=0.2.
        #[arg(long)]
        params: String,
        #[arg(long)]
        spot: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        strike: f64,
        #[arg(long, value_enum, default_value = "call")]
        payoff: PayoffArg,
        /// Contour Im(u); payoff-specific mid-strip default when omitted.
        #[arg(long, allow_negative_numbers = true)]
        contour: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: FourierMethod,
        #[arg(long, default_value_t = 256)]
        nodes: usize,
        #[arg(long, default_value_t = 200.0)]
        u_max: f64,
    },
    /// Monte Carlo pricing and stopping-time experiments.
    Mc {
        #[arg(long, value_enum, default_value = "gbm-exact")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 50.0)]
        spot: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        #[arg(long)]
        sigma: Option<f64>,
        /// Extra scheme parameters as k=v (kappa, x_bar, gamma, rho, x0).
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        strike: Option<f64>,
        /// Price an average-strike Asian call at this strike instead.
        #[arg(long)]
        asian_strike: Option<f64>,
        /// Gambler's-ruin barriers: estimate P(hit a before b).
        #[arg(long, allow_hyphen_values = true)]
        ruin_a: Option<f64>,
        #[arg(long)]
        ruin_b: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Write simulated paths (path_id,t,value), capped at 1000 paths.
        #[arg(long)]
        dump_paths: Option<std::path::PathBuf>,
    },
    /// Binomial-tree pricing with exercise-boundary extraction.
    Tree {
        #[arg(long, value_enum, default_value = "american")]
        exercise: ExerciseArg,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        strike: f64,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        /// Bermuda early-exercise date.
        #[arg(long)]
        t1: Option<f64>,
        /// Bermuda early strike.
        #[arg(long)]
        k1: Option<f64>,
        /// Write the exercise boundary as t,s_exercise.
        #[arg(long)]
        boundary_output: Option<std::path::PathBuf>,
    },
    /// Finite-difference solvers.
    Pde {
        #[arg(long, value_enum, default_value = "bs")]
        problem: PdeProblem,
        #[arg(long, value_enum, default_value = "call")]
        kind: KindArg,
        #[arg(long)]
        strike: f64,
        #[command(flatten)]
        market: MarketArgs,
        #[arg(long, default_value_t = 400)]
        n_space: usize,
        #[arg(long, default_value_t = 400)]
        n_time: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
    /// Optimal-investment solutions.
    Control {
        #[arg(long, value_enum)]
        problem: ControlProblem,
        #[arg(long, default_value_t = 0.07, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        beta_vol: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        #[arg(long)]
        y_bar: Option<f64>,
        #[arg(long)]
        g_plain: Option<f64>,
        #[arg(long)]
        g_hedged: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Rows of the t,a,b coefficient table.
        #[arg(long, default_value_t = 51)]
        table_rows: usize,
    },
    /// Discrete time-space market: replication, EMM, arbitrage.
    DiscreteMarket {
        /// Market CSV: header bank_gross,S0_1,..; rows probability,P_1,..
        #[arg(long)]
        input: std::path::PathBuf,
        /// Claim payoffs per state, comma separated.
        #[arg(long)]
        claim: Option<String>,
    },
    /// Cross-method price comparison (analytic, fourier, mc, pde).
    Compare {
        #[arg(long, default_value_t = 50.0)]
        spot: f64,
        #[arg(long, default_value_t = 50.0)]
        strike: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit plot-ready x,y data for a quantity.
    Curve {
        #[arg(long, value_enum)]
        quantity: CurveQuantity,
        /// Range as lo:hi (spot for price curves, strike for smiles).
        #[arg(long)]
        range: String,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long, value_enum, default_value = "call")]
        kind: KindArg,
        #[arg(long, default_value_t = 50.0)]
        strike: f64,
        #[arg(long, default_value_t = 50.0)]
        spot: f64,
        #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        dividend_yield: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        /// Characteristic-function model for smile curves.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long)]
        output: Option<std::path::PathBuf>,
    },
}

//! Single-period discrete time-space market.
//!
//! The market has a bank account with gross return G = e^{rT}, M risky
//! assets with initial prices S_0 and an N x M matrix of terminal values
//! (one row per elementary event). Claims are replicated by solving the
//! terminal linear system in the portfolio weights (beta in the bank,
//! alpha_i in the assets); equivalent martingale measures q solve
//!
//! ```text
//! sum_i q_i = 1,   sum_i q_i P_ij = G S0_j  for every asset j,   q_i > 0,
//! ```
//!
//! and arbitrage detection searches for a zero-cost portfolio whose
//! terminal value is nonnegative in every state and positive in at least
//! one. By the first fundamental theorem the two searches are dual: an
//! EMM exists exactly when no arbitrage portfolio does, and the tests
//! exercise both sides of that equivalence on randomized markets.

use crate::numerics::linalg::{svd, DMat};
use crate::numerics::lp::{self, LpResult};
use std::fmt;

/// Singular values below RANK_TOL x (largest singular value) are treated as zero.
const RANK_TOL: f64 = 1e-10;
/// Strict-positivity floor for measure equivalence.
const POSITIVITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct DiscreteMarket {
    /// Gross return on the bank account over the period, e^{rT}.
    pub bank_gross_return: f64,
    /// N x M matrix: terminal value of asset j in elementary event i.
    pub terminal_payoff_matrix: DMat,
    /// Initial prices of the M risky assets.
    pub initial_prices: Vec<f64>,
    /// Statistical probabilities of the N elementary events.
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MarketError {
    Invalid(String),
    /// Replication system is rank-deficient and the claim lies outside its span.
    SingularMarket(String),
    /// No equivalent martingale measure: the positivity-constrained system is infeasible.
    NoEmm(String),
    Csv(String),
}

impl fmt::Display for MarketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarketError::Invalid(m) => write!(f, "invalid market: {m}"),
            MarketError::SingularMarket(m) => write!(f, "singular market: {m}"),
            MarketError::NoEmm(m) => write!(f, "no EMM: {m}"),
            MarketError::Csv(m) => write!(f, "market csv: {m}"),
        }
    }
}

impl std::error::Error for MarketError {}

impl DiscreteMarket {
    pub fn n_states(&self) -> usize {
        self.terminal_payoff_matrix.rows
    }

    pub fn n_assets(&self) -> usize {
        self.terminal_payoff_matrix.cols
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let n = self.n_states();
        let m = self.n_assets();
        if n < 1 || m < 1 {
            return Err(MarketError::Invalid(format!("need N >= 1 and M >= 1, got N={n}, M={m}")));
        }
        if !(self.bank_gross_return > 0.0) {
            return Err(MarketError::Invalid("bank gross return must be positive".into()));
        }
        if self.initial_prices.len() != m {
            return Err(MarketError::Invalid(format!(
                "initial_prices has {} entries for {m} assets",
                self.initial_prices.len()
            )));
        }
        if self.probabilities.len() != n {
            return Err(MarketError::Invalid(format!(
                "probabilities has {} entries for {n} states",
                self.probabilities.len()
            )));
        }
        if self.probabilities.iter().any(|p| !(*p > 0.0)) {
            return Err(MarketError::Invalid("every probability must be > 0".into()));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(MarketError::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Augmented terminal matrix: bank column of gross returns, then assets.
    fn augmented(&self) -> DMat {
        let n = self.n_states();
        let m = self.n_assets();
        let mut a = DMat::zeros(n, m + 1);
        for i in 0..n {
            a.set(i, 0, self.bank_gross_return);
            for j in 0..m {
                a.set(i, j + 1, self.terminal_payoff_matrix.get(i, j));
            }
        }
        a
    }

    fn price_scale(&self) -> f64 {
        let mut scale = self.bank_gross_return.abs();
        for p in &self.initial_prices {
            scale = scale.max(p.abs());
        }
        for i in 0..self.n_states() {
            for j in 0..self.n_assets() {
                scale = scale.max(self.terminal_payoff_matrix.get(i, j).abs());
            }
        }
        scale.max(1.0)
    }

    /// Parse the market CSV: header row `bank_gross,S0_1,...,S0_M`, then one
    /// row per elementary event with `probability,P_1,...,P_M`.
    pub fn from_csv_str(text: &str) -> Result<Self, MarketError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MarketError::Csv("empty input".into()))?;
        let head: Vec<f64> = parse_row(header)?;
        if head.len() < 2 {
            return Err(MarketError::Csv("header needs bank gross return and at least one initial price".into()));
        }
        let bank_gross_return = head[0];
        let initial_prices = head[1..].to_vec();
        let m = initial_prices.len();
        let mut probabilities = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            let row = parse_row(line)?;
            if row.len() != m + 1 {
                return Err(MarketError::Csv(format!(
                    "event row has {} fields, expected {}",
                    row.len(),
                    m + 1
                )));
            }
            probabilities.push(row[0]);
            rows.push(row[1..].to_vec());
        }
        let market = DiscreteMarket {
            bank_gross_return,
            terminal_payoff_matrix: DMat::from_rows(&rows),
            initial_prices,
            probabilities,
        };
        market.validate()?;
        Ok(market)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:.12e}", self.bank_gross_return));
        for p in &self.initial_prices {
            out.push_str(&format!(",{p:.12e}"));
        }
        out.push('\n');
        for i in 0..self.n_states() {
            out.push_str(&format!("{:.12e}", self.probabilities[i]));
            for j in 0..self.n_assets() {
                out.push_str(&format!(",{:.12e}", self.terminal_payoff_matrix.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

fn parse_row(line: &str) -> Result<Vec<f64>, MarketError> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| MarketError::Csv(format!("bad number {f:?}: {e}")))
        })
        .collect()
}

/// Replicating portfolio for a contingent claim.
#[derive(Clone, Debug)]
pub struct ReplicationResult {
    /// Dollars in the bank at time zero (beta).
    pub bank_units: f64,
    /// Shares of each risky asset (alpha_i).
    pub asset_units: Vec<f64>,
    /// beta + sum alpha_i S0_i: the law-of-one-price value of the claim.
    pub initial_cost: f64,
}

/// Solve the terminal replication system for the claim payoffs. The claim
/// must lie in the column span of the augmented payoff matrix.
pub fn replicate_claim(
    market: &DiscreteMarket,
    claim_payoffs: &[f64],
) -> Result<ReplicationResult, MarketError> {
    market.validate()?;
    let n = market.n_states();
    if claim_payoffs.len() != n {
        return Err(MarketError::Invalid(format!(
            "claim has {} payoffs for {n} states",
            claim_payoffs.len()
        )));
    }
    let a = market.augmented();
    let dec = svd(&a);
    let weights = dec.solve_min_norm(claim_payoffs, RANK_TOL);
    let achieved = a.matvec(&weights);
    let scale = market
        .price_scale()
        .max(claim_payoffs.iter().fold(0.0_f64, |m, c| m.max(c.abs())));
    let residual = achieved
        .iter()
        .zip(claim_payoffs)
        .fold(0.0_f64, |m, (x, c)| m.max((x - c).abs()));
    if residual > 1e-10 * scale {
        return Err(MarketError::SingularMarket(format!(
            "claim outside the asset span (replication residual {residual:.3e})"
        )));
    }
    let bank_units = weights[0];
    let asset_units = weights[1..].to_vec();
    let initial_cost = bank_units
        + asset_units
            .iter()
            .zip(&market.initial_prices)
            .map(|(a, s)| a * s)
            .sum::<f64>();
    Ok(ReplicationResult {
        bank_units,
        asset_units,
        initial_cost,
    })
}

/// Risk-neutral probabilities.
#[derive(Clone, Debug)]
pub struct EmmResult {
    pub q: Vec<f64>,
    /// True when the martingale system is underdetermined (the EMM is not
    /// unique, so by the second fundamental theorem the market is incomplete).
    pub non_unique: bool,
}

/// Constraint system rows: the normalization sum(q) = 1 plus one
/// martingale row per asset.
fn emm_system(market: &DiscreteMarket) -> (DMat, Vec<f64>) {
    let n = market.n_states();
    let m = market.n_assets();
    let g = market.bank_gross_return;
    let mut a = DMat::zeros(m + 1, n);
    let mut b = vec![0.0; m + 1];
    for i in 0..n {
        a.set(0, i, 1.0);
    }
    b[0] = 1.0;
    for j in 0..m {
        for i in 0..n {
            a.set(j + 1, i, market.terminal_payoff_matrix.get(i, j));
        }
        b[j + 1] = g * market.initial_prices[j];
    }
    (a, b)
}

/// Find an equivalent martingale measure. Underdetermined systems return
/// the minimum-norm solution (when it is strictly positive) and set the
/// non-uniqueness flag; infeasible systems are `NoEmm`.
pub fn find_emm(market: &DiscreteMarket) -> Result<EmmResult, MarketError> {
    market.validate()?;
    let n = market.n_states();
    let (a, b) = emm_system(market);
    let scale = market.price_scale();

    // Feasibility with strict positivity: maximize the floor t with
    // q_i = t + r_i. Standard-form variables are [t, r_1..r_N].
    let mut lp_a = DMat::zeros(a.rows, n + 1);
    for row in 0..a.rows {
        let mut tsum = 0.0;
        for i in 0..n {
            let coef = a.get(row, i);
            lp_a.set(row, i + 1, coef);
            tsum += coef;
        }
        lp_a.set(row, 0, tsum);
    }
    let mut cost = vec![0.0; n + 1];
    cost[0] = -1.0; // maximize t
    let lp_sol = match lp::solve(&cost, &lp_a, &b) {
        LpResult::Optimal { x, .. } => x,
        LpResult::Infeasible => {
            return Err(MarketError::NoEmm(
                "martingale system infeasible under q >= 0 (arbitrage exists)".into(),
            ))
        }
        LpResult::Unbounded => {
            return Err(MarketError::NoEmm("degenerate martingale system".into()))
        }
    };
    let floor = lp_sol[0];
    if floor <= POSITIVITY_TOL {
        return Err(MarketError::NoEmm(format!(
            "only boundary solutions: best attainable min q_i = {floor:.3e} <= {POSITIVITY_TOL:.0e}"
        )));
    }

    let dec = svd(&a);
    let non_unique = dec.rank(RANK_TOL) < n;
    let min_norm = dec.solve_min_norm(&b, RANK_TOL);
    let q = if min_norm.iter().all(|qi| *qi > POSITIVITY_TOL) {
        min_norm
    } else {
        // min-norm point lies outside the positive orthant; fall back to
        // the interior point found by the LP
        lp_sol[1..].iter().map(|r| r + floor).collect()
    };

    // martingale condition to 1e-12 relative
    let achieved = a.matvec(&q);
    for (got, want) in achieved.iter().zip(&b) {
        if (got - want).abs() > 1e-12 * scale.max(1.0) {
            return Err(MarketError::NoEmm(format!(
                "martingale residual {:.3e} exceeds tolerance",
                (got - want).abs()
            )));
        }
    }
    Ok(EmmResult { q, non_unique })
}

/// Zero-cost portfolio certifying an arbitrage.
#[derive(Clone, Debug)]
pub struct ArbitrageCertificate {
    pub bank_units: f64,
    pub asset_units: Vec<f64>,
    /// Terminal value of the portfolio in every state.
    pub terminal_values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ArbitrageReport {
    pub arbitrage: bool,
    pub certificate: Option<ArbitrageCertificate>,
}

/// Search for a zero-cost portfolio with nonnegative terminal value in
/// every state and positive value in at least one. Weights are boxed to
/// [-1, 1]; arbitrage is scale-invariant so this loses nothing.
pub fn detect_arbitrage(market: &DiscreteMarket) -> Result<ArbitrageReport, MarketError> {
    market.validate()?;
    let n = market.n_states();
    let m = market.n_assets() + 1; // bank column included
    let aug = market.augmented();
    let scale = market.price_scale();

    // variables: wp (m), wm (m), payoff slacks s (n), wp bounds u (m), wm bounds v (m)
    let nv = 2 * m + n + 2 * m;
    let rows = 1 + n + 2 * m;
    let mut a = DMat::zeros(rows, nv);
    let mut b = vec![0.0; rows];

    // cost row: beta + sum alpha_j S0_j = 0, normalized by the price scale
    a.set(0, 0, 1.0 / scale);
    a.set(0, m, -1.0 / scale);
    for j in 1..m {
        let s0 = market.initial_prices[j - 1] / scale;
        a.set(0, j, s0);
        a.set(0, m + j, -s0);
    }

    // payoff rows: sum_j aug_ij (wp_j - wm_j) - s_i = 0
    for i in 0..n {
        for j in 0..m {
            let c = aug.get(i, j) / scale;
            a.set(1 + i, j, c);
            a.set(1 + i, m + j, -c);
        }
        a.set(1 + i, 2 * m + i, -1.0);
    }

    // box rows: wp_j + u_j = 1, wm_j + v_j = 1
    for j in 0..m {
        a.set(1 + n + j, j, 1.0);
        a.set(1 + n + j, 2 * m + n + j, 1.0);
        b[1 + n + j] = 1.0;
        a.set(1 + n + m + j, m + j, 1.0);
        a.set(1 + n + m + j, 2 * m + n + m + j, 1.0);
        b[1 + n + m + j] = 1.0;
    }

    // maximize total terminal payoff
    let mut cost = vec![0.0; nv];
    for i in 0..n {
        cost[2 * m + i] = -1.0;
    }

    let sol = match lp::solve(&cost, &a, &b) {
        LpResult::Optimal { x, .. } => x,
        LpResult::Infeasible => {
            return Err(MarketError::Invalid("arbitrage LP infeasible; malformed market".into()))
        }
        LpResult::Unbounded => {
            return Err(MarketError::Invalid("arbitrage LP unbounded despite boxed weights".into()))
        }
    };
    let gain: f64 = (0..n).map(|i| sol[2 * m + i]).sum();
    if gain <= 1e-9 {
        return Ok(ArbitrageReport {
            arbitrage: false,
            certificate: None,
        });
    }
    let weights: Vec<f64> = (0..m).map(|j| sol[j] - sol[m + j]).collect();
    let terminal_values = aug.matvec(&weights);
    Ok(ArbitrageReport {
        arbitrage: true,
        certificate: Some(ArbitrageCertificate {
            bank_units: weights[0],
            asset_units: weights[1..].to_vec(),
            terminal_values,
        }),
    })
}

/// Discounted expected claim value under the measure q.
pub fn emm_price(market: &DiscreteMarket, q: &[f64], claim_payoffs: &[f64]) -> f64 {
    let e: f64 = q.iter().zip(claim_payoffs).map(|(qi, ci)| qi * ci).sum();
    e / market.bank_gross_return
}

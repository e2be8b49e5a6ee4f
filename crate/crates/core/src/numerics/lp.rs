//! Dense two-phase simplex for small linear programs in standard form:
//!
//! ```text
//! minimize    c . x
//! subject to  A x = b,  x >= 0
//! ```
//!
//! Bland's rule is used throughout, so the method cannot cycle. Problem
//! sizes here are tiny (discrete markets with a handful of states), so a
//! dense tableau is the right tool.

use super::linalg::DMat;

#[derive(Clone, Debug, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const TOL: f64 = 1e-11;

struct Tableau {
    // rows: m constraint rows then the objective row; cols: n vars + rhs
    m: usize,
    n: usize,
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let factor = self.t[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..=self.n {
                self.t[r][c] -= factor * self.t[row][c];
            }
        }
        self.basis[row] = col;
    }

    /// Run simplex iterations until optimal or unbounded.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Result<(), LpResult> {
        for _ in 0..20_000 {
            // Bland: entering variable = lowest index with negative reduced cost
            let mut enter = None;
            for j in 0..self.n {
                if allowed(j) && self.t[self.m][j] < -TOL {
                    enter = Some(j);
                    break;
                }
            }
            let Some(col) = enter else { return Ok(()) };
            // ratio test, Bland tie-break on basis index
            let mut row: Option<usize> = None;
            let mut best = f64::INFINITY;
            for r in 0..self.m {
                let a = self.t[r][col];
                if a > TOL {
                    let ratio = self.t[r][self.n] / a;
                    let better = match row {
                        None => true,
                        Some(cur) => {
                            ratio < best - TOL
                                || (ratio < best + TOL && self.basis[r] < self.basis[cur])
                        }
                    };
                    if better {
                        best = ratio;
                        row = Some(r);
                    }
                }
            }
            match row {
                Some(r) => self.pivot(r, col),
                None => return Err(LpResult::Unbounded),
            }
        }
        Err(LpResult::Infeasible) // iteration cap; should not happen with Bland
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.t[r][self.n];
            }
        }
        x
    }
}

/// Solve min c.x s.t. Ax = b, x >= 0.
pub fn solve(c: &[f64], a: &DMat, b: &[f64]) -> LpResult {
    let m = a.rows;
    let n = a.cols;
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);

    // phase 1 tableau with artificial variables
    let total = n + m;
    let mut t = vec![vec![0.0; total + 1]; m + 1];
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a.get(i, j);
        }
        t[i][n + i] = 1.0;
        t[i][total] = flip * b[i];
    }
    // phase-1 objective: sum of artificials, expressed in reduced form
    for j in 0..=total {
        let mut s = 0.0;
        for i in 0..m {
            s += t[i][j];
        }
        t[m][j] = -s;
    }
    for i in 0..m {
        t[m][n + i] = 0.0;
    }

    let mut tab = Tableau {
        m,
        n: total,
        t,
        basis: (n..n + m).collect(),
    };
    if let Err(e) = tab.run(&|_| true) {
        return e;
    }
    let phase1 = -tab.t[m][total];
    if phase1.abs() > 1e-8 {
        return LpResult::Infeasible;
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.t[r][j].abs() > 1e-9) {
                tab.pivot(r, col);
            }
        }
    }

    // phase 2: swap in the real objective (reduced against current basis)
    for j in 0..=tab.n {
        tab.t[m][j] = 0.0;
    }
    for j in 0..n {
        tab.t[m][j] = c[j];
    }
    for r in 0..m {
        let bj = tab.basis[r];
        if bj < n && c[bj] != 0.0 {
            let coef = c[bj];
            for j in 0..=tab.n {
                tab.t[m][j] -= coef * tab.t[r][j];
            }
        }
    }
    // artificials stay out
    if let Err(e) = tab.run(&|j| j < n) {
        return e;
    }
    let x = tab.solution()[..n].to_vec();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpResult::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_basic_lp() {
        // min -x1 - 2 x2 s.t. x1 + x2 + s1 = 4, x1 + 3 x2 + s2 = 6
        let a = DMat::from_rows(&[vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]]);
        let r = solve(&[-1.0, -2.0, 0.0, 0.0], &a, &[4.0, 6.0]);
        match r {
            LpResult::Optimal { x, objective } => {
                assert!((x[0] - 3.0).abs() < 1e-9);
                assert!((x[1] - 1.0).abs() < 1e-9);
                assert!((objective + 5.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_infeasible() {
        // x1 = 1 and x1 = 2 simultaneously
        let a = DMat::from_rows(&[vec![1.0], vec![1.0]]);
        assert_eq!(solve(&[0.0], &a, &[1.0, 2.0]), LpResult::Infeasible);
    }

    #[test]
    fn reports_unbounded() {
        // min -x1 with x1 - x2 = 0 (both can grow forever)
        let a = DMat::from_rows(&[vec![1.0, -1.0]]);
        assert_eq!(solve(&[-1.0, 0.0], &a, &[0.0]), LpResult::Unbounded);
    }

    #[test]
    fn handles_degenerate_equalities() {
        // duplicated constraint row
        let a = DMat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        match solve(&[1.0, 0.0], &a, &[1.0, 1.0]) {
            LpResult::Optimal { x, .. } => assert!((x[0] + x[1] - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}

//! Small dense matrices with a one-sided Jacobi SVD.
//!
//! The market problems this backs are tiny (a handful of states and
//! assets), so simplicity and high relative accuracy win over speed.
//! Rank decisions use a singular-value cutoff relative to the largest
//! singular value.

#[derive(Clone, Debug, PartialEq)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> DMat {
        let mut t = DMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }
}

/// Thin SVD A = U diag(s) V^T with singular values sorted descending.
pub struct Svd {
    pub u: DMat,      // rows x k
    pub s: Vec<f64>,  // k = min(rows, cols)
    pub v: DMat,      // cols x k
}

/// One-sided Jacobi (Hestenes) SVD. Orthogonalizes column pairs of a
/// working copy until convergence; singular values are the column norms.
pub fn svd(a: &DMat) -> Svd {
    if a.rows < a.cols {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let m = a.rows;
    let n = a.cols;
    let mut w = a.clone(); // m x n, columns rotated in place
    let mut v = DMat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    // column norms -> singular values; normalize U
    let mut entries: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let norm = (0..m).map(|i| w.get(i, j).powi(2)).sum::<f64>().sqrt();
            (norm, j)
        })
        .collect();
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut u = DMat::zeros(m, n);
    let mut vv = DMat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(norm, j)) in entries.iter().enumerate() {
        s.push(norm);
        for i in 0..m {
            u.set(i, k, if norm > 0.0 { w.get(i, j) / norm } else { 0.0 });
        }
        for i in 0..n {
            vv.set(i, k, v.get(i, j));
        }
    }
    Svd { u, s, v: vv }
}

impl Svd {
    /// Numerical rank with cutoff `tol_rel * s_max`.
    pub fn rank(&self, tol_rel: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x > tol_rel * smax).count()
    }

    /// Minimum-norm least-squares solution of A x = b via the pseudoinverse,
    /// truncating singular values below `tol_rel * s_max`.
    pub fn solve_min_norm(&self, b: &[f64], tol_rel: f64) -> Vec<f64> {
        let k = self.s.len();
        let smax = self.s.first().copied().unwrap_or(0.0);
        let n = self.v.rows;
        let mut x = vec![0.0; n];
        for j in 0..k {
            if smax == 0.0 || self.s[j] <= tol_rel * smax {
                continue;
            }
            let utb: f64 = (0..self.u.rows).map(|i| self.u.get(i, j) * b[i]).sum();
            let c = utb / self.s[j];
            for i in 0..n {
                x[i] += c * self.v.get(i, j);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_matrix() {
        let a = DMat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 10.0],
        ]);
        let d = svd(&a);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += d.u.get(i, k) * d.s[k] * d.v.get(j, k);
                }
                assert!((acc - a.get(i, j)).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn rank_of_singular_matrix() {
        let a = DMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(svd(&a).rank(1e-10), 1);
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        // x + y = 2 has min-norm solution (1, 1)
        let a = DMat::from_rows(&[vec![1.0, 1.0]]);
        let x = svd(&a).solve_min_norm(&[2.0], 1e-10);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_solve_square_system() {
        let a = DMat::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let x = svd(&a).solve_min_norm(&[9.0, 8.0], 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_singular_values_match_transpose() {
        let a = DMat::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]);
        let s1 = svd(&a).s;
        let s2 = svd(&a.transpose()).s;
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

//! Shared numerical kernels: special functions, quadrature, root finding,
//! ODE integration, derivative-free optimization, small dense linear
//! algebra, and a dense simplex solver for small linear programs.

pub mod linalg;
pub mod lp;
pub mod ode;
pub mod optim;
pub mod quad;
pub mod roots;
pub mod special;

/// Pairwise (cascade) summation. Error grows like O(log n) rather than
/// O(n), and the result is independent of how the caller produced the
/// slice, which keeps seeded Monte Carlo reductions reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 64;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean (ddof = 1).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

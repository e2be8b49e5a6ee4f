//! Gauss-Legendre quadrature.
//!
//! Nodes and weights on [-1, 1] by Newton iteration on the Legendre
//! recurrence, then affine-mapped to arbitrary intervals. Composite
//! panels are used for long or oscillatory ranges.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate f over [a, b] with a single n-point rule.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        acc += w * f(mid + c * x);
    }
    acc * c
}

/// Integrate f over [a, b] split into `panels` equal panels of
/// `nodes_per_panel`-point rules.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
) -> f64 {
    let (xs, ws) = gauss_legendre(nodes_per_panel);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let c = 0.5 * h;
        let mid = lo + c;
        for (x, w) in xs.iter().zip(&ws) {
            acc += w * f(mid + c * x);
        }
    }
    acc * 0.5 * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // n-point rule integrates degree 2n-1 exactly: x^9 on [0,1] with n=5
        let got = integrate(|x| x.powi(9), 0.0, 1.0, 5);
        assert!((got - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gaussian_integral() {
        let got = integrate(|x| (-x * x).exp(), -8.0, 8.0, 128);
        assert!((got - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn composite_matches_single_panel_refinement() {
        let f = |x: f64| (3.0 * x).sin() * (-0.1 * x).exp();
        let a = integrate_composite(f, 0.0, 20.0, 16, 16);
        let b = integrate_composite(f, 0.0, 20.0, 64, 16);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 7, 32, 256] {
            let (_, ws) = gauss_legendre(n);
            let s: f64 = ws.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: sum {s}");
        }
    }
}

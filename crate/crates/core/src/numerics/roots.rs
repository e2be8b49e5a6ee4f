//! Safeguarded scalar root finding.

/// Newton iteration with a maintained bisection bracket. Falls back to
/// bisection whenever the Newton step leaves the bracket or the
/// derivative degenerates. Returns the root and the iteration count, or
/// `None` if `max_iter` is exhausted before `|f| <= f_tol`.
///
/// Requires f(lo) and f(hi) to bracket a sign change.
pub fn newton_bisection<F, D>(
    mut f: F,
    mut df: D,
    lo: f64,
    hi: f64,
    x0: f64,
    f_tol: f64,
    max_iter: usize,
) -> Option<(f64, usize)>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some((a, 0));
    }
    if fb == 0.0 {
        return Some((b, 0));
    }
    if fa * fb > 0.0 {
        return None;
    }
    let mut x = x0.clamp(a, b);
    for it in 0..max_iter {
        let fx = f(x);
        if fx.abs() <= f_tol {
            return Some((x, it));
        }
        // maintain bracket
        if fx * fa < 0.0 {
            b = x;
        } else {
            a = x;
            fa = fx;
        }
        let d = df(x);
        let newton = if d != 0.0 && d.is_finite() {
            x - fx / d
        } else {
            f64::NAN
        };
        x = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let (x, _) =
            newton_bisection(|x| x * x * x - 2.0, |x| 3.0 * x * x, 0.0, 4.0, 1.0, 1e-14, 100)
                .unwrap();
        assert!((x - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn survives_flat_derivative() {
        // derivative vanishes at the initial point; bisection takes over
        let (x, _) =
            newton_bisection(|x| x.powi(3), |x| 3.0 * x * x, -1.0, 2.0, 0.0, 1e-12, 200).unwrap();
        assert!(x.abs() < 1e-3);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(newton_bisection(|x| x * x + 1.0, |x| 2.0 * x, -1.0, 1.0, 0.5, 1e-12, 50).is_none());
    }
}

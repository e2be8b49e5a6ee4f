//! Nelder-Mead simplex minimization with box constraints.
//!
//! Good enough for low-dimensional calibration problems (SVI slices have
//! five parameters); callers wanting global behavior run multiple starts.

pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when both the simplex diameter and the f-value spread fall below these.
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial simplex edge, relative to the box width per coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            x_tol: 1e-12,
            f_tol: 1e-14,
            initial_step: 0.1,
        }
    }
}

fn clamp_to_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Minimize `f` inside the box `[lo, hi]` starting from `x0`.
/// Returns (argmin, min value, evaluations used).
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        f(x)
    };

    // initial simplex, clamped to the box
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp_to_box(&mut start, lo, hi);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        let step = opts.initial_step * (hi[i] - lo[i]).max(1e-8);
        v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
        clamp_to_box(&mut v, lo, hi);
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    while evals < opts.max_evals {
        // order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let sorted: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let fsorted: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        simplex = sorted;
        fv = fsorted;

        let diam = (0..n)
            .map(|j| {
                simplex
                    .iter()
                    .map(|v| v[j])
                    .fold(f64::NEG_INFINITY, f64::max)
                    - simplex.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0_f64, f64::max);
        if diam < opts.x_tol && (fv[n] - fv[0]).abs() < opts.f_tol {
            break;
        }

        // centroid of all but worst
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();

        let point = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|j| centroid[j] + coef * (simplex[n][j] - centroid[j]))
                .collect();
            clamp_to_box(&mut p, lo, hi);
            p
        };

        let xr = point(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < fv[0] {
            let xe = point(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let xc = if fr < fv[n] { point(-0.5) } else { point(0.5) };
            let fc = eval(&xc, &mut evals);
            if fc < fv[n].min(fr) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                // shrink toward best
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    let v = simplex[i].clone();
                    fv[i] = eval(&v, &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    (simplex[best].clone(), fv[best], evals)
}

//! Adaptive Runge-Kutta integration for small ODE systems.
//!
//! Dormand-Prince 5(4) with PI step control. Integration may run
//! forward or backward in time; terminal-value problems (Riccati
//! systems integrated back from maturity) pass `t0 > t1`.

/// Outcome of an adaptive integration.
pub enum OdeOutcome {
    /// Reached `t1`; carries the terminal state.
    Reached(Vec<f64>),
    /// State norm exceeded `blowup_norm` at the given time.
    Blowup { t: f64, state: Vec<f64> },
    /// Step size underflowed before reaching `t1`.
    StepUnderflow { t: f64 },
}

pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Abort (reporting `Blowup`) when the max-norm of the state passes this.
    pub blowup_norm: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            blowup_norm: 1e6,
            max_steps: 2_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate dy/dt = f(t, y) from t0 to t1 (either direction), calling
/// `observer(t, y)` after every accepted step.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    mut observer: O,
) -> OdeOutcome
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
    O: FnMut(f64, &[f64]),
{
    let dir = (t1 - t0).signum();
    if dir == 0.0 {
        return OdeOutcome::Reached(y0.to_vec());
    }
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = dir * ((t1 - t0).abs() / 100.0).min(0.1).max(1e-10);
    let mut k1 = f(t, &y);

    let stage = |y: &[f64], ks: &[(&Vec<f64>, f64)], h: f64| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] + h * ks.iter().map(|(k, c)| c * k[i]).sum::<f64>())
            .collect()
    };

    for _ in 0..opts.max_steps {
        if (t - t1) * dir >= 0.0 {
            return OdeOutcome::Reached(y);
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }

        let k2 = f(t + A21 * h, &stage(&y, &[(&k1, A21)], h));
        let k3 = f(t + 0.3 * h, &stage(&y, &[(&k1, A31), (&k2, A32)], h));
        let k4 = f(t + 0.8 * h, &stage(&y, &[(&k1, A41), (&k2, A42), (&k3, A43)], h));
        let k5 = f(
            t + 8.0 / 9.0 * h,
            &stage(&y, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)], h),
        );
        let k6 = f(
            t + h,
            &stage(
                &y,
                &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)],
                h,
            ),
        );
        let y5: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]))
            .collect();
        let k7 = f(t + h, &y5);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }

        if err <= 1.0 || !err.is_finite() && h.abs() < 1e-14 {
            t += h;
            y = y5;
            k1 = k7;
            observer(t, &y);
            let norm = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if norm > opts.blowup_norm || !norm.is_finite() {
                return OdeOutcome::Blowup { t, state: y };
            }
        }
        let factor = if err.is_finite() && err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else if err == 0.0 {
            5.0
        } else {
            0.2
        };
        h *= factor;
        if (t - t1) * dir < 0.0 && h.abs() < 1e-14 * (1.0 + t.abs()) {
            return OdeOutcome::StepUnderflow { t };
        }
    }
    OdeOutcome::StepUnderflow { t }
}

/// Convenience wrapper: integrate and return the terminal state, or the
/// blowup time as `Err(t)`.
pub fn terminal_state<F>(f: F, t0: f64, t1: f64, y0: &[f64], opts: &OdeOptions) -> Result<Vec<f64>, f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    match integrate(f, t0, t1, y0, opts, |_, _| {}) {
        OdeOutcome::Reached(y) => Ok(y),
        OdeOutcome::Blowup { t, .. } => Err(t),
        OdeOutcome::StepUnderflow { t } => Err(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_forward() {
        let y = terminal_state(|_, y| vec![-y[0]], 0.0, 1.0, &[1.0], &OdeOptions::default())
            .unwrap();
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        // y' = y integrated from t=1 back to t=0 with y(1)=e gives y(0)=1
        let y = terminal_state(
            |_, y| vec![y[0]],
            1.0,
            0.0,
            &[std::f64::consts::E],
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_riccati_blowup() {
        // y' = 1 + y^2, y(0)=0 blows up at pi/2
        let err = terminal_state(
            |_, y| vec![1.0 + y[0] * y[0]],
            0.0,
            3.0,
            &[0.0],
            &OdeOptions {
                blowup_norm: 1e8,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!((err - std::f64::consts::FRAC_PI_2).abs() < 1e-4, "blowup at {err}");
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let y = terminal_state(
            |_, y| vec![y[1], -y[0]],
            0.0,
            2.0 * std::f64::consts::PI,
            &[1.0, 0.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8);
        assert!(y[1].abs() < 1e-8);
    }
}

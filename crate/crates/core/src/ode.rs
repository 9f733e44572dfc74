//! Adaptive Dormand–Prince 5(4) integrator for the small, smooth,
//! fixed-dimension systems used by the generating-function machinery.

use crate::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const MAX_STEPS: usize = 2_000_000;

#[inline]
fn axpy<const N: usize>(y: &mut [f64; N], a: f64, x: &[f64; N]) {
    for i in 0..N {
        y[i] += a * x[i];
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` with absolute tolerance `tol`
/// per component and a maximum step of `h_max`.
pub(crate) fn rk45<const N: usize, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: f64,
    h_max: f64,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    debug_assert!(t1 >= t0);
    if t1 <= t0 {
        return Ok(y0);
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = (t1 - t0).min(h_max).min(0.1);
    let mut k1 = f(t, &y);

    for _ in 0..MAX_STEPS {
        if t >= t1 {
            return Ok(y);
        }
        h = h.min(t1 - t);

        // Dormand-Prince stages.
        let mut y2 = y;
        axpy(&mut y2, h * (1.0 / 5.0), &k1);
        let k2 = f(t + h / 5.0, &y2);

        let mut y3 = y;
        axpy(&mut y3, h * (3.0 / 40.0), &k1);
        axpy(&mut y3, h * (9.0 / 40.0), &k2);
        let k3 = f(t + h * 3.0 / 10.0, &y3);

        let mut y4 = y;
        axpy(&mut y4, h * (44.0 / 45.0), &k1);
        axpy(&mut y4, h * (-56.0 / 15.0), &k2);
        axpy(&mut y4, h * (32.0 / 9.0), &k3);
        let k4 = f(t + h * 4.0 / 5.0, &y4);

        let mut y5 = y;
        axpy(&mut y5, h * (19372.0 / 6561.0), &k1);
        axpy(&mut y5, h * (-25360.0 / 2187.0), &k2);
        axpy(&mut y5, h * (64448.0 / 6561.0), &k3);
        axpy(&mut y5, h * (-212.0 / 729.0), &k4);
        let k5 = f(t + h * 8.0 / 9.0, &y5);

        let mut y6 = y;
        axpy(&mut y6, h * (9017.0 / 3168.0), &k1);
        axpy(&mut y6, h * (-355.0 / 33.0), &k2);
        axpy(&mut y6, h * (46732.0 / 5247.0), &k3);
        axpy(&mut y6, h * (49.0 / 176.0), &k4);
        axpy(&mut y6, h * (-5103.0 / 18656.0), &k5);
        let k6 = f(t + h, &y6);

        // 5th-order solution (also the FSAL stage point).
        let mut y_next = y;
        axpy(&mut y_next, h * (35.0 / 384.0), &k1);
        axpy(&mut y_next, h * (500.0 / 1113.0), &k3);
        axpy(&mut y_next, h * (125.0 / 192.0), &k4);
        axpy(&mut y_next, h * (-2187.0 / 6784.0), &k5);
        axpy(&mut y_next, h * (11.0 / 84.0), &k6);
        let k7 = f(t + h, &y_next);

        // Embedded 4th-order error estimate.
        let mut err = 0.0f64;
        let e = [
            35.0 / 384.0 - 5179.0 / 57600.0,
            0.0,
            500.0 / 1113.0 - 7571.0 / 16695.0,
            125.0 / 192.0 - 393.0 / 640.0,
            -2187.0 / 6784.0 + 92097.0 / 339200.0,
            11.0 / 84.0 - 187.0 / 2100.0,
            -1.0 / 40.0,
        ];
        for i in 0..N {
            let de = h
                * (e[0] * k1[i]
                    + e[2] * k3[i]
                    + e[3] * k4[i]
                    + e[4] * k5[i]
                    + e[5] * k6[i]
                    + e[6] * k7[i]);
            err = err.max(de.abs());
        }

        if !err.is_finite() {
            return Err(Error::OdeTolerance(format!(
                "non-finite error estimate at t = {t:.6}"
            )));
        }

        if err <= tol {
            t += h;
            y = y_next;
            k1 = k7; // FSAL
            let scale = if err == 0.0 {
                MAX_SCALE
            } else {
                (SAFETY * (tol / err).powf(0.2)).clamp(MIN_SCALE, MAX_SCALE)
            };
            h = (h * scale).min(h_max);
        } else {
            let scale = (SAFETY * (tol / err).powf(0.2)).clamp(MIN_SCALE, 1.0);
            h *= scale;
            if h < 1e-14 {
                return Err(Error::OdeTolerance(format!(
                    "step size underflow at t = {t:.6}"
                )));
            }
        }
    }
    Err(Error::OdeTolerance("step budget exhausted".into()))
}

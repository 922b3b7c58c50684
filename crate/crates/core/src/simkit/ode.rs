//! Adaptive Dormand–Prince 5(4) integration of complex linear systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, max_steps: 2_000_000 }
    }
}

/// Integrates y' = f(t, y) from t = 0 and returns y at each of the
/// non-decreasing `times`. Steps are shortened to land on every output time.
pub fn integrate<F>(f: F, y0: Vec<Complex64>, times: &[f64], tol: Tolerance) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len();
    let mut y = y0;
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut y_new = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0usize;
    f(t, &y, &mut k[0]);
    for &target in times {
        if target < t {
            return Err(Error::InvalidArgument("output times must be non-decreasing and ≥ 0".into()));
        }
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::Numeric(format!(
                    "ODE step budget exhausted at t = {t} (h = {h}, target {target})"
                )));
            }
            let step = h.min(target - t);
            let last = step == target - t;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * (step * A[s][j]);
                        }
                    }
                    tmp[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * step, &tmp, &mut tail[0]);
            }
            // the 7th stage is evaluated at the 5th-order solution (FSAL)
            let mut err = 0.0;
            for i in 0..n {
                let mut acc = y[i];
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    acc += k[s][i] * (step * B[s]);
                    e += k[s][i] * (step * (B[s] - B4[s]));
                }
                y_new[i] = acc;
                let scale = tol.atol + tol.rtol * y[i].norm().max(acc.norm());
                err += (e.norm() / scale).powi(2);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Numeric(format!("non-finite ODE error estimate at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(last && err <= 1.0) || factor < 1.0 {
                h = step * factor;
            }
            if h < 1e-14 * target.abs().max(1.0) {
                return Err(Error::Numeric(format!("ODE step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_rotation() {
        // y' = (-0.3 + 2i) y
        let rate = Complex64::new(-0.3, 2.0);
        let times = [0.0, 0.5, 3.0, 10.0];
        let ys = integrate(
            |_, y, dy| dy[0] = rate * y[0],
            vec![Complex64::new(1.0, 0.0)],
            &times,
            Tolerance::default(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            let exact = (rate * t).exp();
            assert!((y[0] - exact).norm() < 1e-9, "{t}");
        }
    }
}

//! Adaptive Dormand–Prince 5(4) integrator for real systems.

use crate::error::{Error, Result};

/// Returned by an observer after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Dopri5 {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }

    /// Integrate from `t0` to `t1` (either direction).
    pub fn integrate<F>(&self, f: F, t0: f64, y0: &[f64], t1: f64) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.integrate_observed(f, t0, y0, t1, |_, _| Control::Continue)
            .map(|(_, y)| y)
    }

    /// Integrate while reporting each accepted step to `observe`; stops
    /// early when the observer asks for it. Returns the final `(t, y)`.
    pub fn integrate_observed<F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[f64],
        t1: f64,
        mut observe: O,
    ) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> Control,
    {
        let n = y0.len();
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        if span == 0.0 {
            return Ok((t0, y0.to_vec()));
        }
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        f(t, &y, &mut k[0]);
        let mut h = (0.01 * span).min(self.h_max).min(1e-2_f64.max(span * 1e-6));
        let mut steps = 0usize;
        while (t1 - t) * dir > 0.0 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::Integration(format!("step limit reached at t = {t}")));
            }
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
            let last = h >= (t1 - t).abs();
            let hs = if last { (t1 - t).abs() } else { h } * dir;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += hs * A[s][j] * kj[i];
                    }
                    tmp[i] = acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * hs, &tmp, &mut tail[0]);
                if s == 6 {
                    ynew.copy_from_slice(&tmp);
                }
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((hs * e / sc).abs());
            }
            if !err.is_finite() {
                h *= 0.2;
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + hs };
                y.copy_from_slice(&ynew);
                let k6 = k[6].clone();
                k[0].copy_from_slice(&k6);
                if observe(t, &y) == Control::Stop {
                    return Ok((t, y));
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * fac).min(self.h_max);
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Ok((t, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let s = Dopri5::with_tol(1e-12);
        let y = s
            .integrate(
                |_, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0];
                },
                0.0,
                &[1.0, 0.0],
                10.0,
            )
            .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn backward_exponential() {
        let s = Dopri5::with_tol(1e-12);
        let y = s.integrate(|_, y, d| d[0] = y[0], 0.0, &[1.0], -3.0).unwrap();
        assert!((y[0] - (-3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn observer_stops() {
        let s = Dopri5::with_tol(1e-10);
        let (t, _) = s
            .integrate_observed(|_, _, d| d[0] = 1.0, 0.0, &[0.0], 100.0, |_, y| {
                if y[0] > 1.0 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            })
            .unwrap();
        assert!(t > 1.0 && t < 100.0);
    }
}

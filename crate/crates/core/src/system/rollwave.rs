use super::{lax_family, rankine_hugoniot_residual, HyperbolicSystem, LaxShock};
use crate::error::{Error, Result};
use nalgebra::DVector;
use std::fmt::Debug;
use std::path::Path;
use std::sync::Arc;

/// Side of a shock: `Minus` is the left trace `u(X−0)`, `Plus` the right one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

/// Smooth arc of a traveling roll-wave, parametrised by the distance
/// `y ∈ [0, L]` to the right of the shock (the shock sits at `y = 0 ≡ L`).
pub trait WaveShape: Send + Sync + Debug {
    /// `d^k U / dy^k` at `y`, for `k ≤ 2`.
    fn eval(&self, y: f64, order: usize) -> DVector<f64>;
    /// One-sided limit of `d^k U / dy^k` at the shock.
    fn trace(&self, side: Side, order: usize) -> DVector<f64>;
}

/// Periodic traveling roll-wave `u(x, t) = U(x − X(t))` with one shock per
/// period, `X(t) = x0 + s t`.
#[derive(Debug, Clone)]
pub struct RollWave {
    pub system: HyperbolicSystem,
    pub period: f64,
    pub m: usize,
    pub speed: f64,
    pub x0: f64,
    pub t_star: f64,
    /// Minimal half-separation of shocks.
    pub r: f64,
    pub label: String,
    pub shape: Arc<dyn WaveShape>,
}

impl RollWave {
    pub fn shock_position(&self, j: usize, t: f64) -> f64 {
        debug_assert!(j >= 1 && j <= self.m);
        self.x0 + (j - 1) as f64 * self.period / self.m as f64 + self.speed * t
    }

    pub fn shock_speed(&self, _j: usize, _t: f64) -> f64 {
        self.speed
    }

    /// Co-moving coordinate `y = (x − X(t)) mod L ∈ [0, L)`.
    pub fn frame(&self, x: f64, t: f64) -> f64 {
        (x - self.shock_position(1, t)).rem_euclid(self.period)
    }

    pub fn field(&self, x: f64, t: f64) -> DVector<f64> {
        self.shape.eval(self.frame(x, t), 0)
    }

    /// `∂_x^k u(x, t)` away from shocks.
    pub fn field_derivative(&self, x: f64, t: f64, k: usize) -> DVector<f64> {
        self.shape.eval(self.frame(x, t), k)
    }

    /// `∂_x^k u^{j±}(t)`.
    pub fn trace(&self, _j: usize, side: Side, k: usize, _t: f64) -> DVector<f64> {
        self.shape.trace(side, k)
    }

    pub fn u_minus(&self) -> DVector<f64> {
        self.shape.trace(Side::Minus, 0)
    }

    pub fn u_plus(&self) -> DVector<f64> {
        self.shape.trace(Side::Plus, 0)
    }

    pub fn rh_residual(&self, j: usize, t: f64) -> DVector<f64> {
        rankine_hugoniot_residual(
            &self.system,
            &self.trace(j, Side::Minus, 0, t),
            &self.trace(j, Side::Plus, 0, t),
            self.shock_speed(j, t),
        )
    }

    pub fn lax(&self, j: usize, t: f64) -> Result<LaxShock> {
        lax_family(
            &self.system,
            &self.trace(j, Side::Minus, 0, t),
            &self.trace(j, Side::Plus, 0, t),
            self.shock_speed(j, t),
        )
    }

    /// RH, Lax and strict-hyperbolicity checks at `samples` times and along
    /// the smooth arc. Returns the smallest Lax margin seen.
    pub fn check_invariants(&self, samples: usize, rh_tol: f64) -> Result<f64> {
        let mut min_margin = f64::INFINITY;
        for i in 0..samples {
            let t = self.t_star * i as f64 / (samples.max(2) - 1) as f64;
            for j in 1..=self.m {
                let res = self.rh_residual(j, t).norm();
                if res > rh_tol {
                    return Err(Error::NoRollWave(format!(
                        "Rankine-Hugoniot residual {res:e} at shock {j}, t = {t}"
                    )));
                }
                min_margin = min_margin.min(self.lax(j, t)?.margin);
            }
            let y = self.period * (i as f64 + 0.5) / samples as f64;
            let e = super::eigen_decompose(&self.system, &self.shape.eval(y, 0))?;
            for w in e.lambdas.windows(2) {
                if w[1] - w[0] < 1e-6 {
                    return Err(Error::NotStrictlyHyperbolic {
                        state: self.shape.eval(y, 0).as_slice().to_vec(),
                        reason: format!("eigenvalue gap {:e}", w[1] - w[0]),
                    });
                }
            }
        }
        Ok(min_margin)
    }

    /// CSV `(x, t, u_1..u_n)` on a uniform grid of `nx × nt` points.
    pub fn csv(&self, nx: usize, nt: usize) -> String {
        let n = self.system.n();
        let cols: Vec<String> = (1..=n).map(|i| format!("u_{i}")).collect();
        let mut s = format!("x,t,{}\n", cols.join(","));
        for it in 0..nt {
            let t = if nt > 1 { self.t_star * it as f64 / (nt - 1) as f64 } else { 0.0 };
            for ix in 0..nx {
                let x = self.period * ix as f64 / nx as f64;
                let u = self.field(x, t);
                let vals: Vec<String> = u.iter().map(|v| format!("{v:.12e}")).collect();
                s += &format!("{x:.12e},{t:.12e},{}\n", vals.join(","));
            }
        }
        s
    }

    pub fn export_csv(&self, path: &Path, nx: usize, nt: usize) -> Result<()> {
        std::fs::write(path, self.csv(nx, nt))?;
        Ok(())
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "system": self.system.name(),
            "label": self.label,
            "L": self.period,
            "m": self.m,
            "T_star": self.t_star,
            "speed": self.speed,
            "shock_positions_t0": (1..=self.m).map(|j| self.shock_position(j, 0.0)).collect::<Vec<_>>(),
            "u_minus": self.u_minus().as_slice(),
            "u_plus": self.u_plus().as_slice(),
        })
    }
}

//! Shock-fixing change of variable `z = Z(t, x)`, piecewise linear in `x`
//! between consecutive shocks, sending `X_j(t)` to `(j−1)L/m`.

use crate::system::RollWave;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub type Curve = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Shock curves `t ↦ (X_j(t), X_j'(t))` of one period, in increasing order.
#[derive(Clone)]
pub struct ShockFixingZ {
    pub period: f64,
    curves: Vec<Curve>,
}

impl std::fmt::Debug for ShockFixingZ {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShockFixingZ")
            .field("period", &self.period)
            .field("m", &self.curves.len())
            .finish()
    }
}

impl ShockFixingZ {
    pub fn new(period: f64, curves: Vec<Curve>) -> Self {
        assert!(!curves.is_empty());
        Self { period, curves }
    }

    pub fn from_rollwave(rw: &RollWave) -> Self {
        let curves = (1..=rw.m)
            .map(|j| {
                let rw = rw.clone();
                Arc::new(move |t: f64| (rw.shock_position(j, t), rw.shock_speed(j, t))) as Curve
            })
            .collect();
        Self::new(rw.period, curves)
    }

    pub fn m(&self) -> usize {
        self.curves.len()
    }

    fn anchors(&self, t: f64) -> Vec<(f64, f64)> {
        let mut a: Vec<(f64, f64)> = self.curves.iter().map(|c| c(t)).collect();
        let (x1, s1) = a[0];
        a.push((x1 + self.period, s1));
        a
    }

    fn spacing(&self) -> f64 {
        self.period / self.m() as f64
    }

    /// Piece `j` containing `x` (0-based), with `x` shifted into
    /// `[X_1, X_1 + L)`, and the shift applied.
    fn locate(&self, t: f64, x: f64) -> (usize, f64, f64, Vec<(f64, f64)>) {
        let a = self.anchors(t);
        let x1 = a[0].0;
        let shifted = x1 + (x - x1).rem_euclid(self.period);
        let j = (0..self.m()).rev().find(|&j| shifted >= a[j].0).unwrap_or(0);
        (j, shifted, x - shifted, a)
    }

    /// `Z(t, x)`, extended so that `Z(t, x + L) = Z(t, x) + L`.
    pub fn z(&self, t: f64, x: f64) -> f64 {
        let (j, xs, shift, a) = self.locate(t, x);
        let h = self.spacing();
        let frac = (xs - a[j].0) / (a[j + 1].0 - a[j].0);
        h * (j as f64 + frac) + shift
    }

    /// `Z⁻¹(t, z)`.
    pub fn x(&self, t: f64, z: f64) -> f64 {
        let h = self.spacing();
        let a = self.anchors(t);
        let periods = (z / self.period).floor();
        let zr = z - periods * self.period;
        let j = ((zr / h).floor() as usize).min(self.m() - 1);
        let frac = zr / h - j as f64;
        a[j].0 + frac * (a[j + 1].0 - a[j].0) + periods * self.period
    }

    /// `(Z_x, Z_t)` at `(t, x)`.
    pub fn derivatives(&self, t: f64, x: f64) -> (f64, f64) {
        let (j, xs, _, a) = self.locate(t, x);
        let h = self.spacing();
        let (xa, sa) = a[j];
        let (xb, sb) = a[j + 1];
        let width = xb - xa;
        let zx = h / width;
        // d/dt of h (x − xa)/(xb − xa) at fixed x.
        let zt = h * (-sa * width - (xs - xa) * (sb - sa)) / (width * width);
        (zx, zt)
    }

    /// Transport matrix of the transformed linear problem,
    /// `Z_x df(u) + Z_t`, at `(t, x)`.
    pub fn transport(&self, df: &DMatrix<f64>, t: f64, x: f64) -> DMatrix<f64> {
        let (zx, zt) = self.derivatives(t, x);
        df * zx + DMatrix::identity(df.nrows(), df.ncols()) * zt
    }

    /// Pull a field back to the `z` frame: `v(t, z) = u(t, Z⁻¹(t, z))`.
    pub fn pull_back<F: Fn(f64, f64) -> DVector<f64>>(&self, u: F, t: f64, z: f64) -> DVector<f64> {
        u(self.x(t, z), t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_shocks() -> ShockFixingZ {
        let c = |x0: f64, a: f64| Arc::new(move |t: f64| (x0 + a * t.sin(), a * t.cos())) as Curve;
        ShockFixingZ::new(3.0, vec![c(0.1, 0.2), c(1.2, -0.1), c(2.0, 0.3)])
    }

    #[test]
    fn shocks_are_fixed_and_map_is_bijective() {
        let z = three_shocks();
        for &t in &[0.0, 0.4, 1.3] {
            for j in 0..3 {
                let (xj, _) = (z.curves[j])(t);
                assert!((z.z(t, xj) - j as f64).abs() < 1e-12);
            }
            let mut prev = f64::NEG_INFINITY;
            for i in 0..300 {
                let x = -0.5 + 0.01 * i as f64;
                let zz = z.z(t, x);
                assert!(zz > prev);
                prev = zz;
                assert!((z.x(t, zz) - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_derivative_matches_differences() {
        let z = three_shocks();
        let (t, x, e) = (0.7, 1.5, 1e-6);
        let (zx, zt) = z.derivatives(t, x);
        let fd_t = (z.z(t + e, x) - z.z(t - e, x)) / (2.0 * e);
        let fd_x = (z.z(t, x + e) - z.z(t, x - e)) / (2.0 * e);
        assert!((zt - fd_t).abs() < 1e-7);
        assert!((zx - fd_x).abs() < 1e-7);
    }
}

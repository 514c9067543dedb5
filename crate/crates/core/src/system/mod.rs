//! Balance-law models `u_t + f(u)_x = g(u)` and periodic roll-wave base
//! solutions.

mod dressler;
mod eigen;
mod models;
mod rollwave;
mod sawtooth;
mod shock;

pub use dressler::{build_dressler_rollwave, DresslerParams};
pub use eigen::{eigen_decompose, Eigen};
pub use models::{Burgers, LinearScalar, SaintVenant};
pub use rollwave::{RollWave, Side, WaveShape};
pub use sawtooth::build_sawtooth_rollwave;
pub use shock::{lax_family, majda_liu_determinant, rankine_hugoniot_residual, LaxShock};

use nalgebra::{DMatrix, DVector};
use std::fmt::Debug;
use std::sync::Arc;

/// Flux, source and their derivatives for a system of `dim()` equations.
///
/// Matrices are written row-major into `out` (length `n*n`). Second and third
/// derivatives have central-difference defaults; models with cheap closed
/// forms override them.
pub trait BalanceLaw: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn name(&self) -> String;
    fn flux(&self, u: &[f64], out: &mut [f64]);
    fn source(&self, u: &[f64], out: &mut [f64]);
    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]);
    fn source_jacobian(&self, u: &[f64], out: &mut [f64]);

    /// `d²f(u)·(a, b)`.
    fn flux_hessian(&self, u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        directional_jacobian(u, a, b, out, |v, o| self.flux_jacobian(v, o));
    }

    /// `d²g(u)·(a, b)`.
    fn source_hessian(&self, u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        directional_jacobian(u, a, b, out, |v, o| self.source_jacobian(v, o));
    }

    /// `d³f(u)·(v, a, b)`, the derivative of `d²f(u)·(a, b)` along `v`.
    fn flux_third(&self, u: &[f64], v: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        let n = u.len();
        let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vn == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let h = 1e-4 * scale / vn;
        let mut up = vec![0.0; n];
        let mut um = vec![0.0; n];
        for i in 0..n {
            up[i] = u[i] + h * v[i];
            um[i] = u[i] - h * v[i];
        }
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        self.flux_hessian(&up, a, b, &mut fp);
        self.flux_hessian(&um, a, b, &mut fm);
        for i in 0..n {
            out[i] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
}

/// `(dJ(u)·a)·b` by a central difference of the Jacobian along `a`.
fn directional_jacobian<J: Fn(&[f64], &mut [f64])>(
    u: &[f64],
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
    jac: J,
) {
    let n = u.len();
    let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let an = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if an == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let h = 1e-5 * scale / an;
    let mut up = vec![0.0; n];
    let mut um = vec![0.0; n];
    for i in 0..n {
        up[i] = u[i] + h * a[i];
        um[i] = u[i] - h * a[i];
    }
    let mut jp = vec![0.0; n * n];
    let mut jm = vec![0.0; n * n];
    jac(&up, &mut jp);
    jac(&um, &mut jm);
    for i in 0..n {
        out[i] = (0..n).map(|j| (jp[i * n + j] - jm[i * n + j]) * b[j]).sum::<f64>() / (2.0 * h);
    }
}

/// Cheaply clonable handle to a balance law with `nalgebra` conveniences.
#[derive(Debug, Clone)]
pub struct HyperbolicSystem(pub Arc<dyn BalanceLaw>);

impl HyperbolicSystem {
    pub fn new<B: BalanceLaw + 'static>(b: B) -> Self {
        Self(Arc::new(b))
    }

    pub fn n(&self) -> usize {
        self.0.dim()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }

    pub fn law(&self) -> &dyn BalanceLaw {
        &*self.0
    }

    pub fn f(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut o = DVector::zeros(self.n());
        self.0.flux(u.as_slice(), o.as_mut_slice());
        o
    }

    pub fn g(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut o = DVector::zeros(self.n());
        self.0.source(u.as_slice(), o.as_mut_slice());
        o
    }

    pub fn df(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut o = vec![0.0; n * n];
        self.0.flux_jacobian(u.as_slice(), &mut o);
        DMatrix::from_row_slice(n, n, &o)
    }

    pub fn dg(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut o = vec![0.0; n * n];
        self.0.source_jacobian(u.as_slice(), &mut o);
        DMatrix::from_row_slice(n, n, &o)
    }

    pub fn d2f(&self, u: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut o = DVector::zeros(self.n());
        self.0
            .flux_hessian(u.as_slice(), a.as_slice(), b.as_slice(), o.as_mut_slice());
        o
    }

    pub fn d2g(&self, u: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut o = DVector::zeros(self.n());
        self.0
            .source_hessian(u.as_slice(), a.as_slice(), b.as_slice(), o.as_mut_slice());
        o
    }

    pub fn d3f(
        &self,
        u: &DVector<f64>,
        v: &DVector<f64>,
        a: &DVector<f64>,
        b: &DVector<f64>,
    ) -> DVector<f64> {
        let mut o = DVector::zeros(self.n());
        self.0.flux_third(
            u.as_slice(),
            v.as_slice(),
            a.as_slice(),
            b.as_slice(),
            o.as_mut_slice(),
        );
        o
    }

    /// Largest characteristic speed magnitude at `u` (spectral radius of df).
    pub fn max_speed(&self, u: &[f64]) -> f64 {
        let n = self.n();
        if n == 1 {
            let mut j = [0.0];
            self.0.flux_jacobian(u, &mut j);
            return j[0].abs();
        }
        let mut o = vec![0.0; n * n];
        self.0.flux_jacobian(u, &mut o);
        if n == 2 {
            let (half_tr, det) = (0.5 * (o[0] + o[3]), o[0] * o[3] - o[1] * o[2]);
            let disc = half_tr * half_tr - det;
            return if disc >= 0.0 { half_tr.abs() + disc.sqrt() } else { det.sqrt() };
        }
        let m = DMatrix::from_row_slice(n, n, &o);
        m.complex_eigenvalues()
            .iter()
            .fold(0.0, |acc: f64, z| acc.max(z.norm()))
    }
}

//! Inner correctors frozen at one time, for evaluating many `ξ` cheaply.

use super::inner::{InnerLayer, InnerOperator};
use super::layer::LayerPoly;
use nalgebra::DVector;
use std::sync::Arc;

/// Order-2 inner data at one time: Lagrange weights over the stencil of
/// time nodes plus the matching coefficients.
#[derive(Debug, Clone)]
pub(crate) struct SecondSlice {
    pub layers: Vec<InnerLayer>,
    /// Value and first-derivative weights of the node stencil.
    pub w: [Vec<f64>; 2],
    pub beta: f64,
    pub beta_t: f64,
    pub c2: DVector<f64>,
    pub c2_t: DVector<f64>,
    /// `D₂` at `t − e` and `t + e` for its time derivative.
    pub layer_span: (LayerPoly, LayerPoly, f64),
}

#[derive(Debug, Clone)]
pub struct InnerSlice {
    pub t: f64,
    pub delta0: f64,
    pub delta0_t: f64,
    pub delta0_tt: f64,
    pub delta1: f64,
    pub delta1_t: f64,
    pub(crate) op: Arc<InnerOperator>,
    pub(crate) v1: InnerLayer,
    pub(crate) c1_t: DVector<f64>,
    pub(crate) layer2: LayerPoly,
    pub(crate) second: Option<SecondSlice>,
}

impl InnerSlice {
    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn has_second(&self) -> bool {
        self.second.is_some()
    }

    /// `(V₁, V₁_ξ, V₁_ξξ)`.
    pub fn v1(&self, xi: f64) -> [DVector<f64>; 3] {
        self.v1.eval(xi)
    }

    /// `∂_t V₁` at fixed `ξ`.
    pub fn v1_t(&self, xi: f64) -> DVector<f64> {
        let op = &self.op;
        let mut out = op.interp(&op.basis_v, xi) * self.delta0_tt;
        for (i, e) in op.basis_e.iter().enumerate() {
            out += op.interp(e, xi) * self.c1_t[i];
        }
        out
    }

    /// The order-2 inner source
    /// `V₁_t + δ₀_t V₁_ξ + ½(d²f(V)(V₁,V₁))_ξ − dg(V)V₁ − D₂'' + (ÃD₂)'`.
    pub fn h2(&self, xi: f64) -> DVector<f64> {
        let p = &self.op.profile;
        let sys = &p.system;
        let (v, vx, _) = p.eval(xi);
        let [w, wx, _] = self.v1.eval(xi);
        let [e0, e1, e2] = self.layer2.eval(xi);
        self.v1_t(xi) + &wx * self.delta0_t + sys.d3f(&v, &vx, &w, &w) * 0.5 + sys.d2f(&v, &w, &wx)
            - sys.dg(&v) * &w
            - e2
            + sys.d2f(&v, &vx, &e0)
            + p.a_tilde(&v) * e1
    }

    /// `(V₂, V₂_ξ, V₂_ξξ)`; zero without order-2 data.
    pub fn v2(&self, xi: f64) -> [DVector<f64>; 3] {
        let n = self.n();
        let Some(s) = &self.second else {
            return [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
        };
        let op = &self.op;
        let p = &op.profile;
        let mut u = op.interp(&op.basis_v, xi) * s.beta;
        for (i, e) in op.basis_e.iter().enumerate() {
            u += op.interp(e, xi) * s.c2[i];
        }
        let mut integral = DVector::zeros(n);
        for (layer, wa) in s.layers.iter().zip(&s.w[0]) {
            u += op.interp(&layer.particular, xi) * *wa;
            integral += op.interp(&layer.table.nodes, xi) * *wa;
        }
        let (v, vx, _) = p.eval(xi);
        let at = p.a_tilde(&v);
        let b = &v * s.beta + integral + &s.c2;
        let db = &vx * s.beta + self.h2(xi);
        let u1 = &at * &u + b;
        let u2 = p.system.d2f(&v, &vx, &u) + &at * &u1 + db;
        let d = self.layer2.eval(xi);
        [u + &d[0], u1 + &d[1], u2 + &d[2]]
    }

    /// `∂_t V₂` at fixed `ξ`.
    pub fn v2_t(&self, xi: f64) -> DVector<f64> {
        let Some(s) = &self.second else {
            return DVector::zeros(self.n());
        };
        let op = &self.op;
        let mut out = op.interp(&op.basis_v, xi) * s.beta_t;
        for (i, e) in op.basis_e.iter().enumerate() {
            out += op.interp(e, xi) * s.c2_t[i];
        }
        for (layer, wa) in s.layers.iter().zip(&s.w[1]) {
            out += op.interp(&layer.particular, xi) * *wa;
        }
        let (a, b, span) = &s.layer_span;
        out + (b.eval(xi)[0].clone() - a.eval(xi)[0].clone()) / *span
    }
}

//! Outer and inner correctors of the matched expansion.
//!
//! Order 1 (and optionally order 2) is built in sequence: the outer
//! corrector with its shock shift, the inner corrector whose constants are
//! fixed by matching, then the next order, whose sources use the previous
//! one.

pub mod coupling;
pub mod inner;
pub mod layer;
pub mod outer;
pub mod slice;
pub mod zmap;

pub use coupling::{shock_coupling_solve, CouplingSolution, ShockCoupling};
pub use inner::{
    check_decay, compute_h_pm, first_order_source, solve_inner_u1, InnerLayer, InnerOperator, Source,
};
pub use layer::LayerPoly;
pub use outer::{solve_outer, CouplingRhs, FrameCoefficients, OuterOptions, OuterSolution};
pub use slice::InnerSlice;
pub use zmap::ShockFixingZ;

use slice::SecondSlice;

use crate::error::{Error, Result};
use crate::numerics::lagrange::{stencil, TimeSeries};
use crate::profile::{solve_profile_with, ProfileOptions, ShockProfile};
use crate::system::{RollWave, Side};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct CorrectorOptions {
    /// 1 or 2.
    pub order: usize,
    pub outer: OuterOptions,
    pub inner_step: f64,
    /// Uniform time nodes for the time-dependent order-2 inner data.
    pub time_nodes: usize,
    pub profile: ProfileOptions,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            order: 2,
            outer: OuterOptions::default(),
            inner_step: 0.02,
            time_nodes: 21,
            profile: ProfileOptions::default(),
        }
    }
}

/// Order-2 data.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub u2: OuterSolution,
    pub forcing: TimeSeries,
    /// Inner particular solutions at the time nodes (`β = 0`, `C = 0`).
    pub layers: Vec<InnerLayer>,
    pub node_dt: f64,
    /// `[H₂⁺…, H₂⁻…]` at the time nodes.
    pub h: TimeSeries,
}

/// Correctors of one roll-wave (one shock per period).
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub rollwave: RollWave,
    pub profile: Arc<ShockProfile>,
    pub operator: Arc<InnerOperator>,
    pub k: usize,
    pub u1: OuterSolution,
    pub forcing1: Vec<f64>,
    /// Order-1 inner corrector with `β = 0`, `C = 0`; coefficients are set
    /// per time.
    pub inner1: InnerLayer,
    pub h_plus: DVector<f64>,
    pub h_minus: DVector<f64>,
    pub second: Option<SecondOrder>,
    a_plus: DMatrix<f64>,
    a_minus: DMatrix<f64>,
}

fn side_matrix(rw: &RollWave, side: Side) -> DMatrix<f64> {
    let n = rw.system.n();
    rw.system.df(&rw.trace(1, side, 0, 0.0)) - DMatrix::identity(n, n) * rw.speed
}

impl CorrectorSet {
    pub fn build(rw: &RollWave, opts: &CorrectorOptions) -> Result<Self> {
        if opts.order != 1 && opts.order != 2 {
            return Err(Error::Config(format!("corrector order must be 1 or 2, got {}", opts.order)));
        }
        let um = rw.u_minus();
        let up = rw.u_plus();
        let profile = Arc::new(
            solve_profile_with(&rw.system, &um, &up, rw.speed, 0.0, &opts.profile).map_err(|e| e.context("profile"))?,
        );
        let k = rw.lax(1, 0.0)?.k;
        let operator = Arc::new(InnerOperator::new(profile.clone(), opts.inner_step)?);
        let layer1 = LayerPoly::linear(&rw.trace(1, Side::Minus, 1, 0.0), &rw.trace(1, Side::Plus, 1, 0.0));
        let h1 = first_order_source(&profile, &layer1);
        check_decay(&*h1, profile.xi_max, 1e-8)?;
        let n = um.len();
        let inner1 = InnerLayer::solve(&operator, h1, 0.0, DVector::zeros(n))?.with_layer(layer1);
        let h_plus = inner1.h_plus().clone();
        let h_minus = inner1.h_minus().clone();
        let coeffs = FrameCoefficients::new(rw, opts.outer.ny)?;
        let forcing1 = outer::first_order_forcing(&coeffs);
        let f1 = forcing1.clone();
        let forcing = move |_t: f64, out: &mut [f64]| out.copy_from_slice(&f1);
        let dh = &h_plus - &h_minus;
        let m1 = move |_t: f64| -dh.clone();
        let rhs = CouplingRhs {
            kappa: outer::shift_coefficient(rw),
            m: &m1,
        };
        let u1 = outer::solve_outer_with(rw, coeffs, &opts.outer, &forcing, &rhs, None)?;
        let mut set = Self {
            rollwave: rw.clone(),
            profile,
            operator,
            k,
            u1,
            forcing1,
            inner1,
            h_plus,
            h_minus,
            second: None,
            a_plus: side_matrix(rw, Side::Plus),
            a_minus: side_matrix(rw, Side::Minus),
        };
        set.matching_check()?;
        if opts.order == 2 {
            set.second = Some(set.build_second(opts)?);
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn t_star(&self) -> f64 {
        self.rollwave.t_star
    }

    pub fn delta0(&self, t: f64) -> f64 {
        self.u1.delta(t)
    }

    pub fn delta0_t(&self, t: f64) -> f64 {
        self.u1.delta_t(t)
    }

    pub fn delta1(&self, t: f64) -> f64 {
        self.second.as_ref().map_or(0.0, |s| s.u2.delta(t))
    }

    pub fn delta1_t(&self, t: f64) -> f64 {
        self.second.as_ref().map_or(0.0, |s| s.u2.delta_t(t))
    }

    fn ux(&self, side: Side, k: usize) -> DVector<f64> {
        self.rollwave.trace(1, side, k, 0.0)
    }

    fn a(&self, side: Side) -> &DMatrix<f64> {
        match side {
            Side::Plus => &self.a_plus,
            Side::Minus => &self.a_minus,
        }
    }

    /// `U₁(±∞)` required by matching: `u₁± − δ₀ u_x±`.
    fn u1_target(&self, side: Side, t: f64) -> DVector<f64> {
        self.u1.trace(side, 0, t) - self.ux(side, 1) * self.delta0(t)
    }

    /// `C(t)` from the matching condition on `side`.
    pub fn c1_from(&self, side: Side, t: f64) -> DVector<f64> {
        let (u, h) = match side {
            Side::Plus => (self.rollwave.u_plus(), &self.h_plus),
            Side::Minus => (self.rollwave.u_minus(), &self.h_minus),
        };
        -(self.a(side) * self.u1_target(side, t)) - u * self.delta0_t(t) - h
    }

    pub fn c1(&self, t: f64) -> DVector<f64> {
        self.c1_from(Side::Plus, t)
    }

    pub fn c1_t(&self, t: f64) -> DVector<f64> {
        let u1t = self.u1.trace_value(Side::Plus, t, 1);
        let target_t = u1t - self.ux(Side::Plus, 1) * self.delta0_t(t);
        -(&self.a_plus * target_t) - self.rollwave.u_plus() * self.u1.delta_tt(t)
    }

    /// Order-1 inner corrector at time `t`.
    pub fn v1_layer(&self, t: f64) -> InnerLayer {
        self.inner1.with_coefficients(self.delta0_t(t), self.c1(t))
    }

    /// Inner data frozen at `t`.
    pub fn slice(&self, t: f64) -> InnerSlice {
        let second = self.second.as_ref().map(|s| {
            let (start, w) = stencil(0.0, s.node_dt, s.layers.len(), t.clamp(0.0, self.t_star()), 4);
            let [w0, w1, _] = w;
            let e = 1e-4 * self.t_star();
            let (ta, tb) = ((t - e).max(0.0), (t + e).min(self.t_star()));
            SecondSlice {
                layers: s.layers[start..start + w0.len()].to_vec(),
                w: [w0, w1],
                beta: s.u2.delta_t(t),
                beta_t: s.u2.delta_tt(t),
                c2: self.c2(s, t),
                c2_t: self.c2_t(s, t),
                layer_span: (self.layer2(ta), self.layer2(tb), tb - ta),
            }
        });
        InnerSlice {
            t,
            delta0: self.delta0(t),
            delta0_t: self.delta0_t(t),
            delta0_tt: self.u1.delta_tt(t),
            delta1: self.delta1(t),
            delta1_t: self.delta1_t(t),
            op: self.operator.clone(),
            v1: self.v1_layer(t),
            c1_t: self.c1_t(t),
            layer2: self.layer2(t),
            second,
        }
    }

    /// `(V₁, V₁_ξ, V₁_ξξ)`.
    pub fn v1(&self, xi: f64, t: f64) -> [DVector<f64>; 3] {
        self.v1_layer(t).eval(xi)
    }

    /// `∂_t V₁` at fixed `ξ`.
    pub fn v1_t(&self, xi: f64, t: f64) -> DVector<f64> {
        self.slice(t).v1_t(xi)
    }

    /// Largest matching defect `|V₁(±Ξ) − [u₁± + u_x±(±Ξ − δ₀)]|` over the
    /// stored snapshot times.
    pub fn matching_error(&self) -> f64 {
        let x = self.operator.xi_max();
        let mut worst = 0.0f64;
        for q in 0..=20 {
            let t = self.t_star() * q as f64 / 20.0;
            let v = self.v1_layer(t);
            for (side, xi) in [(Side::Minus, -x), (Side::Plus, x)] {
                let target = self.u1.trace(side, 0, t) + self.ux(side, 1) * (xi - self.delta0(t));
                worst = worst.max((v.eval(xi)[0].clone() - target).amax());
            }
        }
        worst
    }

    fn matching_check(&self) -> Result<()> {
        let e = self.matching_error();
        if e > 1e-6 || !e.is_finite() {
            return Err(Error::MatchFailure(e));
        }
        Ok(())
    }

    /// Defect of `A⁺u₁⁺ − A⁻u₁⁻ + δ₀_t [u] = δ₀ κ − (H⁺ − H⁻)` at `t`.
    pub fn jump_residual(&self, t: f64) -> f64 {
        let kappa = outer::shift_coefficient(&self.rollwave);
        let jump = self.rollwave.u_plus() - self.rollwave.u_minus();
        let lhs = &self.a_plus * self.u1.trace(Side::Plus, 0, t) - &self.a_minus * self.u1.trace(Side::Minus, 0, t)
            + jump * self.delta0_t(t);
        let rhs = kappa * self.delta0(t) - (&self.h_plus - &self.h_minus);
        (lhs - rhs).amax()
    }

    /// Residual of the order-1 outer equation along characteristics.
    pub fn outer_residual(&self, count: usize) -> f64 {
        let f = self.forcing1.clone();
        let forcing = move |_t: f64, out: &mut [f64]| out.copy_from_slice(&f);
        self.u1.characteristic_residual(&forcing, count)
    }

    /// `∂_x^k u₁(x, t)` between shocks.
    pub fn u1(&self, x: f64, t: f64, k: usize) -> DVector<f64> {
        self.u1.eval(x, t, k)
    }

    pub fn u2(&self, x: f64, t: f64, k: usize) -> DVector<f64> {
        match &self.second {
            Some(s) => s.u2.eval(x, t, k),
            None => DVector::zeros(self.n()),
        }
    }

    /// Order-2 layer polynomial at `t`.
    fn layer2(&self, t: f64) -> LayerPoly {
        let d0 = self.delta0(t);
        let side = |s: Side| {
            let uxx = self.ux(s, 2);
            let c1 = self.u1.trace(s, 1, t) - &uxx * d0;
            [DVector::zeros(self.n()), c1, uxx * 0.5]
        };
        LayerPoly::new(side(Side::Minus), side(Side::Plus))
    }

    /// The order-2 inner source at time `t` (see [`InnerSlice::h2`]).
    pub fn second_order_source(&self, t: f64) -> Source {
        let slice = self.slice(t);
        Arc::new(move |xi: f64| slice.h2(xi))
    }

    fn build_second(&self, opts: &CorrectorOptions) -> Result<SecondOrder> {
        let rw = &self.rollwave;
        let n = self.n();
        let nodes = opts.time_nodes.max(4);
        let node_dt = self.t_star() / (nodes - 1) as f64;
        let mut layers = Vec::with_capacity(nodes);
        let mut h = TimeSeries::new(0.0, node_dt, 2 * n);
        for q in 0..nodes {
            let t = node_dt * q as f64;
            let src = self.second_order_source(t);
            check_decay(&*src, self.profile.xi_max, 1e-6).map_err(|e| e.context("order-2 inner source"))?;
            let layer = InnerLayer::solve(&self.operator, src, 0.0, DVector::zeros(n))?;
            let mut row = layer.h_plus().as_slice().to_vec();
            row.extend_from_slice(layer.h_minus().as_slice());
            h.push(&row);
            layers.push(layer);
        }
        // Outer forcing u₁xx − ½(d²f(U)(u₁,u₁))_x + ½d²g(U)(u₁,u₁) at the
        // snapshot times of u₁.
        let c = FrameCoefficients::new(rw, opts.outer.ny)?;
        let snaps = &self.u1.snapshots;
        let mut forcing = TimeSeries::new(0.0, snaps.dt, n * (c.ny + 1));
        let sys = &rw.system;
        // Snapshot times and grid nodes coincide, so only the y-stencils
        // (one per node, shared by all snapshots) are needed.
        let stencils: Vec<_> = (0..=c.ny)
            .map(|m| stencil(0.0, c.dy, c.ny + 1, c.dy * m as f64, 6))
            .collect();
        for q in 0..snaps.len() {
            let snap = snaps.sample(q);
            let mut row = vec![0.0; n * (c.ny + 1)];
            for (m, (start, w)) in stencils.iter().enumerate() {
                let u = &c.u[m];
                let derivative = |k: usize| {
                    DVector::from_fn(n, |comp, _| {
                        w[k].iter().enumerate().map(|(b, wb)| wb * snap[(start + b) * n + comp]).sum()
                    })
                };
                let (w0, w1, w2) = (derivative(0), derivative(1), derivative(2));
                let f = w2 - (sys.d3f(u, &c.ux[m], &w0, &w0) * 0.5 + sys.d2f(u, &w0, &w1))
                    + sys.d2g(u, &w0, &w0) * 0.5;
                row[m * n..(m + 1) * n].copy_from_slice(f.as_slice());
            }
            forcing.push(&row);
        }
        let fs = forcing.clone();
        let force = move |t: f64, out: &mut [f64]| out.copy_from_slice(&fs.value(t));
        let hs = h.clone();
        let this = self;
        let m2 = move |t: f64| {
            let d0 = this.delta0(t);
            let hv = hs.value(t);
            let dh = DVector::from_column_slice(&hv[..n]) - DVector::from_column_slice(&hv[n..]);
            let side = |s: Side| {
                this.a(s) * (this.u1.trace(s, 1, t) * d0 - this.ux(s, 2) * (0.5 * d0 * d0))
            };
            side(Side::Plus) - side(Side::Minus) - dh
        };
        let rhs = CouplingRhs {
            kappa: outer::shift_coefficient(rw),
            m: &m2,
        };
        let u2 = outer::solve_outer_with(rw, c, &opts.outer, &force, &rhs, None)?;
        Ok(SecondOrder {
            u2,
            forcing,
            layers,
            node_dt,
            h,
        })
    }

    /// `H₂^±(t)`.
    pub fn h2(&self, t: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let s = self.second.as_ref()?;
        let n = self.n();
        let v = s.h.value(t);
        Some((DVector::from_column_slice(&v[..n]), DVector::from_column_slice(&v[n..])))
    }

    /// `C₂(t)` from the `+` matching condition.
    fn c2(&self, s: &SecondOrder, t: f64) -> DVector<f64> {
        let (hp, _) = self.h2(t).unwrap_or_else(|| (DVector::zeros(self.n()), DVector::zeros(self.n())));
        let d0 = self.delta0(t);
        let target = s.u2.trace(Side::Plus, 0, t) - self.u1.trace(Side::Plus, 1, t) * d0
            + self.ux(Side::Plus, 2) * (0.5 * d0 * d0)
            - self.ux(Side::Plus, 1) * s.u2.delta(t);
        -(&self.a_plus * target) - self.rollwave.u_plus() * s.u2.delta_t(t) - hp
    }

    /// Time-derivative of `C₂` by a centred difference (one-sided at the ends).
    fn c2_t(&self, s: &SecondOrder, t: f64) -> DVector<f64> {
        let e = 1e-4 * self.t_star();
        let (a, b) = ((t - e).max(0.0), (t + e).min(self.t_star()));
        (self.c2(s, b) - self.c2(s, a)) / (b - a)
    }

    /// `(V₂, V₂_ξ, V₂_ξξ)`; zero when order 2 was not built.
    pub fn v2(&self, xi: f64, t: f64) -> [DVector<f64>; 3] {
        self.slice(t).v2(xi)
    }

    /// `∂_t V₂` at fixed `ξ`.
    pub fn v2_t(&self, xi: f64, t: f64) -> DVector<f64> {
        self.slice(t).v2_t(xi)
    }

    /// Order-2 matching defect at `±Ξ` over 21 times:
    /// `V₂ ≈ u₂ + u₁x(ξ − δ₀) + ½u_xx(ξ − δ₀)² − u_x δ₁`.
    pub fn matching_error2(&self) -> Option<f64> {
        let s = self.second.as_ref()?;
        let x = self.operator.xi_max();
        let mut worst = 0.0f64;
        for q in 0..=20 {
            let t = self.t_star() * q as f64 / 20.0;
            let d0 = self.delta0(t);
            let d1 = s.u2.delta(t);
            for (side, xi) in [(Side::Minus, -x), (Side::Plus, x)] {
                let z = xi - d0;
                let target = s.u2.trace(side, 0, t) + self.u1.trace(side, 1, t) * z + self.ux(side, 2) * (0.5 * z * z)
                    - self.ux(side, 1) * d1;
                worst = worst.max((self.v2(xi, t)[0].clone() - target).amax());
            }
        }
        Some(worst)
    }
}

/// Build the inner order-1 corrector `V₁ = U₁ + D₁` at time `t` from the
/// outer data and check the matching invariant.
pub fn build_v1(set: &CorrectorSet, t: f64) -> Result<InnerLayer> {
    let v = set.v1_layer(t);
    let x = set.operator.xi_max();
    let mut worst = 0.0f64;
    for (side, xi) in [(Side::Minus, -x), (Side::Plus, x)] {
        let target = set.u1.trace(side, 0, t) + set.rollwave.trace(1, side, 1, t) * (xi - set.delta0(t));
        worst = worst.max((v.eval(xi)[0].clone() - target).amax());
    }
    if worst > 1e-6 || !worst.is_finite() {
        return Err(Error::MatchFailure(worst));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_sawtooth_rollwave;
    use std::f64::consts::LN_2;

    fn small() -> CorrectorOptions {
        CorrectorOptions {
            outer: OuterOptions { ny: 100, nt: 200, store_every: 4 },
            time_nodes: 5,
            ..Default::default()
        }
    }

    #[test]
    fn sawtooth_constants() {
        let rw = build_sawtooth_rollwave(2.0, 0.0);
        let set = CorrectorSet::build(&rw, &small()).unwrap();
        assert!((set.h_plus[0] + 2.0 * LN_2).abs() < 1e-6);
        assert!((set.h_minus[0] + 2.0 * LN_2).abs() < 1e-6);
        for &t in &[0.0, 0.5, 1.0] {
            assert!((set.c1(t)[0] - 2.0 * LN_2).abs() < 1e-6);
            // Both matching conditions give the same constant.
            assert!((set.c1(t)[0] - set.c1_from(Side::Minus, t)[0]).abs() < 1e-8);
            assert!(set.delta0(t).abs() < 1e-10);
            assert!(set.jump_residual(t) < 1e-8);
        }
        assert!(set.u1.sup_norm() < 1e-10);
        assert!(set.matching_error() < 1e-6);
    }

    #[test]
    fn sawtooth_v1_is_linear_far_out() {
        let rw = build_sawtooth_rollwave(2.0, 0.0);
        let set = CorrectorSet::build(&rw, &small()).unwrap();
        let v = build_v1(&set, 0.3).unwrap();
        for &xi in &[-30.0, -25.0, 25.0, 30.0] {
            assert!((v.eval(xi)[0][0] - xi).abs() < 1e-5);
        }
        // D₁ = ξ exactly outside [−1, 1].
        for &xi in &[-5.0, 1.5, 7.0] {
            let d = v.eval(xi)[0][0] - v.u_value(xi)[0];
            assert!((d - xi).abs() < 1e-13);
        }
        // Equation residual V₁'' − (ÃV₁)' − δ₀_t V' − h = 0 by central differences.
        let h = 1e-3;
        let p = &set.profile;
        let mut worst = 0.0f64;
        for i in 0..40 {
            let xi = -10.0 + 0.5 * i as f64 + 0.01;
            let flux = |x: f64| p.a_tilde(&p.value(x)) * v.eval(x)[0].clone();
            let d2 = (v.eval(xi + h)[0].clone() - v.eval(xi)[0].clone() * 2.0 + v.eval(xi - h)[0].clone()) / (h * h);
            let dflux = (flux(xi + h) - flux(xi - h)) / (2.0 * h);
            let g = p.system.g(&p.value(xi));
            worst = worst.max((d2 - dflux + g).amax());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn sawtooth_second_order_is_symmetric() {
        let rw = build_sawtooth_rollwave(2.0, 0.0);
        let set = CorrectorSet::build(&rw, &small()).unwrap();
        let (hp, hm) = set.h2(0.5).unwrap();
        assert!((hp[0] - hm[0]).abs() < 1e-8, "{} {}", hp[0], hm[0]);
        assert!(set.delta1(1.0).abs() < 1e-8);
        assert!(set.matching_error2().unwrap() < 1e-5);
    }
}

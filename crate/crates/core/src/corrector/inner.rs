//! Inner correctors: the layer equation
//! `U' = Ã(ξ) U + β V + ∫₀^ξ h + C`, `Ã = df(V) − s`, solved as a bounded
//! boundary-value problem with a fourth-order Hermite–Simpson (Lobatto IIIA)
//! collocation and a banded LU.

use super::layer::LayerPoly;
use crate::error::{Error, Result};
use crate::numerics::band::{BandLu, BandMatrix};
use crate::numerics::hermite::value_weights;
use crate::numerics::quad::gauss_legendre;
use crate::profile::ShockProfile;
use crate::system::{eigen_decompose, Eigen};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// A source term `h(ξ)` of an inner equation.
pub type Source = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// The order-1 source `−D'' + (Ã D)' − g(V)` (the profile is steady, so
/// `V_t = 0`).
pub fn first_order_source(profile: &Arc<ShockProfile>, layer: &LayerPoly) -> Source {
    let p = profile.clone();
    let d = layer.clone();
    Arc::new(move |xi: f64| {
        let (v, vx, _) = p.eval(xi);
        let [d0, d1, d2] = d.eval(xi);
        let sys = &p.system;
        -d2 + sys.d2f(&v, &vx, &d0) + p.a_tilde(&v) * d1 - sys.g(&v)
    })
}

/// Fails with `NoDecay` when `|h(±Ξ)| > tol`.
pub fn check_decay(h: &dyn Fn(f64) -> DVector<f64>, xi_max: f64, tol: f64) -> Result<()> {
    let worst = h(xi_max).amax().max(h(-xi_max).amax());
    if worst > tol || !worst.is_finite() {
        return Err(Error::NoDecay(worst));
    }
    Ok(())
}

/// Oriented integrals `(H⁺, H⁻) = (∫₀^{+∞} h, ∫₀^{−∞} h)`: composite
/// Gauss–Legendre on `[0, ±Ξ]` plus the exponential tail `h(±Ξ)/ω`.
pub fn compute_h_pm(h: &dyn Fn(f64) -> DVector<f64>, xi_max: f64, omega: f64) -> (DVector<f64>, DVector<f64>) {
    let (x, w) = gauss_legendre(8);
    let panels = (xi_max / 0.25).ceil().max(8.0) as usize;
    let width = xi_max / panels as f64;
    let one_side = |sign: f64| {
        let mut acc = h(0.0) * 0.0;
        for p in 0..panels {
            let a = p as f64 * width;
            for (xk, wk) in x.iter().zip(&w) {
                let xi = a + 0.5 * width * (xk + 1.0);
                acc += h(sign * xi) * (0.5 * width * wk);
            }
        }
        if omega.is_finite() && omega > 0.0 {
            acc += h(sign * xi_max) / omega;
        }
        acc * sign
    };
    (one_side(1.0), one_side(-1.0))
}

/// Values of a vector field and its first two ξ-derivatives on the
/// collocation grid, node-major.
#[derive(Debug, Clone)]
pub struct NodeData {
    pub val: Vec<f64>,
    pub der: Vec<f64>,
    pub der2: Vec<f64>,
}

/// Cumulative integral `I(ξ) = ∫₀^ξ h` tabulated at nodes and midpoints.
#[derive(Debug, Clone)]
pub struct SourceTable {
    pub nodes: NodeData,
    pub mids: Vec<f64>,
    pub h_plus: DVector<f64>,
    pub h_minus: DVector<f64>,
}

/// Linear layer operator on `[−Ξ, Ξ]`, factorised once and reused for every
/// right-hand side.
pub struct InnerOperator {
    pub profile: Arc<ShockProfile>,
    pub xi0: f64,
    pub step: f64,
    pub intervals: usize,
    n: usize,
    a_nodes: Vec<DMatrix<f64>>,
    a_mids: Vec<DMatrix<f64>>,
    v_nodes: Vec<(DVector<f64>, DVector<f64>)>,
    lu: BandLu,
    left: Eigen,
    right: Eigen,
    left_pins: Vec<usize>,
    right_pins: Vec<usize>,
    normal: DVector<f64>,
    /// Responses to `b = V` and `b = e_i`.
    pub basis_v: NodeData,
    pub basis_e: Vec<NodeData>,
}

impl std::fmt::Debug for InnerOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InnerOperator")
            .field("xi0", &self.xi0)
            .field("step", &self.step)
            .field("intervals", &self.intervals)
            .finish()
    }
}

impl InnerOperator {
    pub fn new(profile: Arc<ShockProfile>, step: f64) -> Result<Self> {
        let n = profile.n();
        let xi_max = profile.xi_max;
        let half = (xi_max / step).ceil() as usize;
        let h = xi_max / half as f64;
        let intervals = 2 * half;
        let xi0 = -xi_max;
        let sys = profile.system.clone();
        let left = eigen_decompose(&sys, &profile.u_minus)?;
        let right = eigen_decompose(&sys, &profile.u_plus)?;
        let s = profile.speed;
        let left_pins: Vec<usize> = (0..n).filter(|&i| left.lambdas[i] - s < 0.0).collect();
        let right_pins: Vec<usize> = (0..n).filter(|&i| right.lambdas[i] - s > 0.0).collect();
        if left_pins.len() + right_pins.len() + 1 != n {
            return Err(Error::NoConnection(format!(
                "layer is not a Lax layer: {} + {} pinned modes for n = {n}",
                left_pins.len(),
                right_pins.len()
            )));
        }
        let a_at = |xi: f64| profile.a_tilde(&profile.value(xi));
        let v_nodes: Vec<(DVector<f64>, DVector<f64>)> = (0..=intervals)
            .map(|k| {
                let (v, vx, _) = profile.eval(xi0 + h * k as f64);
                (v, vx)
            })
            .collect();
        let a_nodes: Vec<DMatrix<f64>> = v_nodes.iter().map(|(v, _)| profile.a_tilde(v)).collect();
        let a_mids: Vec<DMatrix<f64>> =
            (0..intervals).map(|k| a_at(xi0 + h * (k as f64 + 0.5))).collect();
        let nl = left_pins.len();
        let dim = n * (intervals + 1);
        let band = 2 * n + 1;
        let mut m = BandMatrix::zeros(dim, band, band);
        for (r, &i) in left_pins.iter().enumerate() {
            for c in 0..n {
                m.add(r, c, left.p_inv[(i, c)]);
            }
        }
        let id = DMatrix::<f64>::identity(n, n);
        for k in 0..intervals {
            let row0 = nl + k * n + usize::from(k >= half);
            let (ak, ak1, am) = (&a_nodes[k], &a_nodes[k + 1], &a_mids[k]);
            let lhs = -&id - (ak + am * 2.0 + am * ak * (0.5 * h)) * (h / 6.0);
            let rhs = &id - (ak1 + am * 2.0 - am * ak1 * (0.5 * h)) * (h / 6.0);
            for a in 0..n {
                for b in 0..n {
                    m.add(row0 + a, k * n + b, lhs[(a, b)]);
                    m.add(row0 + a, (k + 1) * n + b, rhs[(a, b)]);
                }
            }
        }
        let (_, vx0, _) = profile.eval(0.0);
        let normal = vx0.clone() / vx0.norm();
        let nrow = nl + half * n;
        for c in 0..n {
            m.add(nrow, half * n + c, normal[c]);
        }
        let rbase = nl + intervals * n + 1;
        for (r, &i) in right_pins.iter().enumerate() {
            for c in 0..n {
                m.add(rbase + r, intervals * n + c, right.p_inv[(i, c)]);
            }
        }
        let lu = m.factor()?;
        let mut op = Self {
            profile,
            xi0,
            step: h,
            intervals,
            n,
            a_nodes,
            a_mids,
            v_nodes,
            lu,
            left,
            right,
            left_pins,
            right_pins,
            normal,
            basis_v: NodeData { val: vec![], der: vec![], der2: vec![] },
            basis_e: vec![],
        };
        let p = op.profile.clone();
        let vb: Vec<f64> = (0..=intervals).flat_map(|k| p.value(op.node(k)).as_slice().to_vec()).collect();
        let vm: Vec<f64> = (0..intervals)
            .flat_map(|k| p.value(op.node(k) + 0.5 * h).as_slice().to_vec())
            .collect();
        let vbx: Vec<f64> = op.v_nodes.iter().flat_map(|(_, vx)| vx.as_slice().to_vec()).collect();
        op.basis_v = op.solve(&vb, &vbx, &vm, &p.u_minus, &p.u_plus)?;
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let eb: Vec<f64> = (0..=intervals).flat_map(|_| e.as_slice().to_vec()).collect();
            let em: Vec<f64> = (0..intervals).flat_map(|_| e.as_slice().to_vec()).collect();
            let zero = vec![0.0; eb.len()];
            let sol = op.solve(&eb, &zero, &em, &e, &e)?;
            op.basis_e.push(sol);
        }
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self, k: usize) -> f64 {
        self.xi0 + self.step * k as f64
    }

    pub fn xi_max(&self) -> f64 {
        -self.xi0
    }

    /// `−(Ã±)⁻¹ b`: the constant state the bounded solution tends to when the
    /// right-hand side tends to `b` at `±∞`.
    pub fn limit(&self, plus: bool, b: &DVector<f64>) -> DVector<f64> {
        let e = if plus { &self.right } else { &self.left };
        let s = self.profile.speed;
        let mut c = &e.p_inv * b;
        for i in 0..self.n {
            c[i] /= -(e.lambdas[i] - s);
        }
        &e.p * c
    }

    /// Bounded solution for a right-hand side sampled at nodes (with its
    /// derivative) and midpoints, with `b(±∞) = b_plus / b_minus`.
    pub fn solve(
        &self,
        b_nodes: &[f64],
        db_nodes: &[f64],
        b_mids: &[f64],
        b_minus: &DVector<f64>,
        b_plus: &DVector<f64>,
    ) -> Result<NodeData> {
        let n = self.n;
        let h = self.step;
        let half = self.intervals / 2;
        let nl = self.left_pins.len();
        let mut rhs = vec![0.0; n * (self.intervals + 1)];
        let lim_m = self.limit(false, b_minus);
        let lim_p = self.limit(true, b_plus);
        for (r, &i) in self.left_pins.iter().enumerate() {
            rhs[r] = self.left.p_inv.row(i).dot(&lim_m.transpose());
        }
        for k in 0..self.intervals {
            let row0 = nl + k * n + usize::from(k >= half);
            let bk = DVector::from_column_slice(&b_nodes[k * n..(k + 1) * n]);
            let bk1 = DVector::from_column_slice(&b_nodes[(k + 1) * n..(k + 2) * n]);
            let bm = DVector::from_column_slice(&b_mids[k * n..(k + 1) * n]);
            let r = (&bk + &bk1 + (&self.a_mids[k] * (&bk - &bk1) * (h / 8.0) + bm) * 4.0) * (h / 6.0);
            rhs[row0..row0 + n].copy_from_slice(r.as_slice());
        }
        let rbase = nl + self.intervals * n + 1;
        for (r, &i) in self.right_pins.iter().enumerate() {
            rhs[rbase + r] = self.right.p_inv.row(i).dot(&lim_p.transpose());
        }
        let val = self.lu.solve(rhs);
        let worst = val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e6 || !worst.is_finite() {
            return Err(Error::Unbounded(worst));
        }
        let mut der = vec![0.0; val.len()];
        let mut der2 = vec![0.0; val.len()];
        let sys = &self.profile.system;
        for k in 0..=self.intervals {
            let u = DVector::from_column_slice(&val[k * n..(k + 1) * n]);
            let b = DVector::from_column_slice(&b_nodes[k * n..(k + 1) * n]);
            let db = DVector::from_column_slice(&db_nodes[k * n..(k + 1) * n]);
            let d = &self.a_nodes[k] * &u + b;
            let (v, vx) = &self.v_nodes[k];
            let d2 = sys.d2f(v, vx, &u) + &self.a_nodes[k] * &d + db;
            der[k * n..(k + 1) * n].copy_from_slice(d.as_slice());
            der2[k * n..(k + 1) * n].copy_from_slice(d2.as_slice());
        }
        Ok(NodeData { val, der, der2 })
    }

    /// Tabulate `I(ξ) = ∫₀^ξ h` at nodes and midpoints (Gauss–Legendre on
    /// each half interval, accumulated outwards from `ξ = 0`), together with
    /// `(H⁺, H⁻)`.
    pub fn integrate_source(&self, h: &dyn Fn(f64) -> DVector<f64>) -> SourceTable {
        let n = self.n;
        let m = self.intervals;
        let half = m / 2;
        let (gx, gw) = gauss_legendre(5);
        let seg = |a: f64, b: f64| {
            let mut acc = DVector::zeros(n);
            for (x, w) in gx.iter().zip(&gw) {
                acc += h(a + 0.5 * (b - a) * (x + 1.0)) * (0.5 * (b - a) * w);
            }
            acc
        };
        let mut iv = vec![0.0; n * (m + 1)];
        let mut ih = vec![0.0; n * (m + 1)];
        let mut dh = vec![0.0; n * (m + 1)];
        let mut mids = vec![0.0; n * m];
        let e = 1e-4;
        for k in 0..=m {
            let x = self.node(k);
            ih[k * n..(k + 1) * n].copy_from_slice(h(x).as_slice());
            let d = (h(x + e) - h(x - e)) / (2.0 * e);
            dh[k * n..(k + 1) * n].copy_from_slice(d.as_slice());
        }
        let mut acc = DVector::zeros(n);
        for k in half..m {
            let (a, b) = (self.node(k), self.node(k + 1));
            let c = 0.5 * (a + b);
            let mid = &acc + seg(a, c);
            acc = &mid + seg(c, b);
            mids[k * n..(k + 1) * n].copy_from_slice(mid.as_slice());
            iv[(k + 1) * n..(k + 2) * n].copy_from_slice(acc.as_slice());
        }
        let mut acc = DVector::zeros(n);
        for k in (0..half).rev() {
            let (a, b) = (self.node(k), self.node(k + 1));
            let c = 0.5 * (a + b);
            let mid = &acc - seg(c, b);
            acc = &mid - seg(a, c);
            mids[k * n..(k + 1) * n].copy_from_slice(mid.as_slice());
            iv[k * n..(k + 1) * n].copy_from_slice(acc.as_slice());
        }
        let (h_plus, h_minus) = compute_h_pm(h, self.xi_max(), self.profile.omega);
        SourceTable {
            nodes: NodeData {
                val: iv,
                der: ih,
                der2: dh,
            },
            mids,
            h_plus,
            h_minus,
        }
    }

    /// Particular solution for `b = I(ξ)`.
    pub fn solve_integral(&self, table: &SourceTable) -> Result<NodeData> {
        self.solve(&table.nodes.val, &table.nodes.der, &table.mids, &table.h_minus, &table.h_plus)
    }

    /// Quintic Hermite interpolation of node data at `ξ` (clamped to the
    /// grid).
    pub fn interp(&self, data: &NodeData, xi: f64) -> DVector<f64> {
        let n = self.n;
        let s = ((xi - self.xi0) / self.step).clamp(0.0, self.intervals as f64);
        let k = (s.floor() as usize).min(self.intervals - 1);
        let w = value_weights(s - k as f64);
        let (h, h2) = (self.step, self.step * self.step);
        let (a, b) = (k * n, (k + 1) * n);
        DVector::from_fn(n, |c, _| {
            w[0] * data.val[a + c]
                + w[1] * h * data.der[a + c]
                + w[2] * h2 * data.der2[a + c]
                + w[3] * data.val[b + c]
                + w[4] * h * data.der[b + c]
                + w[5] * h2 * data.der2[b + c]
        })
    }

    /// `|normal · U(0)|`, zero by construction.
    pub fn normalisation_defect(&self, data: &NodeData) -> f64 {
        let n = self.n;
        let k = self.intervals / 2;
        let u = DVector::from_column_slice(&data.val[k * n..(k + 1) * n]);
        self.normal.dot(&u).abs()
    }
}

/// One inner corrector `V = U + D` with
/// `U' = Ã U + β V + I(ξ) + C` and derivatives taken from the equation.
#[derive(Clone)]
pub struct InnerLayer {
    pub op: Arc<InnerOperator>,
    pub source: Source,
    pub table: Arc<SourceTable>,
    pub particular: Arc<NodeData>,
    pub beta: f64,
    pub c: DVector<f64>,
    pub layer: Option<LayerPoly>,
}

impl std::fmt::Debug for InnerLayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InnerLayer")
            .field("beta", &self.beta)
            .field("c", &self.c)
            .finish()
    }
}

impl InnerLayer {
    /// Solve for the source `h` with given `β` and `C`.
    pub fn solve(op: &Arc<InnerOperator>, source: Source, beta: f64, c: DVector<f64>) -> Result<Self> {
        let table = op.integrate_source(&*source);
        let particular = op.solve_integral(&table)?;
        Ok(Self {
            op: op.clone(),
            source,
            table: Arc::new(table),
            particular: Arc::new(particular),
            beta,
            c,
            layer: None,
        })
    }

    /// Same source and particular solution, new `(β, C)`.
    pub fn with_coefficients(&self, beta: f64, c: DVector<f64>) -> Self {
        Self {
            beta,
            c,
            ..self.clone()
        }
    }

    pub fn with_layer(mut self, layer: LayerPoly) -> Self {
        self.layer = Some(layer);
        self
    }

    /// `b(ξ) = β V + I(ξ) + C` and `b'(ξ) = β V_ξ + h(ξ)`.
    fn rhs(&self, xi: f64, v: &DVector<f64>, vx: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let i = self.op.interp(&self.table.nodes, xi);
        let b = v * self.beta + i + &self.c;
        let db = vx * self.beta + (self.source)(xi);
        (b, db)
    }

    /// `U` at `ξ`, by interpolation of the basis responses.
    pub fn u_value(&self, xi: f64) -> DVector<f64> {
        let op = &self.op;
        let mut u = op.interp(&self.particular, xi) + op.interp(&op.basis_v, xi) * self.beta;
        for (i, e) in op.basis_e.iter().enumerate() {
            u += op.interp(e, xi) * self.c[i];
        }
        u
    }

    /// `(U, U', U'')` with `U' = ÃU + b`, `U'' = Ã'U + ÃU' + b'`.
    pub fn u_eval(&self, xi: f64) -> [DVector<f64>; 3] {
        let p = &self.op.profile;
        let (v, vx, _) = p.eval(xi);
        let u = self.u_value(xi);
        let a = p.a_tilde(&v);
        let (b, db) = self.rhs(xi, &v, &vx);
        let u1 = &a * &u + b;
        let u2 = p.system.d2f(&v, &vx, &u) + &a * &u1 + db;
        [u, u1, u2]
    }

    /// `(V, V', V'')` of the full corrector `U + D`.
    pub fn eval(&self, xi: f64) -> [DVector<f64>; 3] {
        let mut out = self.u_eval(xi);
        if let Some(d) = &self.layer {
            let dv = d.eval(xi);
            for k in 0..3 {
                out[k] += &dv[k];
            }
        }
        out
    }

    /// Closed-form limits `−(Ã±)⁻¹(β u± + H± + C)`.
    pub fn closed_form_limits(&self) -> (DVector<f64>, DVector<f64>) {
        let p = &self.op.profile;
        let bm = &p.u_minus * self.beta + &self.table.h_minus + &self.c;
        let bp = &p.u_plus * self.beta + &self.table.h_plus + &self.c;
        (self.op.limit(false, &bm), self.op.limit(true, &bp))
    }

    /// Largest deviation of `U(±Ξ)` from the closed-form limits.
    pub fn limit_error(&self) -> f64 {
        let (lm, lp) = self.closed_form_limits();
        let x = self.op.xi_max();
        (self.u_value(-x) - lm).amax().max((self.u_value(x) - lp).amax())
    }

    pub fn h_plus(&self) -> &DVector<f64> {
        &self.table.h_plus
    }

    pub fn h_minus(&self) -> &DVector<f64> {
        &self.table.h_minus
    }
}

/// Order-1 solve for a given source, `δ_{0t}` and `C`.
pub fn solve_inner_u1(op: &Arc<InnerOperator>, h: Source, delta0t: f64, c: DVector<f64>) -> Result<InnerLayer> {
    InnerLayer::solve(op, h, delta0t, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;
    use crate::system::{Burgers, HyperbolicSystem};
    use std::f64::consts::LN_2;

    fn burgers_profile() -> Arc<ShockProfile> {
        let sys = HyperbolicSystem::new(Burgers { rate: 1.0, offset: 0.0 });
        let um = DVector::from_vec(vec![1.0]);
        let up = DVector::from_vec(vec![-1.0]);
        Arc::new(solve_profile(&sys, &um, &up, 0.0, 0.0).unwrap())
    }

    fn one() -> DVector<f64> {
        DVector::from_vec(vec![1.0])
    }

    #[test]
    fn sawtooth_source_matches_hand_formula() {
        let p = burgers_profile();
        let h = first_order_source(&p, &LayerPoly::linear(&one(), &one()));
        let mut worst = 0.0f64;
        for i in 0..=400 {
            let xi = -20.0 + 0.1 * i as f64;
            let exact = -xi * 0.5 / (xi / 2.0).cosh().powi(2);
            worst = worst.max((h(xi)[0] - exact).abs());
        }
        assert!(worst <= 1e-8, "{worst}");
        let mut assembled = 0.0f64;
        for i in 0..=400 {
            let xi = -20.0 + 0.1 * i as f64;
            assembled = assembled.max((h(xi)[0] - xi * p.eval(xi).1[0]).abs());
        }
        assert!(assembled <= 1e-10, "{assembled}");
        assert_eq!(h(0.0)[0], 0.0);
        check_decay(&*h, p.xi_max, 1e-8).unwrap();
        let (hp, hm) = compute_h_pm(&*h, p.xi_max, p.omega);
        assert!((hp[0] + 2.0 * LN_2).abs() < 1e-9, "{}", hp[0]);
        assert!((hm[0] + 2.0 * LN_2).abs() < 1e-9, "{}", hm[0]);
    }

    #[test]
    fn h_pm_trivial_and_even() {
        let zero = |_x: f64| DVector::from_vec(vec![0.0]);
        let (a, b) = compute_h_pm(&zero, 30.0, 1.0);
        assert_eq!((a[0], b[0]), (0.0, 0.0));
        let even = |x: f64| DVector::from_vec(vec![(-x * x).exp()]);
        let (a, b) = compute_h_pm(&even, 30.0, 1.0);
        // Oriented integrals of an even function are opposite.
        assert!((a[0] + b[0]).abs() < 1e-12);
        assert!((a[0] - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sawtooth_u1_vanishes_at_infinity() {
        let p = burgers_profile();
        let op = Arc::new(InnerOperator::new(p.clone(), 0.02).unwrap());
        let h = first_order_source(&p, &LayerPoly::linear(&one(), &one()));
        let u1 = solve_inner_u1(&op, h, 0.0, DVector::from_vec(vec![2.0 * LN_2])).unwrap();
        let x = op.xi_max();
        assert!(u1.u_value(x)[0].abs() < 1e-6);
        assert!(u1.u_value(-x)[0].abs() < 1e-6);
        assert!(u1.limit_error() < 1e-6);
        assert!(op.normalisation_defect(&u1.particular) < 1e-12);
    }

    #[test]
    fn homogeneous_problem_gives_zero() {
        let p = burgers_profile();
        let op = Arc::new(InnerOperator::new(p, 0.05).unwrap());
        let zero: Source = Arc::new(|_x| DVector::from_vec(vec![0.0]));
        let u = solve_inner_u1(&op, zero, 0.0, DVector::from_vec(vec![0.0])).unwrap();
        for &x in &[-10.0, 0.0, 3.0] {
            assert!(u.u_value(x)[0].abs() < 1e-14);
        }
    }

    #[test]
    fn limits_for_random_coefficients() {
        use rand::{Rng, SeedableRng};
        let p = burgers_profile();
        let op = Arc::new(InnerOperator::new(p.clone(), 0.02).unwrap());
        let h = first_order_source(&p, &LayerPoly::linear(&one(), &one()));
        let base = solve_inner_u1(&op, h, 0.0, DVector::from_vec(vec![0.0])).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let d = rng.gen_range(-1.0..1.0);
            let c = rng.gen_range(-2.0..2.0);
            let u = base.with_coefficients(d, DVector::from_vec(vec![c]));
            assert!(u.limit_error() < 1e-6, "{}", u.limit_error());
        }
    }

    #[test]
    fn equation_residual_by_differences() {
        // U' − ÃU − b, with U' from a central difference of the interpolant.
        let p = burgers_profile();
        let op = Arc::new(InnerOperator::new(p.clone(), 0.02).unwrap());
        let h = first_order_source(&p, &LayerPoly::linear(&one(), &one()));
        let u = solve_inner_u1(&op, h, 0.3, DVector::from_vec(vec![0.7])).unwrap();
        let e = 1e-4;
        let mut worst = 0.0f64;
        for i in 0..200 {
            let xi = -15.0 + 0.15 * i as f64 + 0.013;
            let d = (u.u_value(xi + e) - u.u_value(xi - e)) / (2.0 * e);
            worst = worst.max((d - &u.u_eval(xi)[1]).amax());
        }
        assert!(worst < 1e-6, "{worst}");
    }
}

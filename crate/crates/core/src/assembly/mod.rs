//! Assembly of the approximate solution
//! `u_app = Σ μ^j I^{jε} + (1 − Σ μ^j) O^ε` and its residual.
//!
//! `O^ε = u + εu₁ + ε²u₂` is the outer expansion and
//! `I^ε = V + εV₁ + ε²V₂` the inner one, evaluated at the stretched variable
//! `ξ = (x − X)/ε + δ₀ + εδ₁`. The residual is computed twice: directly from
//! the equation, and as the sum `q₁ + q₂ + q₃` of the outer, inner and
//! matching-zone error terms.

pub mod cutoff;
pub mod phi;
pub mod scaling;

pub use cutoff::{k_minus, k_plus, mu, smoothstep, CutoffConfig};
pub use phi::{PhiMap, PhiValue, Shift};
pub use scaling::{certify_scaling, residual_norms, scaling_study, FamilyVerdict, NormSet, ScalingOptions, ScalingReport};

use crate::corrector::{CorrectorSet, InnerSlice};
use crate::error::{Error, Result};
use crate::system::HyperbolicSystem;
use nalgebra::DVector;
use std::sync::Arc;

/// `ξ = (x − X_j)/ε + δ₀ + εδ₁`.
pub fn stretched_xi(x: f64, shock: f64, epsilon: f64, delta0: f64, delta1: f64) -> f64 {
    (x - shock) / epsilon + delta0 + epsilon * delta1
}

/// `u_app^ε` for one roll-wave and one viscosity.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub correctors: Arc<CorrectorSet>,
    pub cutoff: CutoffConfig,
    pub epsilon: f64,
    pub phi: PhiMap,
    /// Smallest `φ_z` found when the map was checked.
    pub min_phi_z: f64,
}

impl ApproxSolution {
    pub fn new(correctors: Arc<CorrectorSet>, cutoff: CutoffConfig, epsilon: f64) -> Result<Self> {
        let rw = &correctors.rollwave;
        if rw.m != 1 {
            return Err(Error::Config(format!("assembly supports one shock per period, got m = {}", rw.m)));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let width = cutoff.width(epsilon);
        if 2.0 * width >= rw.r {
            return Err(Error::Config(format!(
                "matching zone 2 eps^gamma = {:.3e} does not fit inside the shock neighbourhood r = {}",
                2.0 * width,
                rw.r
            )));
        }
        let t_star = correctors.t_star();
        let shift_max = (0..=20)
            .map(|i| correctors.delta0(t_star * i as f64 / 20.0).abs())
            .fold(0.0f64, f64::max);
        let reach = 2.0 * width / epsilon + shift_max + 1.0;
        if reach > correctors.operator.xi_max() {
            return Err(Error::Config(format!(
                "inner zone reaches |xi| = {reach:.1}, beyond the inner domain {:.1}",
                correctors.operator.xi_max()
            )));
        }
        let set = correctors.clone();
        let eps = epsilon;
        let shift: Shift = Arc::new(move |t: f64| {
            let rw = &set.rollwave;
            let d = set.delta0(t) + eps * set.delta1(t);
            let dt = set.delta0_t(t) + eps * set.delta1_t(t);
            let dtt = set.u1.delta_tt(t) + eps * set.second.as_ref().map_or(0.0, |s| s.u2.delta_tt(t));
            let x = rw.shock_position(1, t);
            [x - eps * d, rw.shock_speed(1, t) - eps * dt, -eps * dtt]
        });
        let phi = PhiMap::new(rw.period, rw.r, vec![shift])?;
        let min_phi_z = phi.check_monotone(t_star, 11, 200)?;
        Ok(Self {
            correctors,
            cutoff,
            epsilon,
            phi,
            min_phi_z,
        })
    }

    /// 2 when second-order correctors are present, 1 otherwise.
    pub fn order(&self) -> usize {
        if self.correctors.second.is_some() {
            2
        } else {
            1
        }
    }

    pub fn system(&self) -> &HyperbolicSystem {
        &self.correctors.rollwave.system
    }

    pub fn period(&self) -> f64 {
        self.correctors.rollwave.period
    }

    /// Evaluation context frozen at time `t`.
    pub fn at(&self, t: f64) -> Frame<'_> {
        let set = &self.correctors;
        let slice = set.slice(t);
        let eps = self.epsilon;
        Frame {
            approx: self,
            t,
            shock: set.rollwave.shock_position(1, t),
            speed: set.rollwave.shock_speed(1, t),
            delta_t: slice.delta0_t + eps * slice.delta1_t,
            slice,
        }
    }

    pub fn evaluate_u_app(&self, x: f64, t: f64) -> DVector<f64> {
        self.at(t).value(x)
    }

    pub fn evaluate_u_app_z_frame(&self, z: f64, t: f64) -> DVector<f64> {
        let f = self.at(t);
        f.value(f.phi(z).phi)
    }

    /// `q̃(z, t)` from the component formulas, after checking it against the
    /// direct residual of the equation.
    pub fn residual_q(&self, z: f64, t: f64) -> Result<DVector<f64>> {
        let p = self.at(t).eval_z(z);
        let gap = p.disagreement();
        if gap > 1.0 {
            return Err(Error::Disagreement(gap * 1e-6, z, t));
        }
        Ok(p.q)
    }
}

/// Which cutoff zone a point lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// `|x − X| ≤ ε^γ`, where `u_app = I`.
    Inner,
    /// `ε^γ < |x − X| < 2ε^γ`.
    Annulus,
    /// `|x − X| ≥ 2ε^γ`, where `u_app = O`.
    Outer,
}

/// Everything computed at one point.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub x: f64,
    /// Signed distance to the nearest shock image.
    pub d: f64,
    pub zone: Zone,
    pub u: DVector<f64>,
    pub u_x: DVector<f64>,
    pub u_xx: DVector<f64>,
    pub u_t: DVector<f64>,
    /// Residual from the equation applied to `u_app`.
    pub q_direct: DVector<f64>,
    /// `q₁ + q₂ + q₃`.
    pub q: DVector<f64>,
    pub q1: DVector<f64>,
    pub q2: DVector<f64>,
    pub q3: DVector<f64>,
    /// `I − O` when the inner expansion is available.
    pub mismatch: Option<DVector<f64>>,
    /// Size of the largest terms summed by either residual form, for round-off.
    pub scale: f64,
    /// Pointwise defect of the discrete outer correctors in their own
    /// equations, already included in `q₁`.
    pub outer_defect: f64,
}

impl PointEval {
    /// `|q_direct − q|` in units of the tolerance
    /// `1e-6·max(|q_direct|, |q|) + 64 eps_mach · scale`.
    pub fn disagreement(&self) -> f64 {
        let gap = (&self.q_direct - &self.q).amax();
        let tol = 1e-6 * self.q_direct.amax().max(self.q.amax()) + 64.0 * f64::EPSILON * self.scale;
        if tol == 0.0 {
            if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            gap / tol
        }
    }
}

/// Time-frozen evaluator.
pub struct Frame<'a> {
    pub approx: &'a ApproxSolution,
    pub t: f64,
    pub shock: f64,
    pub speed: f64,
    /// `δ_t = δ₀_t + εδ₁_t`.
    pub delta_t: f64,
    pub slice: InnerSlice,
}

struct Outer {
    u: [DVector<f64>; 3],
    ut: DVector<f64>,
    w: [DVector<f64>; 3],
    wt: DVector<f64>,
    v: [DVector<f64>; 3],
    vt: DVector<f64>,
}

struct Inner {
    v: [DVector<f64>; 3],
    w: [DVector<f64>; 3],
    wt: DVector<f64>,
    y: [DVector<f64>; 3],
    yt: DVector<f64>,
}

impl Frame<'_> {
    pub fn xi(&self, x: f64) -> f64 {
        let d = self.wrap(x - self.shock);
        stretched_xi(d, 0.0, self.approx.epsilon, self.slice.delta0, self.slice.delta1)
    }

    fn wrap(&self, d: f64) -> f64 {
        let l = self.approx.period();
        d - l * (d / l).round()
    }

    pub fn phi(&self, z: f64) -> PhiValue {
        self.approx.phi.eval(z, self.t)
    }

    /// Evaluate at the `z`-frame point, i.e. at `x = φ(z, t)`.
    pub fn eval_z(&self, z: f64) -> PointEval {
        self.eval(self.phi(z).phi)
    }

    fn outer(&self, x: f64) -> Outer {
        let a = self.approx;
        let set = &a.correctors;
        let rw = &set.rollwave;
        let t = self.t;
        let u = [0, 1, 2].map(|k| rw.field_derivative(x, t, k));
        let ut = &u[1] * (-rw.speed);
        let w = [0, 1, 2].map(|k| set.u1(x, t, k));
        let wt = set.u1.eval_t(x, t, 0);
        let v = [0, 1, 2].map(|k| set.u2(x, t, k));
        let vt = match &set.second {
            Some(s) => s.u2.eval_t(x, t, 0),
            None => DVector::zeros(set.n()),
        };
        Outer { u, ut, w, wt, v, vt }
    }

    fn inner(&self, xi: f64) -> Inner {
        let p = &self.approx.correctors.profile;
        let (v0, v1, v2) = p.eval(xi);
        Inner {
            v: [v0, v1, v2],
            w: self.slice.v1(xi),
            wt: self.slice.v1_t(xi),
            y: self.slice.v2(xi),
            yt: self.slice.v2_t(xi),
        }
    }

    /// `u_app^ε(x, t)` alone.
    pub fn value(&self, x: f64) -> DVector<f64> {
        let a = self.approx;
        let set = &a.correctors;
        let eps = a.epsilon;
        let d = self.wrap(x - self.shock);
        let m0 = mu(d / a.cutoff.width(eps))[0];
        let outer = || set.rollwave.field(x, self.t) + set.u1(x, self.t, 0) * eps + set.u2(x, self.t, 0) * (eps * eps);
        if m0 == 0.0 {
            return outer();
        }
        let xi = d / eps + self.slice.delta0 + eps * self.slice.delta1;
        let inner = set.profile.eval(xi).0
            + &self.slice.v1(xi)[0] * eps
            + &self.slice.v2(xi)[0] * (eps * eps);
        if m0 == 1.0 {
            inner
        } else {
            inner * m0 + outer() * (1.0 - m0)
        }
    }

    /// Full evaluation at the physical point `x`.
    pub fn eval(&self, x: f64) -> PointEval {
        let a = self.approx;
        let sys = a.system();
        let eps = a.epsilon;
        let e2 = eps * eps;
        let second = a.order() == 2;
        let n = sys.n();
        let width = a.cutoff.width(eps);
        let d = self.wrap(x - self.shock);
        let s = d / width;
        let [m0, m1, m2] = mu(s);
        let mu_x = m1 / width;
        let mu_xx = m2 / (width * width);
        let mu_t = -mu_x * self.speed;
        let zone = if s.abs() <= 1.0 {
            Zone::Inner
        } else if s.abs() < 2.0 {
            Zone::Annulus
        } else {
            Zone::Outer
        };

        // Outer expansion and its residual R_O.
        let o = self.outer(x);
        let [u0, u1, u2] = &o.u;
        let [w0, w1, w2] = &o.w;
        let [v0, v1, v2] = &o.v;
        let big_o = u0 + w0 * eps + v0 * e2;
        let o_x = u1 + w1 * eps + v1 * e2;
        let o_xx = u2 + w2 * eps + v2 * e2;
        let o_t = &o.ut + &o.wt * eps + &o.vt * e2;
        let dfu = sys.df(u0);
        let dgu = sys.dg(u0);
        let d0 = &o.ut + &dfu * u1 - sys.g(u0);
        let d1 = &o.wt + sys.d2f(u0, u1, w0) + &dfu * w1 - &dgu * w0 - u2;
        let mut r_o = sys.df(&big_o) * &o_x - &dfu * u1 - (sys.d2f(u0, u1, w0) + &dfu * w1) * eps
            - (sys.g(&big_o) - sys.g(u0) - &dgu * w0 * eps);
        let mut defect = &d0 + &d1 * eps;
        if second {
            let ddx = sys.d3f(u0, u1, w0, w0) + sys.d2f(u0, w0, w1) * 2.0;
            let f2 = w2 - &ddx * 0.5 + sys.d2g(u0, w0, w0) * 0.5;
            let d2 = &o.vt + sys.d2f(u0, u1, v0) + &dfu * v1 - &dgu * v0 - f2;
            r_o -= (sys.d2f(u0, u1, v0) + &dfu * v1 + ddx * 0.5) * e2;
            r_o += (&dgu * v0 + sys.d2g(u0, w0, w0) * 0.5) * e2;
            r_o -= v2 * (e2 * eps);
            defect += d2 * e2;
        } else {
            r_o -= w2 * e2;
        }
        r_o += &defect;
        let outer_defect = defect.amax();

        // Inner expansion, where the inner domain covers the point.
        let xi = d / eps + self.slice.delta0 + eps * self.slice.delta1;
        let inner = (xi.abs() <= a.correctors.operator.xi_max()).then(|| self.inner(xi));
        if inner.is_none() && m0 != 0.0 {
            panic!("inner expansion needed outside the inner domain at xi = {xi}");
        }

        let (u, u_x, u_xx, u_t, q1, q2, q3, mismatch, split_scale) = match &inner {
            None => {
                let zero = DVector::zeros(n);
                let s = (sys.df(&big_o) * &o_x).amax() + sys.g(&big_o).amax();
                (big_o.clone(), o_x.clone(), o_xx.clone(), o_t.clone(), r_o.clone(), zero.clone(), zero, None, s)
            }
            Some(iv) => {
                let [p0, p1, p2] = &iv.v;
                let [w0, w1, w2] = &iv.w;
                let [y0, y1, y2] = &iv.y;
                let big_i = p0 + w0 * eps + y0 * e2;
                let i_xi = p1 + w1 * eps + y1 * e2;
                let i_xixi = p2 + w2 * eps + y2 * e2;
                let i_x = &i_xi / eps;
                let i_xx = &i_xixi / e2;
                let xi_t = -self.speed / eps + self.delta_t;
                let i_t = &i_xi * xi_t + &iv.wt * eps + &iv.yt * e2;

                // Inner residual R_I.
                let dfv = sys.df(p0);
                let dgv = sys.dg(p0);
                let mut bracket =
                    sys.df(&big_i) * &i_xi - &dfv * p1 - (sys.d2f(p0, p1, w0) + &dfv * w1) * eps;
                let mut r_i;
                if second {
                    bracket -= (sys.d2f(p0, p1, y0) + &dfv * y1) * e2;
                    bracket -= (sys.d3f(p0, p1, w0, w0) + sys.d2f(p0, w0, w1) * 2.0) * (0.5 * e2);
                    r_i = &bracket / eps - (sys.g(&big_i) - sys.g(p0) - &dgv * w0 * eps);
                    r_i += (w1 * self.slice.delta1_t + &iv.yt + y1 * self.delta_t) * e2;
                } else {
                    r_i = &bracket / eps - (sys.g(&big_i) - sys.g(p0));
                    r_i += (&iv.wt + w1 * self.slice.delta0_t) * eps;
                }

                let diff = &big_i - &big_o;
                let diff_x = &i_x - &o_x;
                let mix = &big_i * m0 + &big_o * (1.0 - m0);
                let mix_x = &diff * mu_x + &i_x * m0 + &o_x * (1.0 - m0);
                let f_i = sys.f(&big_i);
                let f_o = sys.f(&big_o);
                let flux_defect_x = sys.df(&mix) * &mix_x
                    - &f_i * mu_x
                    - sys.df(&big_i) * &i_x * m0
                    + &f_o * mu_x
                    - sys.df(&big_o) * &o_x * (1.0 - m0);
                let source_defect = sys.g(&mix) - sys.g(&big_i) * m0 - sys.g(&big_o) * (1.0 - m0);
                let q3 = &diff * mu_t - &diff * (eps * mu_xx) - &diff_x * (2.0 * eps * mu_x)
                    + (&f_i - &f_o) * mu_x
                    + flux_defect_x
                    - source_defect;

                // Largest terms that cancel inside the split form.
                let split_scale = m0 * (sys.df(&big_i) * &i_x).amax()
                    + (1.0 - m0) * (sys.df(&big_o) * &o_x).amax()
                    + (f_i.amax() + f_o.amax()) * mu_x.abs()
                    + (sys.df(&mix) * &mix_x).amax()
                    + sys.g(&big_i).amax().max(sys.g(&big_o).amax());
                let u = mix;
                let u_x = mix_x;
                let u_xx = &diff * mu_xx + &diff_x * (2.0 * mu_x) + &i_xx * m0 + &o_xx * (1.0 - m0);
                let u_t = &diff * mu_t + &i_t * m0 + &o_t * (1.0 - m0);
                (u, u_x, u_xx, u_t, &r_o * (1.0 - m0), r_i * m0, q3, Some(diff), split_scale)
            }
        };

        let flux_x = sys.df(&u) * &u_x;
        let g = sys.g(&u);
        let q_direct = &u_t + &flux_x - &u_xx * eps - &g;
        let scale = (u_t.amax() + flux_x.amax() + eps * u_xx.amax() + g.amax()).max(split_scale);
        let q = &q1 + &q2 + &q3;
        PointEval {
            x,
            d,
            zone,
            u,
            u_x,
            u_xx,
            u_t,
            q_direct,
            q,
            q1,
            q2,
            q3,
            mismatch,
            scale,
            outer_defect,
        }
    }
}

//! Outer correctors between shocks.
//!
//! In the co-moving coordinate `y = x − X(t) ∈ (0, L)` an outer corrector
//! solves `v_t + (Ã v)_y − B v = F`, `Ã = df(U) − s`, `B = dg(U)`. With
//! `v = P w` this becomes `w_t + D̃ w_y + M w = P⁻¹F`, which is integrated
//! along characteristics (semi-Lagrangian, Heun in time, cubic interpolation
//! at the feet). The families leaving the shock are fed by the coupling
//! conditions at `y = 0` (right of the shock) and `y = L` (left of it).

use super::coupling::ShockCoupling;
use crate::error::{Error, Result};
use crate::numerics::lagrange::{stencil, TimeSeries};
use crate::numerics::quad::gauss_legendre;
use crate::system::{eigen_decompose, RollWave, Side};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct OuterOptions {
    pub ny: usize,
    pub nt: usize,
    pub store_every: usize,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            ny: 800,
            nt: 2000,
            store_every: 4,
        }
    }
}

/// Forcing `F(y_m, t)` written into a node-major buffer of length `n·(ny+1)`.
pub type Forcing<'a> = &'a (dyn Fn(f64, &mut [f64]) + Sync);

/// Coupling right-hand side `l(t, δ) = δ κ + m(t)`.
pub struct CouplingRhs<'a> {
    pub kappa: DVector<f64>,
    pub m: &'a (dyn Fn(f64) -> DVector<f64> + Sync),
}

/// Coefficients of the characteristic form at the grid nodes.
#[derive(Debug, Clone)]
pub struct FrameCoefficients {
    pub n: usize,
    pub ny: usize,
    pub dy: f64,
    pub k: usize,
    /// `U(y_m)`, `U'(y_m)`, `U''(y_m)`, node-major.
    pub u: Vec<DVector<f64>>,
    pub ux: Vec<DVector<f64>>,
    pub uxx: Vec<DVector<f64>>,
    /// `λ_i(U(y_m)) − s`, family-major.
    pub speeds: Vec<Vec<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub p_inv: Vec<DMatrix<f64>>,
    pub m: Vec<DMatrix<f64>>,
}

impl FrameCoefficients {
    pub fn new(rw: &RollWave, ny: usize) -> Result<Self> {
        let sys = &rw.system;
        let n = sys.n();
        let l = rw.period;
        let dy = l / ny as f64;
        let s = rw.speed;
        let k = rw.lax(1, 0.0)?.k;
        let state = |y: f64, order: usize| -> DVector<f64> {
            if y <= 0.0 {
                rw.shape.trace(Side::Plus, order)
            } else if y >= l {
                rw.shape.trace(Side::Minus, order)
            } else {
                rw.shape.eval(y, order)
            }
        };
        let eig = |y: f64| eigen_decompose(sys, &state(y, 0));
        let mut u = Vec::with_capacity(ny + 1);
        let mut ux = Vec::with_capacity(ny + 1);
        let mut uxx = Vec::with_capacity(ny + 1);
        let mut speeds = vec![vec![0.0; ny + 1]; n];
        let mut p = Vec::with_capacity(ny + 1);
        let mut p_inv = Vec::with_capacity(ny + 1);
        let mut mm = Vec::with_capacity(ny + 1);
        let fd = 1e-5 * l;
        for m in 0..=ny {
            let y = dy * m as f64;
            let e = eig(y)?;
            let uy = state(y, 1);
            // dP/dy: centred inside, second-order one-sided at the ends.
            let dp = if m == 0 {
                (eig(fd)?.p * 4.0 - eig(2.0 * fd)?.p - &e.p * 3.0) / (2.0 * fd)
            } else if m == ny {
                (&e.p * 3.0 - eig(l - fd)?.p * 4.0 + eig(l - 2.0 * fd)?.p) / (2.0 * fd)
            } else {
                let a = (y - fd).max(0.5 * y);
                let b = (y + fd).min(0.5 * (y + l));
                (eig(b)?.p - eig(a)?.p) / (b - a)
            };
            let v = state(y, 0);
            let at = sys.df(&v) - DMatrix::identity(n, n) * s;
            let dat = DMatrix::from_fn(n, n, |r, c| {
                let mut ec = DVector::zeros(n);
                ec[c] = 1.0;
                sys.d2f(&v, &uy, &ec)[r]
            });
            let b = sys.dg(&v);
            let mw = &e.p_inv * (&dat * &e.p + &at * &dp - &b * &e.p);
            for i in 0..n {
                speeds[i][m] = e.lambdas[i] - s;
            }
            u.push(v);
            ux.push(uy);
            uxx.push(state(y, 2));
            p.push(e.p);
            p_inv.push(e.p_inv);
            mm.push(mw);
        }
        for i in 0..n {
            let sp = &speeds[i];
            let bad = match (i + 1).cmp(&k) {
                std::cmp::Ordering::Less => sp.iter().any(|v| *v >= 0.0),
                std::cmp::Ordering::Greater => sp.iter().any(|v| *v <= 0.0),
                std::cmp::Ordering::Equal => sp[0] >= 0.0 || sp[ny] <= 0.0,
            };
            if bad {
                return Err(Error::CharacteristicCollision { family: i + 1, time: 0.0 });
            }
        }
        Ok(Self {
            n,
            ny,
            dy,
            k,
            u,
            ux,
            uxx,
            speeds,
            p,
            p_inv,
            m: mm,
        })
    }

    pub fn length(&self) -> f64 {
        self.dy * self.ny as f64
    }

    /// Cubic interpolation of a nodal scalar array at `y`.
    pub fn interp(&self, data: &[f64], y: f64) -> f64 {
        let (start, w) = stencil(0.0, self.dy, self.ny + 1, y, 4);
        w[0].iter().enumerate().map(|(i, wi)| wi * data[start + i]).sum()
    }

    pub fn speed_at(&self, family: usize, y: f64) -> f64 {
        self.interp(&self.speeds[family], y)
    }
}

/// Where the backward characteristic from a node lands after one step.
#[derive(Debug, Clone)]
enum Foot {
    Inside { start: usize, w: [f64; 4] },
    /// Left the domain through the shock `θ` before the end of the step.
    Entering { theta: f64, boundary: usize },
}

/// Node-major snapshots of an outer corrector plus the shock data recorded
/// every step.
#[derive(Debug, Clone)]
pub struct OuterSolution {
    pub rollwave: RollWave,
    pub coeffs: FrameCoefficients,
    pub options: OuterOptions,
    pub dt: f64,
    pub snapshots: TimeSeries,
    /// Per step: `[δ, δ_t, v(0⁺)…, v(L⁻)…]`.
    pub shock: TimeSeries,
    pub max_coupling_residual: f64,
}

fn foot_weights(c: &FrameCoefficients, y: f64) -> (usize, [f64; 4]) {
    let (start, w) = stencil(0.0, c.dy, c.ny + 1, y, 4);
    (start, [w[0][0], w[0][1], w[0][2], w[0][3]])
}

fn feet(c: &FrameCoefficients, dt: f64) -> Vec<Vec<Foot>> {
    let (gx, gw) = gauss_legendre(8);
    let l = c.length();
    (0..c.n)
        .map(|i| {
            (0..=c.ny)
                .map(|m| {
                    let y = c.dy * m as f64;
                    let entering = (i + 1).cmp(&c.k);
                    let (theta, boundary) = match entering {
                        std::cmp::Ordering::Greater => (crossing_time(c, i, 0.0, y, &gx, &gw), 0),
                        std::cmp::Ordering::Less => (crossing_time(c, i, y, l, &gx, &gw), c.ny),
                        std::cmp::Ordering::Equal => (f64::INFINITY, 0),
                    };
                    if theta < dt {
                        return Foot::Entering { theta, boundary };
                    }
                    let sub = 8;
                    let hs = dt / sub as f64;
                    let f = |yy: f64| -c.speed_at(i, yy.clamp(0.0, l));
                    let mut yy = y;
                    for _ in 0..sub {
                        let k1 = f(yy);
                        let k2 = f(yy + 0.5 * hs * k1);
                        let k3 = f(yy + 0.5 * hs * k2);
                        let k4 = f(yy + hs * k3);
                        yy += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    }
                    let (start, w) = foot_weights(c, yy.clamp(0.0, l));
                    Foot::Inside { start, w }
                })
                .collect()
        })
        .collect()
}

/// Travel time `∫ dy / |λ_i − s|` over `[a, b]`.
fn crossing_time(c: &FrameCoefficients, i: usize, a: f64, b: f64, gx: &[f64], gw: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut acc = 0.0;
    for (x, w) in gx.iter().zip(gw) {
        let y = a + 0.5 * (b - a) * (x + 1.0);
        acc += 0.5 * (b - a) * w / c.speed_at(i, y).abs();
    }
    acc
}

/// Integrate one outer corrector from zero (or given) initial data.
pub fn solve_outer(
    rw: &RollWave,
    opts: &OuterOptions,
    forcing: Forcing<'_>,
    rhs: &CouplingRhs<'_>,
    initial: Option<&[f64]>,
) -> Result<OuterSolution> {
    let c = FrameCoefficients::new(rw, opts.ny)?;
    solve_outer_with(rw, c, opts, forcing, rhs, initial)
}

pub fn solve_outer_with(
    rw: &RollWave,
    c: FrameCoefficients,
    opts: &OuterOptions,
    forcing: Forcing<'_>,
    rhs: &CouplingRhs<'_>,
    initial: Option<&[f64]>,
) -> Result<OuterSolution> {
    let n = c.n;
    let ny = c.ny;
    let nodes = ny + 1;
    let dt = rw.t_star / opts.nt as f64;
    let coupling = ShockCoupling::new(rw, 1, 0.0)?;
    let feet = feet(&c, dt);
    // Family-major characteristic amplitudes.
    let mut w = vec![vec![0.0; nodes]; n];
    if let Some(v0) = initial {
        for m in 0..nodes {
            let wm = &c.p_inv[m] * DVector::from_column_slice(&v0[m * n..(m + 1) * n]);
            for i in 0..n {
                w[i][m] = wm[i];
            }
        }
    }
    let mut fbuf = vec![0.0; n * nodes];
    let source = |w: &[Vec<f64>], t: f64, fbuf: &mut Vec<f64>| -> Vec<Vec<f64>> {
        forcing(t, fbuf);
        let mut s = vec![vec![0.0; nodes]; n];
        for m in 0..nodes {
            let wm = DVector::from_fn(n, |i, _| w[i][m]);
            let f = DVector::from_column_slice(&fbuf[m * n..(m + 1) * n]);
            let sm = &c.p_inv[m] * f - &c.m[m] * wm;
            for i in 0..n {
                s[i][m] = sm[i];
            }
        }
        s
    };
    let couple = |w: &mut [Vec<f64>], t: f64, delta: f64| -> (f64, f64) {
        let ap = DVector::from_fn(n, |i, _| w[i][0]);
        let am = DVector::from_fn(n, |i, _| w[i][ny]);
        let l = &rhs.kappa * delta + (rhs.m)(t);
        let sol = coupling.solve(&ap, &am, &l);
        for i in 0..n {
            if i + 1 > c.k {
                w[i][0] = sol.a_plus[i];
            }
            if i + 1 < c.k {
                w[i][ny] = sol.a_minus[i];
            }
        }
        (sol.delta_t, sol.residual)
    };
    let to_v = |w: &[Vec<f64>]| -> Vec<f64> {
        let mut v = vec![0.0; n * nodes];
        for m in 0..nodes {
            let vm = &c.p[m] * DVector::from_fn(n, |i, _| w[i][m]);
            v[m * n..(m + 1) * n].copy_from_slice(vm.as_slice());
        }
        v
    };
    let mut delta = 0.0;
    let (mut delta_t, mut worst_res) = couple(&mut w, 0.0, delta);
    let mut snapshots = TimeSeries::new(0.0, dt * opts.store_every as f64, n * nodes);
    let mut shock = TimeSeries::new(0.0, dt, 2 + 2 * n);
    let record_shock = |shock: &mut TimeSeries, v: &[f64], delta: f64, delta_t: f64| {
        let mut row = vec![delta, delta_t];
        row.extend_from_slice(&v[..n]);
        row.extend_from_slice(&v[ny * n..]);
        shock.push(&row);
    };
    let v0 = to_v(&w);
    snapshots.push(&v0);
    record_shock(&mut shock, &v0, delta, delta_t);
    let interp = |data: &[f64], start: usize, wt: &[f64; 4]| -> f64 {
        wt[0] * data[start] + wt[1] * data[start + 1] + wt[2] * data[start + 2] + wt[3] * data[start + 3]
    };
    for step in 0..opts.nt {
        let t0 = dt * step as f64;
        let t1 = t0 + dt;
        let s0 = source(&w, t0, &mut fbuf);
        let wb0: Vec<[f64; 2]> = (0..n).map(|i| [w[i][0], w[i][ny]]).collect();
        let mut ws = vec![vec![0.0; nodes]; n];
        for i in 0..n {
            for m in 0..nodes {
                if let Foot::Inside { start, w: wt } = &feet[i][m] {
                    ws[i][m] = interp(&w[i], *start, wt) + dt * interp(&s0[i], *start, wt);
                }
            }
        }
        let delta_s = delta + dt * delta_t;
        let (dts, _) = couple(&mut ws, t1, delta_s);
        let entering = |wn: &mut [Vec<f64>], extra: &dyn Fn(usize, usize, f64) -> f64| {
            for i in 0..n {
                for m in 0..nodes {
                    if let Foot::Entering { theta, boundary } = feet[i][m] {
                        if theta == 0.0 {
                            continue;
                        }
                        let side = usize::from(boundary != 0);
                        let r = theta / dt;
                        let wb = r * wb0[i][side] + (1.0 - r) * wn[i][boundary];
                        wn[i][m] = wb + extra(i, m, theta);
                    }
                }
            }
        };
        entering(&mut ws, &|i, m, theta| {
            let b = if let Foot::Entering { boundary, .. } = feet[i][m] { boundary } else { 0 };
            theta * s0[i][b]
        });
        let s1 = source(&ws, t1, &mut fbuf);
        let mut wn = vec![vec![0.0; nodes]; n];
        for i in 0..n {
            for m in 0..nodes {
                if let Foot::Inside { start, w: wt } = &feet[i][m] {
                    wn[i][m] = interp(&w[i], *start, wt) + 0.5 * dt * (interp(&s0[i], *start, wt) + s1[i][m]);
                }
            }
        }
        let delta_new = delta + 0.5 * dt * (delta_t + dts);
        let (dtn, res) = couple(&mut wn, t1, delta_new);
        entering(&mut wn, &|i, m, theta| {
            let b = if let Foot::Entering { boundary, .. } = feet[i][m] { boundary } else { 0 };
            0.5 * theta * (s0[i][b] + s1[i][m])
        });
        w = wn;
        delta = delta_new;
        delta_t = dtn;
        worst_res = worst_res.max(res);
        let v = to_v(&w);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Blowup(t1));
        }
        record_shock(&mut shock, &v, delta, delta_t);
        if (step + 1) % opts.store_every == 0 {
            snapshots.push(&v);
        }
    }
    if opts.nt % opts.store_every != 0 {
        return Err(Error::Config(format!(
            "outer steps {} not divisible by the storage stride {}",
            opts.nt, opts.store_every
        )));
    }
    Ok(OuterSolution {
        rollwave: rw.clone(),
        coeffs: c,
        options: *opts,
        dt,
        snapshots,
        shock,
        max_coupling_residual: worst_res,
    })
}

impl OuterSolution {
    pub fn n(&self) -> usize {
        self.coeffs.n
    }

    /// `∂_y^k v(y, t)` (time interpolation is cubic, space uses a
    /// six-point stencil).
    pub fn eval_y(&self, y: f64, t: f64, k: usize) -> DVector<f64> {
        self.eval_y_dt(y, t, k, 0)
    }

    /// `∂_t^kt ∂_y^k v(y, t)` at fixed co-moving `y`.
    pub fn eval_y_dt(&self, y: f64, t: f64, k: usize, kt: usize) -> DVector<f64> {
        let n = self.n();
        let c = &self.coeffs;
        let y = y.clamp(0.0, c.length());
        let ts = &self.snapshots;
        let tt = t.clamp(0.0, ts.t_end());
        let (t_start, tw) = stencil(0.0, ts.dt, ts.len(), tt, 4);
        let (y_start, yw) = stencil(0.0, c.dy, c.ny + 1, y, 6);
        let mut out = DVector::zeros(n);
        for (a, wa) in tw[kt].iter().enumerate() {
            let snap = ts.sample(t_start + a);
            for (b, wb) in yw[k].iter().enumerate() {
                let m = y_start + b;
                for comp in 0..n {
                    out[comp] += wa * wb * snap[m * n + comp];
                }
            }
        }
        out
    }

    /// `∂_x^k u_i(x, t)` at a physical point (between shocks).
    pub fn eval(&self, x: f64, t: f64, k: usize) -> DVector<f64> {
        self.eval_y(self.rollwave.frame(x, t), t, k)
    }

    /// `∂_t ∂_x^k u_i(x, t)` at fixed `x`.
    pub fn eval_t(&self, x: f64, t: f64, k: usize) -> DVector<f64> {
        let y = self.rollwave.frame(x, t);
        self.eval_y_dt(y, t, k, 1) - self.eval_y(y, t, k + 1) * self.rollwave.speed
    }

    pub fn delta(&self, t: f64) -> f64 {
        self.shock.value(t)[0]
    }

    pub fn delta_t(&self, t: f64) -> f64 {
        self.shock.value(t)[1]
    }

    pub fn delta_tt(&self, t: f64) -> f64 {
        self.shock.eval(t, 1)[1]
    }

    /// `∂_t^kt` of the one-sided trace `u_i^{±}(t)`.
    pub fn trace_value(&self, side: Side, t: f64, kt: usize) -> DVector<f64> {
        let n = self.n();
        let row = self.shock.eval(t, kt);
        let off = match side {
            Side::Plus => 2,
            Side::Minus => 2 + n,
        };
        DVector::from_column_slice(&row[off..off + n])
    }

    /// `∂_x^k u_i^{±}(t)` from one-sided stencils of the snapshots.
    pub fn trace(&self, side: Side, k: usize, t: f64) -> DVector<f64> {
        if k == 0 {
            return self.trace_value(side, t, 0);
        }
        let y = match side {
            Side::Plus => 0.0,
            Side::Minus => self.coeffs.length(),
        };
        self.eval_y(y, t, k)
    }

    /// Largest `|∂_t v|` over the stored snapshots, a cheap "is it zero" check.
    pub fn sup_norm(&self) -> f64 {
        self.snapshots.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Characteristic amplitudes and their right-hand sides `S = P⁻¹F − M w`
    /// at `(y, t)`.
    fn w_and_s(&self, forcing: Forcing<'_>, y: f64, t: f64, fbuf: &mut [f64]) -> (DVector<f64>, DVector<f64>) {
        let c = &self.coeffs;
        let n = c.n;
        let v = self.eval_y(y, t, 0);
        forcing(t, fbuf);
        let (start, wts) = stencil(0.0, c.dy, c.ny + 1, y, 4);
        let mut p_inv = DMatrix::zeros(n, n);
        let mut mm = DMatrix::zeros(n, n);
        let mut f = DVector::zeros(n);
        for (a, wa) in wts[0].iter().enumerate() {
            let m = start + a;
            p_inv += &c.p_inv[m] * *wa;
            mm += &c.m[m] * *wa;
            f += DVector::from_column_slice(&fbuf[m * n..(m + 1) * n]) * *wa;
        }
        let w = &p_inv * v;
        let s = &p_inv * f - &mm * &w;
        (w, s)
    }

    /// Largest `|d w_i/dt − S_i|` along `count` characteristics started at
    /// spread-out points, with the derivative taken by central differences.
    pub fn characteristic_residual(&self, forcing: Forcing<'_>, count: usize) -> f64 {
        let c = &self.coeffs;
        let n = c.n;
        let l = c.length();
        let t_end = self.snapshots.t_end();
        let mut fbuf = vec![0.0; n * (c.ny + 1)];
        let mut worst = 0.0f64;
        let tau = 2e-3 * t_end;
        for q in 0..count {
            let i = q % n;
            let y0 = l * (q as f64 + 0.5) / count as f64;
            let f = |y: f64| c.speed_at(i, y.clamp(0.0, l));
            let advance = |y: f64, h: f64| {
                let k1 = f(y);
                let k2 = f(y + 0.5 * h * k1);
                let k3 = f(y + 0.5 * h * k2);
                let k4 = f(y + h * k3);
                y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            };
            let samples = 10;
            let mut y = y0;
            let mut t = 0.0;
            let h_t = t_end / samples as f64;
            for _ in 0..samples {
                let sub = 10;
                for _ in 0..sub {
                    y = advance(y, h_t / sub as f64);
                }
                t += h_t;
                let tm = (t - 0.5 * h_t).max(tau);
                let ym = {
                    let mut yy = y;
                    for _ in 0..sub {
                        yy = advance(yy, -(t - tm) / sub as f64);
                    }
                    yy
                };
                // Stay clear of the shock, where stencils are one-sided.
                if ym < 3.0 * c.dy || ym > l - 3.0 * c.dy {
                    continue;
                }
                let ya = advance(ym, -tau);
                let yb = advance(ym, tau);
                let (wa, _) = self.w_and_s(forcing, ya, tm - tau, &mut fbuf);
                let (wb, _) = self.w_and_s(forcing, yb, tm + tau, &mut fbuf);
                let (_, s) = self.w_and_s(forcing, ym, tm, &mut fbuf);
                let r = ((wb[i] - wa[i]) / (2.0 * tau) - s[i]).abs();
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Forcing of the order-1 corrector, `F = u_xx`.
pub fn first_order_forcing(c: &FrameCoefficients) -> Vec<f64> {
    let n = c.n;
    let mut f = vec![0.0; n * (c.ny + 1)];
    for (m, u) in c.uxx.iter().enumerate() {
        f[m * n..(m + 1) * n].copy_from_slice(u.as_slice());
    }
    f
}

/// `κ = A⁺ u_x⁺ − A⁻ u_x⁻`, the coefficient of the shift in the coupling
/// right-hand side.
pub fn shift_coefficient(rw: &RollWave) -> DVector<f64> {
    let sys = &rw.system;
    let n = sys.n();
    let s = rw.speed;
    let a = |side: Side| sys.df(&rw.trace(1, side, 0, 0.0)) - DMatrix::identity(n, n) * s;
    a(Side::Plus) * rw.trace(1, Side::Plus, 1, 0.0) - a(Side::Minus) * rw.trace(1, Side::Minus, 1, 0.0)
}

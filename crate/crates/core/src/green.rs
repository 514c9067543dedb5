//! Gaussian kernels transported along frozen characteristics, projections
//! onto the incoming and outgoing families at a shock, and a resolved solver
//! for the Green's function of the operator linearised about `ũ_app`:
//!
//! `L^ε w = w_t + (A w)_z − b w_zz − R w`,
//!
//! with `A = (df(ũ_app) − φ_t + εφ_zz/φ_z²)/φ_z`, `b = ε/φ_z²` and
//! `R = dg(ũ_app)`.

use crate::assembly::{ApproxSolution, PhiMap, Shift};
use crate::error::{Error, Result};
use crate::numerics::cyclic::CyclicTridiagonal;
use crate::numerics::ode::Dopri5;
use crate::numerics::quad::composite;
use crate::numerics::fit::loglog_slope;
use crate::numerics::linspace;
use crate::system::{eigen_decompose, HyperbolicSystem, RollWave};
use crate::viscous::{Grid, Trajectory};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Frozen characteristic speeds `λ_i^j(x, t)`; family `i` and segment `j`
/// are 1-based.
pub trait SpeedField: Send + Sync {
    fn lambda(&self, i: usize, j: usize, x: f64, t: f64) -> f64;
}

/// Between shocks `j` and `j + 1` the speed follows the wave; to the left of
/// shock `j` it is frozen at `λ_i(u^{j+})`, to the right of shock `j + 1` at
/// `λ_i(u^{(j+1)−})`.
impl SpeedField for RollWave {
    fn lambda(&self, i: usize, j: usize, x: f64, t: f64) -> f64 {
        let y = (x - self.shock_position(j, t)).clamp(0.0, self.period / self.m as f64);
        let u = self.shape.eval(y, 0);
        if self.system.n() == 1 {
            return self.system.df(&u)[(0, 0)];
        }
        eigen_decompose(&self.system, &u).map_or(f64::NAN, |e| e.lambdas[i - 1])
    }
}

impl<F> SpeedField for F
where
    F: Fn(usize, usize, f64, f64) -> f64 + Send + Sync,
{
    fn lambda(&self, i: usize, j: usize, x: f64, t: f64) -> f64 {
        self(i, j, x, t)
    }
}

/// The characteristic `t ↦ χ_i^j(t, τ, y)` through `y` at time `τ`.
pub struct CharCurve<'a> {
    pub family: usize,
    pub segment: usize,
    pub tau: f64,
    pub y: f64,
    speeds: &'a dyn SpeedField,
    solver: Dopri5,
}

impl<'a> CharCurve<'a> {
    pub fn new(speeds: &'a dyn SpeedField, family: usize, segment: usize, tau: f64, y: f64) -> Self {
        Self {
            family,
            segment,
            tau,
            y,
            speeds,
            solver: Dopri5::with_tol(1e-12),
        }
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        if t == self.tau {
            return Ok(self.y);
        }
        let (i, j) = (self.family, self.segment);
        let rhs = |s: f64, x: &[f64], dx: &mut [f64]| dx[0] = self.speeds.lambda(i, j, x[0], s);
        Ok(self.solver.integrate(rhs, self.tau, &[self.y], t)?[0])
    }

    /// `λ_i^j(χ(t), t)`, the curve's own speed.
    pub fn speed(&self, t: f64) -> Result<f64> {
        Ok(self.speeds.lambda(self.family, self.segment, self.at(t)?, t))
    }
}

/// The far-field kernels `G_i^j` for one viscosity and shock-fixing map.
pub struct Kernels<'a> {
    pub speeds: &'a dyn SpeedField,
    pub phi: &'a PhiMap,
    pub epsilon: f64,
}

impl<'a> Kernels<'a> {
    pub fn new(speeds: &'a dyn SpeedField, phi: &'a PhiMap, epsilon: f64) -> Self {
        Self { speeds, phi, epsilon }
    }

    pub fn from_approx(approx: &'a ApproxSolution) -> Self {
        Self::new(&approx.correctors.rollwave, &approx.phi, approx.epsilon)
    }

    /// The characteristic started at `φ(y, τ)`.
    pub fn curve(&self, i: usize, j: usize, tau: f64, y: f64) -> CharCurve<'a> {
        CharCurve::new(self.speeds, i, j, tau, self.phi.eval(y, tau).phi)
    }

    fn gaussian(&self, weight: f64, chi: f64, x: f64, s: f64) -> f64 {
        let four_eps_s = 4.0 * self.epsilon * s;
        weight / (PI * four_eps_s).sqrt() * (-(x - chi).powi(2) / four_eps_s).exp()
    }

    /// `G_i^j(t, τ, z, y)`; zero for `t ≤ τ`.
    pub fn kernel_g(&self, i: usize, j: usize, t: f64, tau: f64, z: f64, y: f64) -> f64 {
        if t <= tau {
            return 0.0;
        }
        let Ok(chi) = self.curve(i, j, tau, y).at(t) else {
            return f64::NAN;
        };
        self.gaussian(self.phi.eval(y, tau).z, chi, self.phi.eval(z, t).phi, t - tau)
    }

    /// `L_i^j G_i^j = (λ_i^j(φ(z,t), t) − λ_i^j(χ, t))·∂_x G`, where the
    /// derivative is taken in the physical variable `x = φ(z, t)`
    /// (`∂_z G = φ_z ∂_x G`).
    pub fn kernel_error(&self, i: usize, j: usize, t: f64, tau: f64, z: f64, y: f64) -> f64 {
        if t <= tau {
            return 0.0;
        }
        let Ok(chi) = self.curve(i, j, tau, y).at(t) else {
            return f64::NAN;
        };
        let x = self.phi.eval(z, t).phi;
        self.error_at(i, j, t, tau, x, chi, self.phi.eval(y, tau).z)
    }

    #[allow(clippy::too_many_arguments)]
    fn error_at(&self, i: usize, j: usize, t: f64, tau: f64, x: f64, chi: f64, weight: f64) -> f64 {
        let s = t - tau;
        let g = self.gaussian(weight, chi, x, s);
        let g_x = -(x - chi) / (2.0 * self.epsilon * s) * g;
        (self.speeds.lambda(i, j, x, t) - self.speeds.lambda(i, j, chi, t)) * g_x
    }

    /// `L_i^j` applied to `kernel_g` by centred differences with steps
    /// `h_t` and `h_z`.
    #[allow(clippy::too_many_arguments)]
    pub fn apply_operator(&self, i: usize, j: usize, t: f64, tau: f64, z: f64, y: f64, h_t: f64, h_z: f64) -> f64 {
        let g = |t: f64, z: f64| self.kernel_g(i, j, t, tau, z, y);
        let p = self.phi.eval(z, t);
        let eps = self.epsilon;
        let g0 = g(t, z);
        let g_t = (g(t + h_t, z) - g(t - h_t, z)) / (2.0 * h_t);
        let (gp, gm) = (g(t, z + h_z), g(t, z - h_z));
        let g_z = (gp - gm) / (2.0 * h_z);
        let g_zz = (gp - 2.0 * g0 + gm) / (h_z * h_z);
        let drift = (self.speeds.lambda(i, j, p.phi, t) - p.t + eps * p.zz / (p.z * p.z)) / p.z;
        g_t + drift * g_z - eps / (p.z * p.z) * g_zz
    }

    /// `∫_τ^{τ+span} ∫ |L_i^j G_i^j| dz dt`, by Gauss–Legendre quadrature
    /// over a window of twelve kernel widths around the characteristic.
    pub fn error_mass(&self, i: usize, j: usize, tau: f64, y: f64, span: f64) -> Result<f64> {
        let curve = self.curve(i, j, tau, y);
        let weight = self.phi.eval(y, tau).z;
        let mut failure = None;
        let total = composite(
            |t| {
                let s = t - tau;
                let chi = match curve.at(t) {
                    Ok(c) => c,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return 0.0;
                    }
                };
                let zc = self.phi.invert(chi, t);
                let half = 12.0 * (2.0 * self.epsilon * s).sqrt() / self.phi.eval(zc, t).z;
                composite(
                    |z| self.error_at(i, j, t, tau, self.phi.eval(z, t).phi, chi, weight).abs(),
                    zc - half,
                    zc + half,
                    24,
                    8,
                )
            },
            tau,
            tau + span,
            16,
            8,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
}

fn diag_ones(n: usize, ones: std::ops::Range<usize>) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |r, c| if r == c && ones.contains(&r) { 1.0 } else { 0.0 })
}

/// Projections `𝒫 = P D P⁻¹` onto the incoming and outgoing families on
/// either side of a Lax `k`-shock, at one point.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub k: usize,
    pub p: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
    pub d_minus_in: DMatrix<f64>,
    pub d_minus_out: DMatrix<f64>,
    pub d_plus_in: DMatrix<f64>,
    pub d_plus_out: DMatrix<f64>,
}

impl ProjectionSet {
    pub fn new(system: &HyperbolicSystem, u: &DVector<f64>, k: usize) -> Result<Self> {
        let n = system.n();
        if k == 0 || k > n {
            return Err(Error::Config(format!("shock family {k} outside 1..={n}")));
        }
        let e = eigen_decompose(system, u)?;
        Ok(Self {
            k,
            p: e.p,
            p_inv: e.p_inv,
            d_minus_in: diag_ones(n, n + 1 - k..n),
            d_minus_out: diag_ones(n, 0..n + 1 - k),
            d_plus_in: diag_ones(n, 0..k),
            d_plus_out: diag_ones(n, k..n),
        })
    }

    /// At `x = φ(z, t)` on the inviscid wave, for the family of shock 1.
    pub fn at(rw: &RollWave, phi: &PhiMap, t: f64, z: f64) -> Result<Self> {
        let k = rw.lax(1, t)?.k;
        Self::new(&rw.system, &rw.field(phi.eval(z, t).phi, t), k)
    }

    fn conj(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        &self.p * d * &self.p_inv
    }

    pub fn minus_in(&self) -> DMatrix<f64> {
        self.conj(&self.d_minus_in)
    }

    pub fn minus_out(&self) -> DMatrix<f64> {
        self.conj(&self.d_minus_out)
    }

    pub fn plus_in(&self) -> DMatrix<f64> {
        self.conj(&self.d_plus_in)
    }

    pub fn plus_out(&self) -> DMatrix<f64> {
        self.conj(&self.d_plus_out)
    }

    /// Largest deviation from completeness (`in + out = Id`, for `D` and
    /// `𝒫` on both sides) and from idempotence of the four projections.
    pub fn defect(&self) -> f64 {
        let n = self.p.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let mut worst = 0.0f64;
        for (d_in, d_out) in [(&self.d_minus_in, &self.d_minus_out), (&self.d_plus_in, &self.d_plus_out)] {
            worst = worst.max((d_in + d_out - &id).amax());
            let (p_in, p_out) = (self.conj(d_in), self.conj(d_out));
            worst = worst.max((&p_in + &p_out - &id).amax());
            for q in [&p_in, &p_out] {
                worst = worst.max((q * q - q).amax());
            }
        }
        worst
    }
}

/// Coefficients of `L^ε` at one point.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: f64,
    pub r: DMatrix<f64>,
}

/// A linear operator `w_t + (A w)_z − b w_zz − R w` on a periodic interval.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn period(&self) -> f64;
    fn epsilon(&self) -> f64;
    /// Last time at which coefficients are available.
    fn t_end(&self) -> f64;
    fn coefficients(&self, t: f64, zs: &[f64]) -> Vec<Coefficients>;
}

impl LinearOperator for ApproxSolution {
    fn dim(&self) -> usize {
        self.system().n()
    }

    fn period(&self) -> f64 {
        ApproxSolution::period(self)
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn t_end(&self) -> f64 {
        self.correctors.t_star()
    }

    fn coefficients(&self, t: f64, zs: &[f64]) -> Vec<Coefficients> {
        let frame = self.at(t);
        let sys = self.system();
        let n = sys.n();
        let eps = self.epsilon;
        zs.par_iter()
            .map(|&z| {
                let p = frame.phi(z);
                let u = frame.value(p.phi);
                let shift = -p.t + eps * p.zz / (p.z * p.z);
                let a = (sys.df(&u) + DMatrix::identity(n, n) * shift) / p.z;
                Coefficients {
                    a,
                    b: eps / (p.z * p.z),
                    r: sys.dg(&u),
                }
            })
            .collect()
    }
}

/// Scalar constant coefficients; with `speed = rate = 0` this is the heat
/// operator `w_t − ε w_zz`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantOperator {
    pub speed: f64,
    pub epsilon: f64,
    pub rate: f64,
    pub period: f64,
    pub t_end: f64,
}

impl LinearOperator for ConstantOperator {
    fn dim(&self) -> usize {
        1
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn t_end(&self) -> f64 {
        self.t_end
    }

    fn coefficients(&self, _t: f64, zs: &[f64]) -> Vec<Coefficients> {
        let c = Coefficients {
            a: DMatrix::from_element(1, 1, self.speed),
            b: self.epsilon,
            r: DMatrix::from_element(1, 1, self.rate),
        };
        vec![c; zs.len()]
    }
}

#[derive(Debug, Clone)]
pub struct GreenOptions {
    pub cfl: f64,
    /// Times at which the coefficients are tabulated (linear in between).
    pub time_nodes: usize,
    /// Stored snapshots after the initial one.
    pub snapshots: usize,
    /// After the start, `dt ≤ ramp · (t − τ + t₀)` where `t₀` is the age of
    /// a heat kernel as wide as the initial pulse.
    pub ramp: f64,
    pub blowup: f64,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            time_nodes: 41,
            snapshots: 20,
            ramp: 0.05,
            blowup: 1e8,
        }
    }
}

/// Coefficients of an operator tabulated on a resolved grid centred on
/// `z = 0`.
pub struct CoefficientTable {
    /// Cells with `Δz ≤ ε/8`; `grid.dt` is the advective step limit.
    pub grid: Grid,
    pub dim: usize,
    pub epsilon: f64,
    pub times: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn build(op: &dyn LinearOperator, opts: &GreenOptions) -> Self {
        let (eps, period, n) = (op.epsilon(), op.period(), op.dim());
        let layout = Grid::resolved(eps, period, -0.5 * period, 1.0, 1.0, 1);
        let zs = layout.centres();
        let times = if opts.time_nodes < 2 {
            vec![0.0]
        } else {
            linspace(0.0, op.t_end(), opts.time_nodes)
        };
        let mut table = Self {
            grid: layout,
            dim: n,
            epsilon: eps,
            times: times.clone(),
            a: Vec::new(),
            b: Vec::new(),
            r: Vec::new(),
        };
        let mut amax = 0.0f64;
        for &t in &times {
            let c = op.coefficients(t, &zs);
            // Row-major n×n blocks, cell after cell.
            let mut a = Vec::with_capacity(zs.len() * n * n);
            let mut r = Vec::with_capacity(zs.len() * n * n);
            for ci in &c {
                for row in 0..n {
                    for col in 0..n {
                        a.push(ci.a[(row, col)]);
                        r.push(ci.r[(row, col)]);
                    }
                }
                amax = amax.max(spectral_bound(&ci.a));
            }
            table.a.push(a);
            table.r.push(r);
            table.b.push(c.iter().map(|ci| ci.b).collect());
        }
        let dx = layout.dx();
        table.grid = Grid::new(layout.n, period, layout.origin, opts.cfl * dx / amax.max(1.0));
        table
    }

    /// Interpolate the coefficients at `t` into the buffers.
    fn load(&self, t: f64, a: &mut [f64], b: &mut [f64], r: &mut [f64]) {
        let nt = self.times.len();
        let (k, w) = if nt == 1 {
            (0, 0.0)
        } else {
            let h = self.times[1] - self.times[0];
            let s = ((t - self.times[0]) / h).clamp(0.0, (nt - 1) as f64);
            let k = (s.floor() as usize).min(nt - 2);
            (k, s - k as f64)
        };
        let mix = |src: &[Vec<f64>], dst: &mut [f64]| {
            if w == 0.0 {
                dst.copy_from_slice(&src[k]);
            } else {
                for ((d, lo), hi) in dst.iter_mut().zip(&src[k]).zip(&src[k + 1]) {
                    *d = (1.0 - w) * lo + w * hi;
                }
            }
        };
        mix(&self.a, a);
        mix(&self.b, b);
        mix(&self.r, r);
    }
}

/// `|λ|` bound from the entries: the largest absolute row sum.
fn spectral_bound(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenSample {
    pub t: f64,
    pub mass: f64,
    pub abs_mass: f64,
    pub total_variation: f64,
}

/// One column `G(·, τ; ·, y) e_c` of the discrete Green's function.
#[derive(Debug, Clone)]
pub struct GreenRun {
    pub tau: f64,
    pub y: f64,
    pub column: usize,
    /// `∫_τ^T ∫ |G e_c|₁ dz dt`.
    pub int_abs_g: f64,
    /// `∫_τ^T ∫ |∂_z G e_c|₁ dz dt`.
    pub int_abs_gz: f64,
    pub history: Vec<GreenSample>,
    /// Snapshots at uniform times in `[τ, T]`, grid centred on `z = 0`.
    pub trajectory: Trajectory,
}

struct GreenStepper<'a> {
    table: &'a CoefficientTable,
    a: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
    flux: Vec<f64>,
    k1: Vec<f64>,
    stage: Vec<f64>,
    column: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    /// Factored diffusion solve, reused while `h` and `b` are unchanged.
    solver: Option<(f64, CyclicTridiagonal)>,
    b_solver: Vec<f64>,
}

fn neighbours(i: usize, n: usize) -> (usize, usize) {
    (if i + 1 == n { 0 } else { i + 1 }, if i == 0 { n - 1 } else { i - 1 })
}

impl<'a> GreenStepper<'a> {
    fn new(table: &'a CoefficientTable) -> Self {
        let (n, d) = (table.grid.n, table.dim);
        Self {
            table,
            a: vec![0.0; n * d * d],
            b: vec![0.0; n],
            r: vec![0.0; n * d * d],
            flux: vec![0.0; n * d],
            k1: vec![0.0; n * d],
            stage: vec![0.0; n * d],
            column: vec![0.0; n],
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            solver: None,
            b_solver: Vec::new(),
        }
    }

    /// `−(A w)_z + R w` with centred differences.
    fn rhs(&mut self, w: &[f64], out: &mut [f64]) {
        let (n, d) = (self.table.grid.n, self.table.dim);
        let inv2dz = 0.5 / self.table.grid.dx();
        if d == 1 {
            for i in 0..n {
                self.flux[i] = self.a[i] * w[i];
            }
            out[0] = self.r[0] * w[0] - (self.flux[1] - self.flux[n - 1]) * inv2dz;
            for i in 1..n - 1 {
                out[i] = self.r[i] * w[i] - (self.flux[i + 1] - self.flux[i - 1]) * inv2dz;
            }
            out[n - 1] = self.r[n - 1] * w[n - 1] - (self.flux[0] - self.flux[n - 2]) * inv2dz;
            return;
        }
        for i in 0..n {
            for row in 0..d {
                let blk = (i * d + row) * d;
                self.flux[i * d + row] = (0..d).map(|c| self.a[blk + c] * w[i * d + c]).sum();
                out[i * d + row] = (0..d).map(|c| self.r[blk + c] * w[i * d + c]).sum();
            }
        }
        for i in 0..n {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            for c in 0..d {
                out[i * d + c] -= (self.flux[ip * d + c] - self.flux[im * d + c]) * inv2dz;
            }
        }
    }

    /// SSP-RK3 for the advection and reaction terms.
    fn transport(&mut self, w: &mut [f64], dt: f64) {
        let mut k = std::mem::take(&mut self.k1);
        let mut s = std::mem::take(&mut self.stage);
        self.rhs(w, &mut k);
        for ((si, wi), ki) in s.iter_mut().zip(w.iter()).zip(&k) {
            *si = wi + dt * ki;
        }
        self.rhs(&s, &mut k);
        for ((si, wi), ki) in s.iter_mut().zip(w.iter()).zip(&k) {
            *si = 0.75 * wi + 0.25 * (*si + dt * ki);
        }
        self.rhs(&s, &mut k);
        for ((wi, si), ki) in w.iter_mut().zip(&s).zip(&k) {
            *wi = (*wi + 2.0 * (si + dt * ki)) / 3.0;
        }
        self.k1 = k;
        self.stage = s;
    }

    /// Crank–Nicolson step of `w_t = b w_zz` over `h`.
    fn diffuse(&mut self, w: &mut [f64], h: f64) {
        let (n, d) = (self.table.grid.n, self.table.dim);
        let dx = self.table.grid.dx();
        let theta = 0.5 * h / (dx * dx);
        let stale = match &self.solver {
            Some((h0, _)) => *h0 != h || self.b != self.b_solver,
            None => true,
        };
        if stale {
            for i in 0..n {
                self.lower[i] = -theta * self.b[i];
                self.diag[i] = 1.0 + 2.0 * theta * self.b[i];
            }
            self.solver = Some((h, CyclicTridiagonal::new(&self.lower, &self.diag, &self.lower)));
            self.b_solver.clone_from(&self.b);
        }
        let solver = &self.solver.as_ref().expect("factored above").1;
        for c in 0..d {
            for i in 0..n {
                let (ip, im) = neighbours(i, n);
                let lap = w[ip * d + c] - 2.0 * w[i * d + c] + w[im * d + c];
                self.column[i] = w[i * d + c] + theta * self.b[i] * lap;
            }
            solver.solve(&mut self.column);
            for i in 0..n {
                w[i * d + c] = self.column[i];
            }
        }
    }

    fn step(&mut self, w: &mut [f64], t: f64, dt: f64) {
        let table = self.table;
        table.load(t + 0.5 * dt, &mut self.a, &mut self.b, &mut self.r);
        self.diffuse(w, 0.5 * dt);
        self.transport(w, dt);
        self.diffuse(w, 0.5 * dt);
    }
}

/// `(∫|w|₁, ∫|w_z|₁, ∫w, total variation)` of column-vector fields.
fn measures(w: &[f64], d: usize, dx: f64) -> (f64, f64, f64, f64) {
    let n = w.len() / d;
    let (mut abs, mut grad, mut mass, mut tv) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (ip, im) = neighbours(i, n);
        for c in 0..d {
            let v = w[i * d + c];
            abs += v.abs();
            mass += v;
            grad += (w[ip * d + c] - w[im * d + c]).abs();
            tv += (w[ip * d + c] - v).abs();
        }
    }
    (abs * dx, 0.5 * grad, mass * dx, tv)
}

/// Solve `L^ε G = 0` on `[τ, t_end]` from a unit-mass Gaussian of width
/// `4Δz` at `z = y` in component `column`.
pub fn solve_green(table: &CoefficientTable, tau: f64, y: f64, column: usize, t_end: f64, opts: &GreenOptions) -> Result<GreenRun> {
    let grid = table.grid;
    let (n, d, dx) = (grid.n, table.dim, grid.dx());
    if column >= d || t_end <= tau {
        return Err(Error::Config(format!("Green's column {column} on [{tau}, {t_end}] is empty")));
    }
    let sigma = 4.0 * dx;
    let mut w = vec![0.0; n * d];
    for i in 0..n {
        let r = grid.x(i) - y;
        let r = r - grid.period * (r / grid.period).round();
        w[i * d + column] = (-0.5 * (r / sigma).powi(2)).exp();
    }
    let total: f64 = w.iter().sum::<f64>() * dx;
    w.iter_mut().for_each(|v| *v /= total);
    let t0 = sigma * sigma / (2.0 * table.epsilon);

    let snaps = opts.snapshots.max(1);
    let snap_times: Vec<f64> = linspace(tau, t_end, snaps + 1);
    let mut trajectory = Trajectory {
        grid,
        dim: d,
        epsilon: table.epsilon,
        times: vec![tau],
        fields: vec![w.clone()],
        steps: 0,
        scheme: "Strang: Crank-Nicolson diffusion, SSP-RK3 centred transport".into(),
    };
    let record = |w: &[f64], t: f64| {
        let (abs_mass, _, mass, total_variation) = measures(w, d, dx);
        GreenSample {
            t,
            mass,
            abs_mass,
            total_variation,
        }
    };
    let mut history = vec![record(&w, tau)];

    let mut stepper = GreenStepper::new(table);
    let (mut prev_abs, mut prev_grad, _, _) = measures(&w, d, dx);
    let (mut int_abs_g, mut int_abs_gz) = (0.0, 0.0);
    let mut t = tau;
    let mut next = 1;
    while next <= snaps {
        let target = snap_times[next];
        let mut dt = grid.dt.min(opts.ramp * (t - tau + t0));
        let last = t + dt >= target - 1e-12 * (1.0 + target.abs());
        if last {
            dt = target - t;
        }
        stepper.step(&mut w, t, dt);
        t = if last { target } else { t + dt };
        trajectory.steps += 1;
        let (abs, grad, _, _) = measures(&w, d, dx);
        if !abs.is_finite() || abs > opts.blowup {
            return Err(Error::Blowup(t));
        }
        int_abs_g += 0.5 * dt * (abs + prev_abs);
        int_abs_gz += 0.5 * dt * (grad + prev_grad);
        (prev_abs, prev_grad) = (abs, grad);
        if last {
            trajectory.times.push(t);
            trajectory.fields.push(w.clone());
            history.push(record(&w, t));
            next += 1;
        }
    }
    Ok(GreenRun {
        tau,
        y,
        column,
        int_abs_g,
        int_abs_gz,
        history,
        trajectory,
    })
}

/// All columns of the Green's function of `op` issued at `(τ, y)` and run
/// to `t_end`.
pub fn numerical_green(op: &dyn LinearOperator, tau: f64, y: f64, t_end: f64, opts: &GreenOptions) -> Result<Vec<GreenRun>> {
    let table = CoefficientTable::build(op, opts);
    (0..op.dim())
        .map(|c| solve_green(&table, tau, y, c, t_end, opts))
        .collect()
}

/// Closed forms for the heat operator started from a Gaussian of age `t0`:
/// `∫∫|G| = T` and `√ε ∫∫|G_z| = 2(√(T + t0) − √t0)/√π`.
pub fn heat_closed_forms(span: f64, t0: f64) -> (f64, f64) {
    (span, 2.0 * ((span + t0).sqrt() - t0.sqrt()) / PI.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenRow {
    pub eps: f64,
    pub tau: f64,
    pub y: f64,
    pub int_abs_g: f64,
    pub sqrt_eps_int_abs_gz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenReport {
    pub rows: Vec<GreenRow>,
    pub eps: Vec<f64>,
    /// Per viscosity, the sup over samples of `∫∫|G|`.
    pub sup_g: Vec<f64>,
    /// Per viscosity, the sup over samples of `√ε ∫∫|G_z|`.
    pub sup_gz: Vec<f64>,
    /// max/min of the sups across viscosities.
    pub spread_g: f64,
    pub spread_gz: f64,
    pub band: f64,
    /// Log-log slope of `sup_gz` against `ε` (0 means uniform).
    pub trend_gz: f64,
}

impl GreenReport {
    pub fn table(&self) -> String {
        let mut s = String::from("eps,tau,y,int_abs_G,sqrt_eps_int_abs_Gz\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{},{},{:.10e},{:.10e}\n", r.eps, r.tau, r.y, r.int_abs_g, r.sqrt_eps_int_abs_gz));
        }
        s
    }

    fn trend(&self) -> String {
        let mut s = String::from("eps,sup_int_abs_G,sup_sqrt_eps_int_abs_Gz\n");
        for k in 0..self.eps.len() {
            s.push_str(&format!("{:e},{:.6e},{:.6e}\n", self.eps[k], self.sup_g[k], self.sup_gz[k]));
        }
        s
    }

    pub fn check(&self) -> Result<()> {
        if self.spread_g <= self.band && self.spread_gz <= self.band {
            Ok(())
        } else {
            Err(Error::UnboundedGrowth(self.trend()))
        }
    }
}

/// Sample points: `τ_k = k T*/6` and `y` at the layer (`0, ±3ε`) and far
/// from it (`L/4, L/2, 3L/4` past the shock), in the shock-fixed frame.
pub fn default_samples(approx: &ApproxSolution) -> (Vec<f64>, Vec<f64>) {
    let t_star = approx.correctors.t_star();
    let l = approx.period();
    let eps = approx.epsilon;
    let taus = (0..6).map(|k| k as f64 * t_star / 6.0).collect();
    let ys = vec![-3.0 * eps, 0.0, 3.0 * eps, 0.25 * l, 0.5 * l, 0.75 * l];
    (taus, ys)
}

/// Sup over the samples of `∫∫|G|` and `√ε ∫∫|G_z|` on `[τ, T*]`, for each
/// approximate solution of the family; the bound holds when both vary by at
/// most `band` across it.
pub fn verify_green_bounds(family: &[ApproxSolution], band: f64, opts: &GreenOptions) -> Result<GreenReport> {
    let mut rows = Vec::new();
    let (mut eps, mut sup_g, mut sup_gz) = (Vec::new(), Vec::new(), Vec::new());
    for approx in family {
        let table = CoefficientTable::build(approx, opts);
        let t_star = approx.correctors.t_star();
        let (taus, ys) = default_samples(approx);
        let jobs: Vec<(f64, f64)> = taus.iter().flat_map(|&t| ys.iter().map(move |&y| (t, y))).collect();
        let e = approx.epsilon;
        let found: Vec<GreenRow> = jobs
            .par_iter()
            .map(|&(tau, y)| -> Result<GreenRow> {
                let mut row = GreenRow {
                    eps: e,
                    tau,
                    y,
                    int_abs_g: 0.0,
                    sqrt_eps_int_abs_gz: 0.0,
                };
                for c in 0..table.dim {
                    let run = solve_green(&table, tau, y, c, t_star, opts)?;
                    row.int_abs_g = row.int_abs_g.max(run.int_abs_g);
                    row.sqrt_eps_int_abs_gz = row.sqrt_eps_int_abs_gz.max(e.sqrt() * run.int_abs_gz);
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        eps.push(e);
        sup_g.push(found.iter().map(|r| r.int_abs_g).fold(0.0, f64::max));
        sup_gz.push(found.iter().map(|r| r.sqrt_eps_int_abs_gz).fold(0.0, f64::max));
        rows.extend(found);
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let trend_gz = if eps.len() >= 2 {
        loglog_slope(&eps, &sup_gz).slope
    } else {
        0.0
    };
    Ok(GreenReport {
        spread_g: spread(&sup_g),
        spread_gz: spread(&sup_gz),
        rows,
        eps,
        sup_g,
        sup_gz,
        band,
        trend_gz,
    })
}

/// Sanity cases of the kernel machinery and the solver, as errors:
/// relative errors of the heat closed forms, the worst delta-limit defect
/// `|∫G(τ+s, τ, z, y)ψ(z)dz − ψ(y)|` for `s = 1e-6` under a bent map, and
/// the worst centre drift of constant-speed transport (kernel and solver).
#[derive(Debug, Clone, Serialize)]
pub struct KernelChecks {
    pub heat_g: f64,
    pub heat_gz: f64,
    pub delta: f64,
    pub transport: f64,
}

impl KernelChecks {
    /// 1% on the heat forms, `1e-3` on the delta limit, `1e-6` on transport.
    pub fn pass(&self) -> bool {
        self.heat_g <= 0.01 && self.heat_gz <= 0.01 && self.delta <= 1e-3 && self.transport <= 1e-6
    }
}

pub fn kernel_checks(epsilon: f64) -> Result<KernelChecks> {
    let opts = GreenOptions::default();
    let heat = ConstantOperator {
        speed: 0.0,
        epsilon,
        rate: 0.0,
        period: 2.0,
        t_end: 1.0,
    };
    let run = &numerical_green(&heat, 0.0, 0.1, 1.0, &opts)?[0];
    let sigma = 4.0 * run.trajectory.grid.dx();
    let (g, gz) = heat_closed_forms(1.0, sigma * sigma / (2.0 * epsilon));
    let heat_g = (run.int_abs_g - g).abs() / g;
    let heat_gz = (epsilon.sqrt() * run.int_abs_gz - gz).abs() / gz;

    let a: Shift = Arc::new(|t: f64| [0.05 * t.sin(), 0.05 * t.cos(), -0.05 * t.sin()]);
    let b: Shift = Arc::new(|t: f64| [-0.08 * t, -0.08, 0.0]);
    let bent = PhiMap::new(2.0, 0.25, vec![a, b])?;
    let linear = |_: usize, _: usize, x: f64, _: f64| x;
    let k = Kernels::new(&linear, &bent, epsilon);
    let psi = |z: f64| (PI * z).sin() + 0.3 * (2.0 * PI * z).cos();
    let (tau, s) = (0.4, 1e-6);
    let width = (2.0 * epsilon * s).sqrt();
    let delta = [0.47, 0.5, 0.55, 1.2]
        .iter()
        .map(|&y| {
            let v = composite(|z| k.kernel_g(1, 1, tau + s, tau, z, y) * psi(z), y - 40.0 * width, y + 40.0 * width, 40, 10);
            (v - psi(y)).abs()
        })
        .fold(0.0, f64::max);

    let speed = 0.7;
    let still: Shift = Arc::new(|_| [0.0; 3]);
    let flat = PhiMap::new(2.0, 0.5, vec![still])?;
    let drift = move |_: usize, _: usize, _: f64, _: f64| speed;
    let k = Kernels::new(&drift, &flat, epsilon);
    let (tau, y, t) = (0.2, -0.3, 0.65);
    let target = y + speed * (t - tau);
    let half = 1.0;
    let mass = composite(|z| k.kernel_g(1, 1, t, tau, z, y), target - half, target + half, 40, 10);
    let first = composite(|z| z * k.kernel_g(1, 1, t, tau, z, y), target - half, target + half, 40, 10);
    let mut transport = (first / mass - target).abs();
    let moving = ConstantOperator {
        speed,
        epsilon,
        rate: 0.0,
        period: 2.0,
        t_end: t,
    };
    let run = &numerical_green(&moving, tau, y, t, &opts)?[0];
    let g = run.trajectory.grid;
    let last = run.trajectory.fields.last().expect("a run stores its final state");
    let centre: f64 = (0..g.n).map(|i| g.x(i) * last[i]).sum::<f64>() * g.dx();
    transport = transport.max((centre - target).abs());
    Ok(KernelChecks {
        heat_g,
        heat_gz,
        delta,
        transport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::SaintVenant;

    fn identity_map() -> PhiMap {
        PhiMap::new(2.0, 0.5, vec![Arc::new(|_| [0.0; 3]) as Shift]).unwrap()
    }

    /// Two anchors, so `φ_z ≠ 1` in the transition around `z = 0.5`.
    fn bent_map() -> PhiMap {
        let a: Shift = Arc::new(|t: f64| [0.05 * t.sin(), 0.05 * t.cos(), -0.05 * t.sin()]);
        let b: Shift = Arc::new(|t: f64| [-0.08 * t, -0.08, 0.0]);
        PhiMap::new(2.0, 0.25, vec![a, b]).unwrap()
    }

    fn mass_and_centre(k: &Kernels<'_>, t: f64, tau: f64, y: f64, centre: f64, half: f64) -> (f64, f64) {
        let m = composite(|z| k.kernel_g(1, 1, t, tau, z, y), centre - half, centre + half, 40, 10);
        let c = composite(|z| z * k.kernel_g(1, 1, t, tau, z, y), centre - half, centre + half, 40, 10);
        (m, c / m)
    }

    #[test]
    fn heat_kernel_has_unit_mass() {
        let phi = identity_map();
        let still = |_: usize, _: usize, _: f64, _: f64| 0.0;
        let k = Kernels::new(&still, &phi, 1e-2);
        let (m, c) = mass_and_centre(&k, 0.3, 0.1, 0.4, 0.4, 1.0);
        assert!((m - 1.0).abs() < 1e-10, "{m}");
        assert!((c - 0.4).abs() < 1e-10);
        assert_eq!(k.kernel_g(1, 1, 0.1, 0.1, 0.4, 0.4), 0.0);
        assert_eq!(k.kernel_g(1, 1, 0.05, 0.1, 0.4, 0.4), 0.0);
        assert!(k.kernel_g(1, 1, 0.3, 0.1, 1.9, 0.4) > 0.0);
    }

    #[test]
    fn transport_limit_moves_the_centre_at_the_constant_speed() {
        let phi = identity_map();
        let a = 0.7;
        let drift = move |_: usize, _: usize, _: f64, _: f64| a;
        let k = Kernels::new(&drift, &phi, 1e-2);
        let (tau, y, t) = (0.2, -0.3, 0.65);
        let (_, c) = mass_and_centre(&k, t, tau, y, y + a * (t - tau), 1.0);
        assert!((c - (y + a * (t - tau))).abs() < 1e-8, "{c}");
        assert_eq!(k.kernel_error(1, 1, t, tau, 0.1, y), 0.0);
    }

    #[test]
    fn delta_limit_recovers_the_test_function() {
        let phi = bent_map();
        let linear = |_: usize, _: usize, x: f64, _: f64| x;
        let eps = 1e-2;
        let k = Kernels::new(&linear, &phi, eps);
        let psi = |z: f64| (PI * z).sin() + 0.3 * (2.0 * PI * z).cos();
        let (tau, s) = (0.4, 1e-6);
        for y in [0.47, 0.5, 0.55, 1.2] {
            let width = (2.0 * eps * s).sqrt();
            let v = composite(|z| k.kernel_g(1, 1, tau + s, tau, z, y) * psi(z), y - 40.0 * width, y + 40.0 * width, 40, 10);
            assert!((v - psi(y)).abs() <= 1e-3, "y = {y}: {v} vs {}", psi(y));
        }
    }

    #[test]
    fn error_formula_matches_the_operator() {
        let phi = bent_map();
        let bent = |_: usize, _: usize, x: f64, t: f64| 0.4 * x + 0.3 * (2.0 * x).sin() + 0.1 * t;
        let eps = 1e-2;
        let k = Kernels::new(&bent, &phi, eps);
        let (tau, y, t) = (0.3, 0.5, 0.31);
        let chi = k.curve(1, 1, tau, y).at(t).unwrap();
        let zc = phi.invert(chi, t);
        assert!((phi.eval(zc, t).z - 1.0).abs() > 1e-3, "test point must see φ_z ≠ 1");
        assert!(k.kernel_error(1, 1, t, tau, zc, y).abs() < 1e-12);
        let width = (2.0 * eps * (t - tau)).sqrt();
        for off in [-1.5, -0.7, 0.4, 1.1, 2.0] {
            let z = zc + off * width;
            let formula = k.kernel_error(1, 1, t, tau, z, y);
            let direct = k.apply_operator(1, 1, t, tau, z, y, 1e-5 * (t - tau), 1e-3 * width);
            assert!((formula - direct).abs() <= 1e-4 * formula.abs(), "offset {off}: {formula} vs {direct}");
        }
    }

    #[test]
    fn curve_follows_its_speed() {
        let linear = |_: usize, _: usize, x: f64, _: f64| x;
        let c = CharCurve::new(&linear, 1, 1, 0.5, 0.2);
        assert_eq!(c.at(0.5).unwrap(), 0.2);
        assert!((c.at(1.5).unwrap() - 0.2 * 1f64.exp()).abs() < 1e-10);
        assert!((c.speed(1.0).unwrap() - 0.2 * 0.5f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn frozen_speeds_are_constant_outside_the_segment() {
        let rw = crate::system::build_sawtooth_rollwave(2.0, 0.5);
        let t = 0.3;
        let x1 = rw.shock_position(1, t);
        let left = rw.lambda(1, 1, x1 - 0.7, t);
        assert_eq!(left, rw.lambda(1, 1, x1 - 3.0, t));
        assert!((left - (0.5 - 1.0)).abs() < 1e-14);
        let right = rw.lambda(1, 1, x1 + 2.4, t);
        assert_eq!(right, rw.lambda(1, 1, x1 + 9.0, t));
        assert!((right - (0.5 + 1.0)).abs() < 1e-14);
        assert!((rw.lambda(1, 1, x1 + 0.5, t) - 0.0).abs() < 1e-14);
    }

    #[test]
    fn linear_speed_error_mass_equals_the_span() {
        // |λ(x) − λ(χ)| |G_x| integrates to Var/(2εs) = 1 at every time.
        let phi = identity_map();
        let linear = |_: usize, _: usize, x: f64, _: f64| x;
        let k = Kernels::new(&linear, &phi, 1e-2);
        let m = k.error_mass(1, 1, 0.1, 0.3, 0.1).unwrap();
        assert!((m - 0.1).abs() < 1e-6, "{m}");
    }

    #[test]
    fn projections_are_complete_and_idempotent() {
        let sv = HyperbolicSystem::new(SaintVenant {
            g_cos: 1.0,
            g_sin: 0.1,
            c_f: 0.01,
        });
        let u = DVector::from_vec(vec![1.1, 0.9]);
        for k in 1..=2 {
            let p = ProjectionSet::new(&sv, &u, k).unwrap();
            assert!(p.defect() < 1e-10, "k = {k}: {}", p.defect());
            assert_eq!(p.d_plus_in.trace(), k as f64);
            assert_eq!(p.d_minus_in.trace(), (k - 1) as f64);
        }
        let rw = crate::system::build_sawtooth_rollwave(2.0, 0.0);
        let p = ProjectionSet::at(&rw, &identity_map(), 0.2, 0.7).unwrap();
        assert_eq!(p.plus_in()[(0, 0)], 1.0);
        assert_eq!(p.minus_in()[(0, 0)], 0.0);
        assert!(p.defect() == 0.0);
        assert!(ProjectionSet::new(&sv, &u, 3).is_err());
    }

    #[test]
    fn heat_operator_matches_closed_forms() {
        let eps = 1e-2;
        let op = ConstantOperator {
            speed: 0.0,
            epsilon: eps,
            rate: 0.0,
            period: 2.0,
            t_end: 1.0,
        };
        let opts = GreenOptions::default();
        let runs = numerical_green(&op, 0.0, 0.1, 1.0, &opts).unwrap();
        let run = &runs[0];
        let sigma = 4.0 * run.trajectory.grid.dx();
        let (g, gz) = heat_closed_forms(1.0, sigma * sigma / (2.0 * eps));
        assert!((run.int_abs_g - g).abs() <= 0.01 * g, "{} vs {g}", run.int_abs_g);
        let measured = eps.sqrt() * run.int_abs_gz;
        assert!((measured - gz).abs() <= 0.01 * gz, "{measured} vs {gz}");
        for h in &run.history {
            assert!((h.mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_checks_pass() {
        let c = kernel_checks(1e-2).unwrap();
        assert!(c.pass(), "{c:?}");
    }

    #[test]
    fn conservative_transport_keeps_its_mass() {
        let op = ConstantOperator {
            speed: 0.8,
            epsilon: 1e-2,
            rate: 0.0,
            period: 2.0,
            t_end: 0.5,
        };
        let runs = numerical_green(&op, 0.2, -0.4, 0.5, &GreenOptions::default()).unwrap();
        let run = &runs[0];
        assert_eq!(run.trajectory.times.first(), Some(&0.2));
        for h in &run.history {
            assert!((h.mass - 1.0).abs() < 1e-12);
            assert!((h.abs_mass - 1.0).abs() < 1e-3);
        }
        // The pulse centre moves with the speed.
        let last = run.trajectory.fields.last().unwrap();
        let g = run.trajectory.grid;
        let centre: f64 = (0..g.n).map(|i| g.x(i) * last[i]).sum::<f64>() * g.dx();
        assert!((centre - (-0.4 + 0.8 * 0.3)).abs() < 1e-6, "{centre}");
    }
}

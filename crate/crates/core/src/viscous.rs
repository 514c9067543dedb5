//! Resolved finite-volume solver for `u_t + f(u)_x = g(u) + ε u_xx` on a
//! periodic interval, and the convergence harness that compares its output
//! with the inviscid roll-wave and the approximate solution.
//!
//! One step is Strang-split: half a Crank–Nicolson diffusion step, a full
//! SSP-RK2 step of MUSCL/minmod reconstruction with local Lax–Friedrichs
//! fluxes plus the source, and another half diffusion step.

use crate::assembly::ApproxSolution;
use crate::error::{Error, Result};
use crate::numerics::cyclic::CyclicTridiagonal;
use crate::numerics::fit::loglog_slope;
use crate::system::{HyperbolicSystem, RollWave};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Uniform periodic grid of `n` cells on `[origin, origin + period)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Grid {
    pub n: usize,
    pub period: f64,
    pub origin: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(n: usize, period: f64, origin: f64, dt: f64) -> Self {
        assert!(n >= 4 && period > 0.0 && dt > 0.0, "degenerate grid");
        Self { n, period, origin, dt }
    }

    /// Grid with `Δx ≤ ε/8` (times `refine`) and a time step at 90% of
    /// `cfl` for waves of speed up to `max_speed`.
    pub fn resolved(epsilon: f64, period: f64, origin: f64, max_speed: f64, cfl: f64, refine: usize) -> Self {
        let n = ((8.0 * period / epsilon).ceil() as usize).max(16) * refine.max(1);
        let dx = period / n as f64;
        Self::new(n, period, origin, 0.9 * cfl * dx / max_speed.max(1e-12))
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Centre of cell `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.dx()
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn is_resolved(&self, epsilon: f64) -> bool {
        self.dx() <= epsilon / 8.0 * (1.0 + 1e-12)
    }
}

/// Snapshots of a viscous run at uniform times; fields are cell-major
/// (`field[i * dim + c]`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub dim: usize,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
    pub steps: usize,
    pub scheme: String,
}

impl Trajectory {
    pub fn cell(&self, k: usize, i: usize) -> &[f64] {
        &self.fields[k][i * self.dim..(i + 1) * self.dim]
    }

    /// Binary dump: one JSON header line, then every snapshot as
    /// little-endian `f64` rows.
    pub fn export_binary(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header = serde_json::json!({
            "N": self.grid.n,
            "L": self.grid.period,
            "origin": self.grid.origin,
            "n": self.dim,
            "epsilon": self.epsilon,
            "times": self.times,
        });
        writeln!(out, "{header}")?;
        for f in &self.fields {
            for v in f {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ViscousOptions {
    /// Stored snapshots after the initial one.
    pub snapshots: usize,
    pub cfl_limit: f64,
    pub blowup: f64,
    /// Multiplies the minimal cell count `8L/ε`.
    pub refine: usize,
}

impl Default for ViscousOptions {
    fn default() -> Self {
        Self {
            snapshots: 100,
            cfl_limit: 0.4,
            blowup: 1e8,
            refine: 1,
        }
    }
}

/// Exact-to-quadrature cell averages of `f`, splitting cells at `breaks`
/// (positions of discontinuities, taken modulo the period).
pub fn cell_averages(grid: &Grid, dim: usize, breaks: &[f64], f: impl Fn(f64) -> DVector<f64>) -> Vec<f64> {
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let dx = grid.dx();
    let mut out = vec![0.0; grid.n * dim];
    for i in 0..grid.n {
        let a = grid.origin + i as f64 * dx;
        let b = a + dx;
        let mut cuts = vec![a];
        for &s in breaks {
            let k = ((a - s) / grid.period).ceil();
            let p = s + k * grid.period;
            if p > a && p < b {
                cuts.push(p);
            }
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let acc = &mut out[i * dim..(i + 1) * dim];
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for (x, wt) in X.iter().zip(W) {
                let v = f(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
                for c in 0..dim {
                    acc[c] += v[c] * wt * 0.5 * (hi - lo) / dx;
                }
            }
        }
    }
    out
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

struct Stepper<'a> {
    system: &'a HyperbolicSystem,
    n: usize,
    dim: usize,
    dx: f64,
    diffusion: Option<(CyclicTridiagonal, f64)>,
    flux: Vec<f64>,
    scratch: Vec<f64>,
}

impl Stepper<'_> {
    /// `−(F_{i+1/2} − F_{i−1/2})/Δx + g(u_i)`; returns the largest face speed.
    fn rhs(&mut self, u: &[f64], out: &mut [f64]) -> f64 {
        let (n, d) = (self.n, self.dim);
        let law = self.system.law();
        let idx = |i: isize| (i.rem_euclid(n as isize) as usize) * d;
        let mut amax = 0.0f64;
        let mut ul = vec![0.0; d];
        let mut ur = vec![0.0; d];
        let mut fl = vec![0.0; d];
        let mut fr = vec![0.0; d];
        for face in 0..n {
            // Face between cells `face` and `face + 1`.
            let (i, j) = (face as isize, face as isize + 1);
            for c in 0..d {
                let (im, i0, ip) = (u[idx(i - 1) + c], u[idx(i) + c], u[idx(i + 1) + c]);
                let (jm, j0, jp) = (i0, ip, u[idx(j + 1) + c]);
                ul[c] = i0 + 0.5 * minmod(i0 - im, ip - i0);
                ur[c] = j0 - 0.5 * minmod(j0 - jm, jp - j0);
            }
            law.flux(&ul, &mut fl);
            law.flux(&ur, &mut fr);
            let a = self.system.max_speed(&ul).max(self.system.max_speed(&ur));
            amax = amax.max(a);
            for c in 0..d {
                self.flux[face * d + c] = 0.5 * (fl[c] + fr[c]) - 0.5 * a * (ur[c] - ul[c]);
            }
        }
        for i in 0..n {
            let prev = (i + n - 1) % n;
            law.source(&u[i * d..(i + 1) * d], &mut fl);
            for c in 0..d {
                out[i * d + c] = -(self.flux[i * d + c] - self.flux[prev * d + c]) / self.dx + fl[c];
            }
        }
        amax
    }

    /// One SSP-RK2 step of the hyperbolic part and the source.
    fn transport(&mut self, u: &mut [f64], dt: f64) -> f64 {
        let len = u.len();
        let mut k = vec![0.0; len];
        let a1 = self.rhs(u, &mut k);
        let mut u1: Vec<f64> = u.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
        let a2 = self.rhs(&u1, &mut k);
        for ((ui, u1i), ki) in u.iter_mut().zip(&mut u1).zip(&k) {
            *ui = 0.5 * *ui + 0.5 * (*u1i + dt * ki);
        }
        a1.max(a2)
    }

    /// Crank–Nicolson step of `u_t = ε u_xx` over the half step the solver
    /// was set up with.
    fn diffuse(&mut self, u: &mut [f64]) {
        let Some((solver, r)) = &self.diffusion else {
            return;
        };
        let (n, d) = (self.n, self.dim);
        for c in 0..d {
            for i in 0..n {
                let (l, m, p) = (u[((i + n - 1) % n) * d + c], u[i * d + c], u[((i + 1) % n) * d + c]);
                self.scratch[i] = m + 0.5 * r * (l - 2.0 * m + p);
            }
            solver.solve(&mut self.scratch);
            for i in 0..n {
                u[i * d + c] = self.scratch[i];
            }
        }
    }
}

/// Advance `u0` (cell-major cell averages) to `t_end`, storing
/// `opts.snapshots + 1` uniform snapshots including `t = 0`.
pub fn solve_viscous(
    system: &HyperbolicSystem,
    epsilon: f64,
    u0: &[f64],
    t_end: f64,
    grid: &Grid,
    opts: &ViscousOptions,
) -> Result<Trajectory> {
    let dim = system.n();
    if u0.len() != grid.n * dim {
        return Err(Error::Config(format!("initial data has {} values, grid needs {}", u0.len(), grid.n * dim)));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Blowup(0.0));
    }
    let snaps = opts.snapshots.max(1);
    let per_snap = (t_end / (grid.dt * snaps as f64)).ceil().max(1.0) as usize;
    let steps = per_snap * snaps;
    let dt = t_end / steps as f64;
    let dx = grid.dx();
    let r = epsilon * 0.5 * dt / (dx * dx);
    let diffusion = (epsilon > 0.0).then(|| (CyclicTridiagonal::symmetric(grid.n, -0.5 * r, 1.0 + r), r));
    let mut stepper = Stepper {
        system,
        n: grid.n,
        dim,
        dx,
        diffusion,
        flux: vec![0.0; grid.n * dim],
        scratch: vec![0.0; grid.n],
    };
    let mut u = u0.to_vec();
    let mut times = vec![0.0];
    let mut fields = vec![u.clone()];
    for step in 1..=steps {
        stepper.diffuse(&mut u);
        let speed = stepper.transport(&mut u, dt);
        stepper.diffuse(&mut u);
        let cfl = speed * dt / dx;
        if cfl > opts.cfl_limit {
            return Err(Error::CflViolation(cfl));
        }
        let t = step as f64 * dt;
        if u.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup) {
            return Err(Error::Blowup(t));
        }
        if step % per_snap == 0 {
            times.push(t);
            fields.push(u.clone());
        }
    }
    Ok(Trajectory {
        grid: *grid,
        dim,
        epsilon,
        times,
        fields,
        steps,
        scheme: "Strang(CN/2, SSP-RK2 MUSCL-minmod LLF + source, CN/2)".into(),
    })
}

/// Something the viscous solution is compared with.
pub trait Reference: Sync {
    /// Values at the points `xs` and time `t`.
    fn values(&self, t: f64, xs: &[f64]) -> Vec<DVector<f64>>;
    /// Shock positions at `t`, excluded from the away-from-shock norm.
    fn shocks(&self, t: f64) -> Vec<f64>;
}

impl Reference for RollWave {
    fn values(&self, t: f64, xs: &[f64]) -> Vec<DVector<f64>> {
        xs.iter().map(|&x| self.field(x, t)).collect()
    }

    fn shocks(&self, t: f64) -> Vec<f64> {
        (1..=self.m).map(|j| self.shock_position(j, t)).collect()
    }
}

impl Reference for ApproxSolution {
    fn values(&self, t: f64, xs: &[f64]) -> Vec<DVector<f64>> {
        let frame = self.at(t);
        xs.par_iter().map(|&x| frame.value(x)).collect()
    }

    fn shocks(&self, t: f64) -> Vec<f64> {
        let rw = &self.correctors.rollwave;
        (1..=rw.m).map(|j| rw.shock_position(j, t)).collect()
    }
}

impl Reference for Trajectory {
    /// Periodic linear interpolation in the stored snapshot nearest to `t`.
    fn values(&self, t: f64, xs: &[f64]) -> Vec<DVector<f64>> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map_or(0, |(k, _)| k);
        let g = &self.grid;
        xs.iter()
            .map(|&x| {
                let mut s = ((x - g.origin) / g.dx() - 0.5).rem_euclid(g.n as f64);
                if (s - s.round()).abs() < 1e-9 {
                    s = s.round() % g.n as f64;
                }
                let i = (s.floor() as usize).min(g.n - 1);
                let w = s - i as f64;
                let (a, b) = (self.cell(k, i), self.cell(k, (i + 1) % g.n));
                DVector::from_iterator(self.dim, a.iter().zip(b).map(|(a, b)| (1.0 - w) * a + w * b))
            })
            .collect()
    }

    fn shocks(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// `L^∞(L¹)`, full sup and away-from-shock sup of `u^ε − reference` over
/// the stored snapshots.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorNorms {
    pub linf_l1: f64,
    pub sup: f64,
    pub away_sup: f64,
}

/// Errors against `reference` at cell centres. The away-from-shock sup
/// skips cells within `ε^η` of a shock (periodic distance).
pub fn error_norms(traj: &Trajectory, reference: &dyn Reference, eta: f64) -> ErrorNorms {
    let g = &traj.grid;
    let xs = g.centres();
    let exclusion = traj.epsilon.powf(eta);
    let mut out = ErrorNorms {
        linf_l1: 0.0,
        sup: 0.0,
        away_sup: 0.0,
    };
    for (k, &t) in traj.times.iter().enumerate() {
        let refs = reference.values(t, &xs);
        let shocks = reference.shocks(t);
        let mut l1 = 0.0;
        for (i, r) in refs.iter().enumerate() {
            let e = traj.cell(k, i).iter().zip(r.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            l1 += e * g.dx();
            out.sup = out.sup.max(e);
            let near = shocks.iter().any(|s| {
                let d = (xs[i] - s).rem_euclid(g.period);
                d.min(g.period - d) < exclusion
            });
            if !near {
                out.away_sup = out.away_sup.max(e);
            }
        }
        out.linf_l1 = out.linf_l1.max(l1);
    }
    out
}

/// Position of the steepest cell-to-cell jump of the first component in
/// snapshot `k`.
pub fn steepest_point(traj: &Trajectory, k: usize) -> f64 {
    let g = &traj.grid;
    let (mut best, mut at) = (0.0, g.x(0));
    for i in 0..g.n {
        let j = (i + 1) % g.n;
        let jump = (traj.cell(k, j)[0] - traj.cell(k, i)[0]).abs();
        if jump > best {
            best = jump;
            at = g.x(i) + 0.5 * g.dx();
        }
    }
    at
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub cells: usize,
    pub steps: usize,
    /// `‖u^ε − u‖_{L^∞(L¹)}`.
    pub inviscid_l1: f64,
    /// `‖u^ε − u_app^ε‖_{L^∞(L¹)}`.
    pub app_l1: f64,
    /// `‖u^ε − u_app^ε‖_{L^∞}`.
    pub app_sup: f64,
    /// `sup_{|x − X(t)| ≥ ε^η} |u^ε − u|`.
    pub away_sup: f64,
    /// Largest distance of the steepest point from the shock.
    pub layer_offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub eta: f64,
    pub rows: Vec<ConvergenceRow>,
    pub monotone: [bool; 4],
    pub away_ratio: f64,
    pub app_l1_slope: f64,
    /// `u_app^ε` is closer than `u` at the smallest `ε`.
    pub app_closer: bool,
}

impl ConvergenceReport {
    pub fn table(&self) -> String {
        let mut s = String::from("eps,cells,steps,inviscid_l1,app_l1,app_sup,away_sup,layer_offset\n");
        for r in &self.rows {
            s += &format!(
                "{:e},{},{},{:e},{:e},{:e},{:e},{:e}\n",
                r.eps, r.cells, r.steps, r.inviscid_l1, r.app_l1, r.app_sup, r.away_sup, r.layer_offset
            );
        }
        s
    }

    /// All four columns strictly decrease and the approximate solution is
    /// closer than the inviscid one at the smallest `ε`.
    pub fn check(&self) -> Result<()> {
        if self.monotone.iter().all(|m| *m) && self.app_closer {
            Ok(())
        } else {
            Err(Error::NonMonotone(self.table()))
        }
    }
}

/// Run the resolved viscous problem for each `ε` and tabulate its distance
/// to `u` and to `u_app^ε`. The comparison with `u` starts from `u(·, 0)`;
/// the comparison with `u_app^ε` starts from `u_app^ε(·, 0)`, so that the
/// difference vanishes initially. `build` returns the approximate solution
/// for one `ε`.
pub fn convergence_study<F>(rw: &RollWave, eps_list: &[f64], eta: f64, opts: &ViscousOptions, build: F) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<ApproxSolution> + Sync,
{
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps_list must be strictly decreasing with at least two entries".into()));
    }
    let rows: Result<Vec<ConvergenceRow>> = eps_list
        .par_iter()
        .map(|&eps| {
            let approx = build(eps)?;
            let traj = run_resolved(rw, eps, opts, Start::Inviscid)?;
            let inviscid = error_norms(&traj, rw, eta);
            let layer_offset = (0..traj.times.len())
                .map(|k| {
                    let d = (steepest_point(&traj, k) - rw.shock_position(1, traj.times[k])).rem_euclid(rw.period);
                    d.min(rw.period - d)
                })
                .fold(0.0, f64::max);
            let from_app = run_resolved(rw, eps, opts, Start::Approx(&approx))?;
            let app = error_norms(&from_app, &approx, eta);
            Ok(ConvergenceRow {
                eps,
                cells: traj.grid.n,
                steps: traj.steps,
                inviscid_l1: inviscid.linf_l1,
                app_l1: app.linf_l1,
                app_sup: app.sup,
                away_sup: inviscid.away_sup,
                layer_offset,
            })
        })
        .collect();
    let rows = rows?;
    let decreasing = |f: &dyn Fn(&ConvergenceRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let monotone = [
        decreasing(&|r| r.inviscid_l1),
        decreasing(&|r| r.app_l1),
        decreasing(&|r| r.app_sup),
        decreasing(&|r| r.away_sup),
    ];
    let last = &rows[rows.len() - 1];
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let app: Vec<f64> = rows.iter().map(|r| r.app_l1).collect();
    Ok(ConvergenceReport {
        eta,
        away_ratio: last.away_sup / rows[0].away_sup,
        app_l1_slope: loglog_slope(&eps, &app).slope,
        app_closer: last.app_l1 <= last.inviscid_l1,
        monotone,
        rows,
    })
}

/// Initial data of a resolved run.
#[derive(Clone, Copy)]
pub enum Start<'a> {
    /// Cell averages of `u(·, 0)`.
    Inviscid,
    /// Cell averages of `u_app^ε(·, 0)`.
    Approx(&'a ApproxSolution),
}

/// Resolved run over `[0, T*]` on a grid with `Δx ≤ ε/8`.
pub fn run_resolved(rw: &RollWave, epsilon: f64, opts: &ViscousOptions, start: Start<'_>) -> Result<Trajectory> {
    let n = rw.system.n();
    let probe: Vec<f64> = (0..400)
        .flat_map(|i| rw.field(rw.period * (i as f64 + 0.5) / 400.0, 0.0).iter().copied().collect::<Vec<_>>())
        .collect();
    let speed = probe.chunks(n).map(|u| rw.system.max_speed(u)).fold(0.0, f64::max);
    // Margin for the layer overshooting the inviscid range.
    let grid = Grid::resolved(epsilon, rw.period, 0.0, 1.25 * speed, opts.cfl_limit, opts.refine);
    let u0 = match start {
        Start::Inviscid => {
            let shocks: Vec<f64> = (1..=rw.m).map(|j| rw.shock_position(j, 0.0)).collect();
            cell_averages(&grid, n, &shocks, |x| rw.field(x, 0.0))
        }
        Start::Approx(a) => {
            let frame = a.at(0.0);
            cell_averages(&grid, n, &[], |x| frame.value(x))
        }
    };
    solve_viscous(&rw.system, epsilon, &u0, rw.t_star, &grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_sawtooth_rollwave, Burgers, LinearScalar};

    #[test]
    fn cell_averages_of_a_sawtooth_are_exact() {
        let g = Grid::new(10, 2.0, 0.0, 0.01);
        let saw = |x: f64| DVector::from_element(1, x.rem_euclid(2.0) - 1.0);
        let avg = cell_averages(&g, 1, &[0.0, 0.93], saw);
        for i in 0..10 {
            assert!((avg[i] - (g.x(i) - 1.0)).abs() < 1e-14);
        }
        // A cell split by the jump.
        let g = Grid::new(10, 2.0, -0.1, 0.01);
        let avg = cell_averages(&g, 1, &[0.0], saw);
        assert!(avg[0].abs() < 1e-14);
    }

    #[test]
    fn heat_mode_decays_at_the_fourier_rate() {
        let sys = HyperbolicSystem::new(LinearScalar { speed: 0.0, rate: 0.0 });
        let period = 2.0 * std::f64::consts::PI;
        let grid = Grid::new(512, period, 0.0, 1e-3);
        let k = 3.0;
        let u0: Vec<f64> = grid.centres().iter().map(|x| (k * x).sin()).collect();
        let traj = solve_viscous(&sys, 1.0, &u0, 0.1, &grid, &ViscousOptions { snapshots: 4, ..Default::default() }).unwrap();
        let last = traj.fields.last().unwrap();
        let decay = (-k * k * 0.1f64).exp();
        for (i, x) in grid.centres().iter().enumerate() {
            let exact = decay * (k * x).sin();
            assert!((last[i] - exact).abs() <= 0.01 * decay, "{} vs {exact}", last[i]);
        }
    }

    /// `‖u_N − u_2N‖_{L¹}` with the fine solution averaged onto the coarse cells.
    fn refinement_gap(coarse: &[f64], fine: &[f64], dx: f64) -> f64 {
        coarse.iter().enumerate().map(|(i, c)| (c - 0.5 * (fine[2 * i] + fine[2 * i + 1])).abs() * dx).sum()
    }

    #[test]
    fn second_order_self_convergence() {
        let sys = HyperbolicSystem::new(Burgers { rate: 1.0, offset: 0.0 });
        let pi2 = 2.0 * std::f64::consts::PI;
        let run = |n: usize| {
            let grid = Grid::new(n, 1.0, 0.0, 0.2 / n as f64);
            let u0 = cell_averages(&grid, 1, &[], |x| DVector::from_element(1, 0.5 * (pi2 * x).sin() + 0.2));
            let opts = ViscousOptions { snapshots: 1, ..Default::default() };
            solve_viscous(&sys, 0.02, &u0, 0.3, &grid, &opts).unwrap().fields.pop().unwrap()
        };
        let (a, b, c) = (run(100), run(200), run(400));
        let ratio = refinement_gap(&a, &b, 0.01) / refinement_gap(&b, &c, 0.005);
        assert!(ratio >= 3.5, "ratio {ratio}");
    }

    #[test]
    fn conservative_without_source() {
        let sys = HyperbolicSystem::new(Burgers { rate: 0.0, offset: 0.0 });
        let grid = Grid::new(200, 1.0, 0.0, 2e-3);
        let u0: Vec<f64> = grid.centres().iter().map(|x| 0.5 + (6.0 * x).sin().signum() * 0.3).collect();
        let traj = solve_viscous(&sys, 1e-3, &u0, 0.2, &grid, &ViscousOptions { snapshots: 20, ..Default::default() }).unwrap();
        let m0: f64 = traj.fields[0].iter().sum();
        for f in &traj.fields {
            let m: f64 = f.iter().sum();
            assert!((m - m0).abs() * grid.dx() < 1e-10 * traj.fields.len() as f64);
        }
        assert_eq!(traj.times.len(), 21);
    }

    #[test]
    fn reference_is_itself() {
        let rw = build_sawtooth_rollwave(2.0, 0.0);
        let traj = run_resolved(&rw, 5e-2, &ViscousOptions { snapshots: 5, ..Default::default() }, Start::Inviscid).unwrap();
        let e = error_norms(&traj, &traj, 0.5);
        assert_eq!((e.linf_l1, e.sup, e.away_sup), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cfl_and_blowup_are_reported() {
        let sys = HyperbolicSystem::new(Burgers { rate: 0.0, offset: 0.0 });
        let grid = Grid::new(64, 1.0, 0.0, 0.1);
        let u0 = vec![1.0; 64];
        let e = solve_viscous(&sys, 0.0, &u0, 1.0, &grid, &ViscousOptions::default()).unwrap_err();
        assert!(matches!(e, Error::CflViolation(_)));
        let grow = HyperbolicSystem::new(LinearScalar { speed: 0.0, rate: 50.0 });
        let grid = Grid::new(64, 1.0, 0.0, 1e-3);
        let e = solve_viscous(&grow, 0.0, &u0, 1.0, &grid, &ViscousOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Blowup(_)));
    }
}

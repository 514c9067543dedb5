//! Viscous shock profiles: heteroclinic orbits of `V' = f(V) − sV − (f(u⁻) − s u⁻)`
//! connecting `u⁻` at `ξ = −∞` to `u⁺` at `ξ = +∞`.

use crate::error::{Error, Result};
use crate::numerics::fit::fit_line;
use crate::numerics::hermite::HermiteGrid;
use crate::numerics::ode::{Control, Dopri5};
use crate::system::{eigen_decompose, HyperbolicSystem};
use nalgebra::{DMatrix, DVector};
use std::path::Path;

/// Options for [`solve_profile_with`].
#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Truncation half-width; `None` picks `max(40, 30/ω_lin)`.
    pub xi_max: Option<f64>,
    pub step: f64,
    /// Fraction θ of the first-component jump reached at `ξ = 0`.
    pub phase: f64,
    pub offset: f64,
    pub tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            xi_max: None,
            step: 0.01,
            phase: 0.5,
            offset: 1e-6,
            tol: 1e-12,
        }
    }
}

/// Relative distance to `u⁺` below which the orbit is continued linearly.
const LINEAR_REGIME: f64 = 1e-8;

/// Exponential modes used beyond the truncation boundary on one side.
#[derive(Debug, Clone)]
struct Tail {
    rates: Vec<f64>,
    p: DMatrix<f64>,
    coeffs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct ShockProfile {
    pub system: HyperbolicSystem,
    pub j: usize,
    pub t: f64,
    pub u_minus: DVector<f64>,
    pub u_plus: DVector<f64>,
    pub speed: f64,
    pub xi_max: f64,
    /// Measured exponential decay rate and prefactor.
    pub omega: f64,
    pub decay_const: f64,
    grid: HermiteGrid,
    flux_minus: DVector<f64>,
    tails: [Tail; 2],
}

impl ShockProfile {
    /// `F(V) = f(V) − sV − (f(u⁻) − s u⁻)`, so that `V' = F(V)`.
    pub fn rhs(&self, v: &DVector<f64>) -> DVector<f64> {
        self.system.f(v) - v * self.speed - &self.flux_minus
    }

    /// `df(V) − s`.
    pub fn a_tilde(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = v.len();
        self.system.df(v) - DMatrix::identity(n, n) * self.speed
    }

    pub fn n(&self) -> usize {
        self.u_minus.len()
    }

    pub fn grid(&self) -> &HermiteGrid {
        &self.grid
    }

    /// Profile value, with exponential continuation outside `[−Ξ, Ξ]`.
    pub fn value(&self, xi: f64) -> DVector<f64> {
        if xi.abs() <= self.xi_max {
            return DVector::from_vec(self.grid.value(xi));
        }
        let (tail, base, x0) = if xi > 0.0 {
            (&self.tails[1], &self.u_plus, self.xi_max)
        } else {
            (&self.tails[0], &self.u_minus, -self.xi_max)
        };
        let mut c = tail.coeffs.clone();
        for (i, r) in tail.rates.iter().enumerate() {
            c[i] *= (r * (xi - x0)).exp();
        }
        base + &tail.p * c
    }

    /// `(V, V_ξ, V_ξξ)`, with derivatives taken from the ODE itself.
    pub fn eval(&self, xi: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let v = self.value(xi);
        let d1 = self.rhs(&v);
        let d2 = self.a_tilde(&v) * &d1;
        (v, d1, d2)
    }

    /// Sup of `|V_ξ − F(V)|` with `V_ξ` from the interpolant.
    pub fn first_integral_residual(&self) -> f64 {
        let n = self.n();
        let mut out = vec![0.0; 3 * n];
        let mut worst = 0.0f64;
        let m = self.grid.nodes();
        for i in 0..m - 1 {
            let xi = self.grid.node(i) + 0.5 * self.grid.h;
            self.grid.eval_into(xi, &mut out);
            let v = DVector::from_column_slice(&out[..n]);
            let f = self.rhs(&v);
            for c in 0..n {
                worst = worst.max((out[n + c] - f[c]).abs());
            }
        }
        worst
    }

    /// Profile CSV `(ξ, V_1..V_n, V_ξ_1..V_ξ_n)` on the stored grid.
    pub fn csv(&self) -> String {
        let n = self.n();
        let v: Vec<String> = (1..=n).map(|i| format!("V_{i}")).collect();
        let d: Vec<String> = (1..=n).map(|i| format!("V_xi_{i}")).collect();
        let mut s = format!("xi,{},{}\n", v.join(","), d.join(","));
        for i in 0..self.grid.nodes() {
            let x = self.grid.node(i);
            let (v, d1, _) = self.eval(x);
            let vs: Vec<String> = v.iter().chain(d1.iter()).map(|a| format!("{a:.15e}")).collect();
            s += &format!("{x:.6},{}\n", vs.join(","));
        }
        s
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv())?;
        Ok(())
    }
}

/// Solve with default options (phase at the midpoint of the first component).
pub fn solve_profile(
    system: &HyperbolicSystem,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    s: f64,
    t: f64,
) -> Result<ShockProfile> {
    solve_profile_with(system, u_minus, u_plus, s, t, &ProfileOptions::default())
}

pub fn solve_profile_with(
    system: &HyperbolicSystem,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    s: f64,
    t: f64,
    opts: &ProfileOptions,
) -> Result<ShockProfile> {
    let n = system.n();
    let jump = u_plus - u_minus;
    if jump.norm() < 1e-12 {
        return Err(Error::NoConnection("endpoint states coincide".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let am = eigen_decompose(system, u_minus)?;
    let ap = eigen_decompose(system, u_plus)?;
    let rates_m: Vec<f64> = am.lambdas.iter().map(|l| l - s).collect();
    let rates_p: Vec<f64> = ap.lambdas.iter().map(|l| l - s).collect();
    let unstable: Vec<usize> = (0..n).filter(|&i| rates_m[i] > 0.0).collect();
    if unstable.len() != 1 {
        return Err(Error::NoConnection(format!(
            "unstable manifold of u- has dimension {} (shooting needs 1)",
            unstable.len()
        )));
    }
    let iu = unstable[0];
    let a_lin = rates_m[iu];
    let slow_p = rates_p
        .iter()
        .filter(|r| **r < 0.0)
        .fold(f64::INFINITY, |m, r| m.min(-r));
    let xi_max = opts.xi_max.unwrap_or_else(|| 40f64.max(30.0 / a_lin.min(slow_p)));
    let mut r = am.r(iu);
    if r.dot(&jump) < 0.0 {
        r = -r;
    }
    let flux_minus = system.f(u_minus) - u_minus * s;
    // The state is the deviation w = V − u⁻, so that relative tolerances
    // stay meaningful while the orbit is still close to u⁻.
    let sys = system.clone();
    let base = u_minus.clone();
    let rhs = move |_x: f64, y: &[f64], d: &mut [f64]| {
        let v = &base + DVector::from_column_slice(y);
        let f = sys.f(&v) - &v * s - &flux_minus;
        d.copy_from_slice(f.as_slice());
    };
    let ode = Dopri5 {
        rtol: opts.tol,
        atol: 1e-20,
        h_max: 0.25,
        max_steps: 10_000_000,
    };
    let y0: Vec<f64> = (&r * opts.offset).as_slice().to_vec();
    let target = opts.phase * jump[0];
    let sign0 = (y0[0] - target).signum();
    let limit = 10.0 * xi_max;
    let mut prev = (0.0, y0.clone());
    let mut crossing: Option<((f64, Vec<f64>), f64)> = None;
    ode.integrate_observed(rhs.clone(), 0.0, &y0, limit, |x, y| {
        if (y[0] - target).signum() != sign0 {
            crossing = Some((prev.clone(), x));
            return Control::Stop;
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Control::Stop;
        }
        prev = (x, y.to_vec());
        Control::Continue
    })?;
    let ((xa, ya), xb) = crossing.ok_or_else(|| {
        Error::NoConnection("orbit never reaches the phase-condition level".into())
    })?;
    // Bisection on the crossing abscissa inside the last accepted step.
    let (mut lo, mut hi) = (xa, xb);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let ym = ode.integrate(rhs.clone(), xa, &ya, mid)?;
        if (ym[0] - target).signum() == sign0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let x_phase = 0.5 * (lo + hi);
    let half = (xi_max / opts.step).round() as usize;
    let h = xi_max / half as f64;
    let nodes = 2 * half + 1;
    let mut val = vec![0.0; nodes * n];
    // Linear unstable mode before the shooting start, one continuous forward
    // integration after it (backward integration towards u⁻ is unstable).
    // Once the orbit is inside the linear regime of u⁺ it continues along the
    // decaying modes there. Integrating further only parks it a few ulps off
    // u⁺, and that offset leaves a non-decaying floor in V'.
    let mut cur_x = 0.0;
    let mut cur_y = y0.clone();
    let mut linear_plus: Option<(f64, DVector<f64>)> = None;
    let mut modal = vec![None; nodes];
    for i in 0..nodes {
        let xi = -xi_max + h * i as f64;
        let xs = xi + x_phase;
        let v: Vec<f64> = if xs <= 0.0 {
            (&r * (opts.offset * (a_lin * xs).exp())).as_slice().to_vec()
        } else if let Some((x0, c)) = &linear_plus {
            let e = DVector::from_iterator(n, (0..n).map(|k| c[k] * (rates_p[k] * (xs - x0)).exp()));
            modal[i] = Some(e.clone());
            (u_plus - u_minus + &ap.p * e).as_slice().to_vec()
        } else {
            cur_y = ode.integrate(rhs.clone(), cur_x, &cur_y, xs)?;
            cur_x = xs;
            let dev = u_minus + DVector::from_column_slice(&cur_y) - u_plus;
            if dev.norm() < LINEAR_REGIME * jump.norm() {
                let mut c = &ap.p_inv * dev;
                for k in 0..n {
                    if rates_p[k] >= 0.0 {
                        c[k] = 0.0;
                    }
                }
                linear_plus = Some((xs, c));
            }
            cur_y.clone()
        };
        for c in 0..n {
            val[i * n + c] = u_minus[c] + v[c];
        }
    }
    // Entry into the 1e-8 ball of u+ within 10 Ξ.
    let dist_end = {
        let tail = ode.integrate(rhs.clone(), cur_x, &cur_y, (limit).max(cur_x))?;
        (DVector::from_vec(tail) + u_minus - u_plus).norm()
    };
    let dist_xi = (DVector::from_column_slice(&val[(nodes - 1) * n..]) - u_plus).norm();
    if dist_end > 1e-8 && dist_xi > 1e-8 {
        return Err(Error::NoConnection(format!(
            "orbit ends at distance {dist_end:e} from u+"
        )));
    }
    let mut d1 = vec![0.0; nodes * n];
    let mut d2 = vec![0.0; nodes * n];
    let fm = system.f(u_minus) - u_minus * s;
    for i in 0..nodes {
        if let Some(e) = &modal[i] {
            let d = DVector::from_iterator(n, (0..n).map(|k| rates_p[k] * e[k]));
            let dd = DVector::from_iterator(n, (0..n).map(|k| rates_p[k] * d[k]));
            d1[i * n..(i + 1) * n].copy_from_slice((&ap.p * d).as_slice());
            d2[i * n..(i + 1) * n].copy_from_slice((&ap.p * dd).as_slice());
            continue;
        }
        let v = DVector::from_column_slice(&val[i * n..(i + 1) * n]);
        let f = system.f(&v) - &v * s - &fm;
        let a = system.df(&v) - &id * s;
        let g2 = a * &f;
        d1[i * n..(i + 1) * n].copy_from_slice(f.as_slice());
        d2[i * n..(i + 1) * n].copy_from_slice(g2.as_slice());
    }
    let grid = HermiteGrid::new(-xi_max, h, n, val, d1, d2);
    let tail_for = |e: &crate::system::Eigen, rates: &[f64], base: &DVector<f64>, x: f64, decaying_sign: f64| {
        let dev = DVector::from_vec(grid.value(x)) - base;
        let mut c = &e.p_inv * dev;
        for i in 0..n {
            // Keep only modes that decay away from the layer.
            if rates[i] * decaying_sign <= 0.0 {
                c[i] = 0.0;
            }
        }
        Tail {
            rates: rates.to_vec(),
            p: e.p.clone(),
            coeffs: c,
        }
    };
    let tails = [
        tail_for(&am, &rates_m, u_minus, -xi_max, 1.0),
        tail_for(&ap, &rates_p, u_plus, xi_max, -1.0),
    ];
    let mut prof = ShockProfile {
        system: system.clone(),
        j: 1,
        t,
        u_minus: u_minus.clone(),
        u_plus: u_plus.clone(),
        speed: s,
        xi_max,
        omega: f64::NAN,
        decay_const: f64::NAN,
        grid,
        flux_minus: fm,
        tails,
    };
    if let Ok((w, c)) = decay_rate(&prof) {
        prof.omega = w;
        prof.decay_const = c;
    }
    Ok(prof)
}

/// Sup-norm of the second-order residual `V_ξξ − (f(V) − sV)_ξ` for an
/// arbitrary sampler, using fourth-order central differences of the samples.
pub fn profile_residual_of<F: Fn(f64) -> DVector<f64>>(
    system: &HyperbolicSystem,
    s: f64,
    v: F,
    xi_max: f64,
    h: f64,
) -> f64 {
    let m = (2.0 * xi_max / h).round() as usize;
    let flux = |x: f64| {
        let vv = v(x);
        system.f(&vv) - &vv * s
    };
    let mut worst = 0.0f64;
    for i in 2..m - 1 {
        let x = -xi_max + h * i as f64;
        let vs: Vec<DVector<f64>> = (-2..=2).map(|k| v(x + k as f64 * h)).collect();
        let fs: Vec<DVector<f64>> = (-2..=2).map(|k| flux(x + k as f64 * h)).collect();
        let vxx = (-&vs[0] + &vs[1] * 16.0 - &vs[2] * 30.0 + &vs[3] * 16.0 - &vs[4]) / (12.0 * h * h);
        let fx = (&fs[0] - &fs[1] * 8.0 + &fs[3] * 8.0 - &fs[4]) / (12.0 * h);
        worst = worst.max((vxx - fx).amax());
    }
    worst
}

/// Residual of the profile ODE in second-order form (grid step 0.05).
pub fn profile_residual(profile: &ShockProfile) -> f64 {
    profile_residual_of(
        &profile.system,
        profile.speed,
        |x| profile.value(x),
        profile.xi_max,
        0.05,
    )
}

/// Exponential decay `(ω, C)` with `|V − u±| ≤ C e^{−ω|ξ|}`: log-linear fits
/// over the range where the deviation lies in `[1e-11, 1e-3]`, smaller rate of
/// the two sides and larger prefactor.
pub fn decay_rate(profile: &ShockProfile) -> Result<(f64, f64)> {
    let g = profile.grid();
    let mut omega = f64::INFINITY;
    let mut cmax = 0.0f64;
    for (sign, base) in [(-1.0, &profile.u_minus), (1.0, &profile.u_plus)] {
        let mut xs = vec![];
        let mut ys = vec![];
        for i in 0..g.nodes() {
            let x = g.node(i);
            if x * sign <= 0.0 {
                continue;
            }
            let d = (DVector::from_column_slice(g.value_at_node(i)) - base).norm();
            if (1e-11..=1e-3).contains(&d) {
                xs.push(x.abs());
                ys.push(d.ln());
            }
        }
        if xs.len() < 10 {
            return Err(Error::FitFailed(format!(
                "only {} samples in the fitting window",
                xs.len()
            )));
        }
        let f = fit_line(&xs, &ys);
        if f.rms > 0.1 {
            return Err(Error::FitFailed(format!("log-linear residual {:.3}", f.rms)));
        }
        omega = omega.min(-f.slope);
        cmax = cmax.max(f.intercept.exp());
    }
    if omega <= 0.0 {
        return Err(Error::FitFailed(format!("non-positive decay rate {omega}")));
    }
    Ok((omega, cmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Burgers;

    fn burgers() -> HyperbolicSystem {
        HyperbolicSystem::new(Burgers::plain())
    }

    fn v(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn burgers_tanh() {
        let p = solve_profile(&burgers(), &v(1.0), &v(-1.0), 0.0, 0.0).unwrap();
        let mut err = 0.0f64;
        for i in 0..=4000 {
            let x = -40.0 + 0.02 * i as f64 + 0.003;
            err = err.max((p.value(x)[0] + (0.5 * x).tanh()).abs());
        }
        assert!(err <= 1e-8, "err = {err:e}");
        assert!(p.first_integral_residual() <= 1e-8);
        assert!((p.value(40.0)[0] + 1.0).abs() <= 1e-10);
        assert!((p.value(-40.0)[0] - 1.0).abs() <= 1e-10);
        assert!((0.95..=1.05).contains(&p.omega), "omega = {}", p.omega);
        assert!(profile_residual(&p) <= 1e-6);
    }

    #[test]
    fn decay_scales_with_amplitude() {
        let a = 2.5;
        let p = solve_profile(&burgers(), &v(a), &v(-a), 0.0, 0.0).unwrap();
        let (w, _) = decay_rate(&p).unwrap();
        assert!((w / a - 1.0).abs() < 0.05, "omega = {w}");
    }

    #[test]
    fn degenerate_endpoints() {
        assert!(matches!(
            solve_profile(&burgers(), &v(0.5), &v(0.5), 0.0, 0.0),
            Err(Error::NoConnection(_))
        ));
        let r = profile_residual_of(&burgers(), 0.0, |_| v(0.5), 10.0, 0.05);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn perturbation_is_detected() {
        let p = solve_profile(&burgers(), &v(1.0), &v(-1.0), 0.0, 0.0).unwrap();
        let r = profile_residual_of(&p.system, 0.0, |x| p.value(x) + v(0.01 / x.cosh()), 20.0, 0.05);
        assert!(r > 1e-3, "r = {r}");
    }

    #[test]
    fn translation_quotient() {
        let s = burgers();
        let p0 = solve_profile(&s, &v(1.0), &v(-1.0), 0.0, 0.0).unwrap();
        let opts = ProfileOptions { phase: 0.3, ..Default::default() };
        let p1 = solve_profile_with(&s, &v(1.0), &v(-1.0), 0.0, 0.0, &opts).unwrap();
        // p1(0) = 1 − 0.3·2 = 0.4 = p0(shift) with shift = −2 atanh(0.4).
        let shift = -2.0 * 0.4f64.atanh();
        let mut worst = 0.0f64;
        for i in 0..600 {
            let x = -30.0 + 0.1 * i as f64;
            worst = worst.max((p1.value(x)[0] - p0.value(x + shift)[0]).abs());
        }
        assert!(worst <= 1e-8, "worst = {worst:e}");
    }
}

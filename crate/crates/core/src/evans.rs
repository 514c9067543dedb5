//! Evans function of the layer operator `ℒw = w_ξξ − ((df(V) − s) w)_ξ`
//! about a viscous shock profile `V`.
//!
//! The eigenvalue problem `ℒw = λw` is written first order in
//! `(w, y = w_ξ − (df(V) − s) w)`. The unstable bundle from `−∞` and the
//! stable bundle from `+∞` are carried as exterior products (compound
//! matrices), rescaled by their asymptotic growth so the result stays
//! analytic in `λ`, and paired at `ξ = 0`.

use crate::error::{Error, Result};
use crate::numerics::ode::Dopri5;
use crate::profile::{solve_profile, ShockProfile};
use crate::system::{eigen_decompose, majda_liu_determinant, RollWave, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

type C = Complex64;

#[derive(Debug, Clone)]
pub struct EvansOptions {
    /// Integrator tolerance.
    pub tol: f64,
    /// Radius of the excluded half-disk, capped by the essential-spectrum
    /// margin.
    pub r0: f64,
    /// Outer radius; `None` means `5 · max a²` over the endpoint modes.
    pub radius: Option<f64>,
    pub samples: usize,
    pub cauchy_points: usize,
    /// Passes of contour bisection where the argument jumps by more than π/4.
    pub max_refine: usize,
}

impl Default for EvansOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            r0: 0.05,
            radius: None,
            samples: 256,
            cauchy_points: 64,
            max_refine: 12,
        }
    }
}

/// Index bookkeeping for `k`-vectors in `C^dim`.
#[derive(Debug, Clone)]
struct Wedge {
    dim: usize,
    k: usize,
    sets: Vec<Vec<usize>>,
    /// `(row set, column set, sign, a_row, a_col)`: entries of the compound
    /// (derivation) matrix induced by `A`.
    terms: Vec<(usize, usize, f64, usize, usize)>,
}

fn inversions(v: &[usize]) -> usize {
    let mut count = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                count += 1;
            }
        }
    }
    count
}

fn parity(v: &[usize]) -> f64 {
    if inversions(v) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn subsets(dim: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..dim {
        for rest in subsets(dim, k - 1) {
            if rest.first().is_none_or(|&r| r > first) {
                let mut s = vec![first];
                s.extend(rest);
                out.push(s);
            }
        }
    }
    out
}

impl Wedge {
    fn new(dim: usize, k: usize) -> Self {
        let sets = subsets(dim, k);
        let index = |s: &[usize]| sets.iter().position(|t| t == s).expect("sorted subset");
        let mut terms = Vec::new();
        for (cj, set) in sets.iter().enumerate() {
            for p in 0..k {
                let col = set[p];
                for row in 0..dim {
                    if row != col && set.contains(&row) {
                        continue;
                    }
                    let mut replaced = set.clone();
                    replaced[p] = row;
                    let sign = parity(&replaced);
                    replaced.sort_unstable();
                    terms.push((index(&replaced), cj, sign, row, col));
                }
            }
        }
        Self { dim, k, sets, terms }
    }

    fn len(&self) -> usize {
        self.sets.len()
    }

    /// Coordinates of `v₁ ∧ … ∧ v_k` (the `k × k` minors).
    fn of(&self, vectors: &[DVector<C>]) -> Vec<C> {
        self.sets
            .iter()
            .map(|rows| DMatrix::from_fn(self.k, self.k, |r, c| vectors[c][rows[r]]).determinant())
            .collect()
    }

    /// `a ∧ b` for complementary degrees, as a multiple of `e₁ ∧ … ∧ e_dim`.
    fn pair(&self, a: &[C], b: &[C]) -> C {
        let mut total = C::new(0.0, 0.0);
        for (i, set) in self.sets.iter().enumerate() {
            let rest: Vec<usize> = (0..self.dim).filter(|x| !set.contains(x)).collect();
            let j = self.sets.iter().position(|t| *t == rest).expect("complement of a k-set");
            let mut perm = set.clone();
            perm.extend(&rest);
            total += a[i] * b[j] * parity(&perm);
        }
        total
    }
}

/// Characteristic modes `a_i = λ_i(u^±) − s` and eigenvectors at one end.
#[derive(Debug, Clone)]
struct Endpoint {
    a: Vec<f64>,
    r: DMatrix<f64>,
}

/// `√(a² + 4λ)` on the principal branch.
fn root(a: f64, lambda: C) -> C {
    (C::new(a * a, 0.0) + lambda * 4.0).sqrt()
}

/// Evans function machinery for one profile.
pub struct Evans<'a> {
    pub profile: &'a ShockProfile,
    pub opts: EvansOptions,
    minus: Endpoint,
    plus: Endpoint,
    wedge: Wedge,
}

/// One certification of a profile.
#[derive(Debug, Clone, Serialize)]
pub struct EvansEvaluation {
    pub radius: f64,
    pub r0: f64,
    /// `(λ, D(λ))` along the closed contour, in order.
    pub contour: Vec<([f64; 2], [f64; 2])>,
    pub winding: i64,
    /// Distance of the accumulated winding from the nearest integer.
    pub winding_defect: f64,
    pub min_abs_d: f64,
    pub d_zero: [f64; 2],
    pub d_prime0: [f64; 2],
}

impl EvansEvaluation {
    pub fn abs_d_prime0(&self) -> f64 {
        self.d_prime0[0].hypot(self.d_prime0[1])
    }
}

fn pair_of(z: C) -> [f64; 2] {
    [z.re, z.im]
}

impl<'a> Evans<'a> {
    pub fn new(profile: &'a ShockProfile, opts: EvansOptions) -> Result<Self> {
        let end = |u: &DVector<f64>| -> Result<Endpoint> {
            let e = eigen_decompose(&profile.system, u)?;
            Ok(Endpoint {
                a: e.lambdas.iter().map(|l| l - profile.speed).collect(),
                r: e.p,
            })
        };
        let n = profile.n();
        Ok(Self {
            minus: end(&profile.u_minus)?,
            plus: end(&profile.u_plus)?,
            wedge: Wedge::new(2 * n, n),
            profile,
            opts,
        })
    }

    /// `A(ξ, λ) = [[df(V) − s, I], [λI, 0]]`.
    pub fn first_order_system(&self, xi: f64, lambda: C) -> DMatrix<C> {
        let n = self.profile.n();
        let at = self.profile.a_tilde(&self.profile.value(xi));
        let mut a = DMatrix::from_element(2 * n, 2 * n, C::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = C::new(at[(i, j)], 0.0);
            }
            a[(i, n + i)] = C::new(1.0, 0.0);
            a[(n + i, i)] = lambda;
        }
        a
    }

    fn endpoint(&self, side: Side) -> &Endpoint {
        match side {
            Side::Minus => &self.minus,
            Side::Plus => &self.plus,
        }
    }

    /// The `2n` roots of `μ² − a_i μ − λ = 0`, the eigenvalues of
    /// `A(±∞, λ)`, as `(μ₋, μ₊)` pairs per mode (`μ₋` has the smaller real
    /// part).
    pub fn limit_eigenvalues(&self, side: Side, lambda: C) -> Vec<(C, C)> {
        self.endpoint(side)
            .a
            .iter()
            .map(|&a| {
                let q = root(a, lambda);
                ((C::new(a, 0.0) - q) * 0.5, (C::new(a, 0.0) + q) * 0.5)
            })
            .collect()
    }

    /// `(unstable count at −∞, stable count at +∞)`; both must equal `n`.
    pub fn splitting(&self, lambda: C) -> Result<(usize, usize)> {
        let count = |side, pick: fn(f64) -> bool| {
            self.limit_eigenvalues(side, lambda)
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .filter(|m| pick(m.re))
                .count()
        };
        let neutral = [Side::Minus, Side::Plus].iter().any(|&side| {
            self.limit_eigenvalues(side, lambda)
                .iter()
                .any(|&(a, b)| a.re.abs() <= 1e-12 || b.re.abs() <= 1e-12)
        });
        let unstable = count(Side::Minus, |re| re > 0.0);
        let stable = count(Side::Plus, |re| re < 0.0);
        let n = self.profile.n();
        if neutral {
            return Err(Error::SplittingFailure(format!("{lambda} (limit eigenvalue on the imaginary axis)")));
        }
        if unstable != n || stable != n {
            return Err(Error::SplittingFailure(format!("{lambda} (counts {unstable}, {stable}; n = {n})")));
        }
        Ok((unstable, stable))
    }

    /// Smallest `a_i²/4` over both ends: the essential spectrum of `ℒ`
    /// stays left of `−margin` on the real axis near the origin.
    pub fn essential_margin(&self) -> f64 {
        self.minus
            .a
            .iter()
            .chain(&self.plus.a)
            .map(|a| 0.25 * a * a)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn radius(&self) -> f64 {
        self.opts.radius.unwrap_or_else(|| {
            let amax = self.minus.a.iter().chain(&self.plus.a).map(|a| a.abs()).fold(0.0, f64::max);
            5.0 * amax * amax
        })
    }

    pub fn r0(&self) -> f64 {
        self.opts.r0.min(0.5 * self.essential_margin())
    }

    /// Initial `n`-vector of the decaying bundle at one end, and its
    /// growth rate `Σμ`.
    fn initial(&self, side: Side, lambda: C) -> (Vec<C>, C) {
        let end = self.endpoint(side);
        let n = self.profile.n();
        let mut rate = C::new(0.0, 0.0);
        let vectors: Vec<DVector<C>> = self
            .limit_eigenvalues(side, lambda)
            .into_iter()
            .enumerate()
            .map(|(i, (lo, hi))| {
                let mu = if side == Side::Minus { hi } else { lo };
                rate += mu;
                let a = end.a[i];
                DVector::from_fn(2 * n, |row, _| {
                    let r = C::new(end.r[(row % n, i)], 0.0);
                    if row < n {
                        r
                    } else {
                        r * (mu - a)
                    }
                })
            })
            .collect();
        (self.wedge.of(&vectors), rate)
    }

    fn transport(&self, side: Side, lambda: C, tol: f64) -> Result<Vec<C>> {
        let (w0, rate) = self.initial(side, lambda);
        let m = self.wedge.len();
        let xi0 = match side {
            Side::Minus => -self.profile.xi_max,
            Side::Plus => self.profile.xi_max,
        };
        let mut y0 = vec![0.0; 2 * m];
        for (i, w) in w0.iter().enumerate() {
            y0[i] = w.re;
            y0[m + i] = w.im;
        }
        let rhs = |xi: f64, y: &[f64], dy: &mut [f64]| {
            let a = self.first_order_system(xi, lambda);
            for i in 0..m {
                let r = -rate * C::new(y[i], y[m + i]);
                dy[i] = r.re;
                dy[m + i] = r.im;
            }
            for &(row, col, sign, ar, ac) in &self.wedge.terms {
                let v = a[(ar, ac)] * C::new(y[col], y[m + col]) * sign;
                dy[row] += v.re;
                dy[m + row] += v.im;
            }
        };
        let solver = Dopri5 {
            rtol: tol,
            atol: tol,
            ..Default::default()
        };
        let y = solver
            .integrate(rhs, xi0, &y0, 0.0)
            .map_err(|e| Error::IntegrationOverflow(format!("{lambda}: {e}")))?;
        let w: Vec<C> = (0..m).map(|i| C::new(y[i], y[m + i])).collect();
        if w.iter().any(|z| !z.is_finite() || z.norm() > 1e200) {
            return Err(Error::IntegrationOverflow(lambda.to_string()));
        }
        Ok(w)
    }

    /// `D(λ)` at the configured tolerance.
    pub fn d(&self, lambda: C) -> Result<C> {
        self.d_with_tol(lambda, self.opts.tol)
    }

    pub fn d_with_tol(&self, lambda: C, tol: f64) -> Result<C> {
        let minus = self.transport(Side::Minus, lambda, tol)?;
        let plus = self.transport(Side::Plus, lambda, tol)?;
        Ok(self.wedge.pair(&minus, &plus))
    }

    /// `D'(0)` by the Cauchy integral over `|λ| = r`.
    pub fn derivative_at_zero(&self, r: f64) -> Result<C> {
        let m = self.opts.cauchy_points.max(8);
        let values: Vec<C> = (0..m)
            .into_par_iter()
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / m as f64;
                let e = C::from_polar(1.0, theta);
                self.d(e * r).map(|d| d * e.conj())
            })
            .collect::<Result<_>>()?;
        Ok(values.iter().sum::<C>() / (m as f64 * r))
    }

    /// Winding number of `D` around the right half-annulus
    /// `{Re λ ≥ 0, r0 ≤ |λ| ≤ R}` and `D'(0)`. Fails with `UnstableSpectrum`
    /// on a nonzero winding and `DegenerateZero` when `|D'(0)| ≤ 1e-6`.
    pub fn winding_check(&self) -> Result<EvansEvaluation> {
        let (radius, r0) = (self.radius(), self.r0());
        let contour = trace_contour(&|l| self.d(l), radius, r0, self.opts.samples, self.opts.max_refine)?;
        let d_prime0 = self.derivative_at_zero(r0)?;
        let d_zero = self.d(C::new(0.0, 0.0))?;
        let eval = EvansEvaluation {
            radius,
            r0,
            contour: contour.points.iter().zip(&contour.values).map(|(l, d)| (pair_of(*l), pair_of(*d))).collect(),
            winding: contour.winding,
            winding_defect: contour.defect,
            min_abs_d: contour.min_abs,
            d_zero: pair_of(d_zero),
            d_prime0: pair_of(d_prime0),
        };
        if eval.winding != 0 {
            return Err(Error::UnstableSpectrum(eval.winding));
        }
        if eval.abs_d_prime0() <= 1e-6 {
            return Err(Error::DegenerateZero(eval.abs_d_prime0()));
        }
        Ok(eval)
    }
}

pub fn first_order_system(profile: &ShockProfile, xi: f64, lambda: C) -> Result<DMatrix<C>> {
    Ok(Evans::new(profile, EvansOptions::default())?.first_order_system(xi, lambda))
}

pub fn evans_d(profile: &ShockProfile, lambda: C) -> Result<C> {
    Evans::new(profile, EvansOptions::default())?.d(lambda)
}

pub fn winding_check(profile: &ShockProfile, radius: f64, r0: f64) -> Result<EvansEvaluation> {
    let opts = EvansOptions {
        radius: Some(radius),
        r0,
        ..Default::default()
    };
    Evans::new(profile, opts)?.winding_check()
}

/// A sampled closed contour and the winding of `f` along it.
#[derive(Debug, Clone)]
pub struct Contour {
    pub points: Vec<C>,
    pub values: Vec<C>,
    pub winding: i64,
    pub defect: f64,
    pub min_abs: f64,
}

/// Segment `seg` of the boundary of the right half-annulus at parameter
/// `t ∈ [0, 1]`, traversed counter-clockwise: outer arc, upper axis
/// inwards, inner arc, lower axis outwards.
fn contour_point(seg: usize, t: f64, radius: f64, r0: f64) -> C {
    match seg {
        0 => C::from_polar(radius, -0.5 * PI + PI * t),
        1 => C::new(0.0, radius * (r0 / radius).powf(t)),
        2 => C::from_polar(r0, 0.5 * PI - PI * t),
        _ => C::new(0.0, -r0 * (radius / r0).powf(t)),
    }
}

/// Evaluate `f` around the half-annulus, bisecting wherever the argument
/// jumps by more than π/4 between neighbours, and count its winding.
pub fn trace_contour<F>(f: &F, radius: f64, r0: f64, samples: usize, max_refine: usize) -> Result<Contour>
where
    F: Fn(C) -> Result<C> + Sync,
{
    let counts = [samples / 2, samples / 4, 16, samples / 4];
    let mut params: Vec<(usize, f64)> = Vec::new();
    for (seg, &c) in counts.iter().enumerate() {
        let c = c.max(4);
        params.extend((0..c).map(|k| (seg, k as f64 / c as f64)));
    }
    let eval = |ps: &[(usize, f64)]| -> Result<Vec<C>> {
        ps.par_iter().map(|&(s, t)| f(contour_point(s, t, radius, r0))).collect()
    };
    let mut values = eval(&params)?;
    for _ in 0..max_refine {
        let n = params.len();
        let mut inserts = Vec::new();
        for k in 0..n {
            let jump = (values[(k + 1) % n] / values[k]).arg().abs();
            if jump > 0.25 * PI {
                let (s, t) = params[k];
                let t_next = if params[(k + 1) % n].0 == s { params[(k + 1) % n].1 } else { 1.0 };
                inserts.push((k, (s, 0.5 * (t + t_next))));
            }
        }
        if inserts.is_empty() {
            break;
        }
        let new_params: Vec<(usize, f64)> = inserts.iter().map(|&(_, p)| p).collect();
        let new_values = eval(&new_params)?;
        let (mut p2, mut v2) = (Vec::with_capacity(n + inserts.len()), Vec::with_capacity(n + inserts.len()));
        let mut next = inserts.iter().zip(&new_values).peekable();
        for k in 0..n {
            p2.push(params[k]);
            v2.push(values[k]);
            if let Some(((at, p), v)) = next.peek() {
                if *at == k {
                    p2.push(*p);
                    v2.push(**v);
                    next.next();
                }
            }
        }
        params = p2;
        values = v2;
    }
    let n = values.len();
    let total: f64 = (0..n).map(|k| (values[(k + 1) % n] / values[k]).arg()).sum();
    let turns = total / (2.0 * PI);
    Ok(Contour {
        points: params.iter().map(|&(s, t)| contour_point(s, t, radius, r0)).collect(),
        min_abs: values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min),
        values,
        winding: turns.round() as i64,
        defect: (turns - turns.round()).abs(),
    })
}

/// Evans certification of the layer at shock 1 at one time.
#[derive(Debug, Clone, Serialize)]
pub struct EvansRow {
    pub tau: f64,
    pub j: usize,
    pub winding: i64,
    pub abs_dprime0: f64,
    pub min_abs_d: f64,
    pub radius: f64,
    pub r0: f64,
    /// Majda–Liu determinant of the same shock.
    pub majda_liu: f64,
    /// Both tests call the shock stable (or both do not).
    pub agree: bool,
}

/// Evans check of the layer at each `τ`: profile, winding and `D'(0)`,
/// with the Majda–Liu determinant alongside.
pub fn evans_check(rw: &RollWave, taus: &[f64], opts: &EvansOptions) -> Result<Vec<EvansRow>> {
    taus.iter()
        .map(|&tau| {
            let um = rw.trace(1, Side::Minus, 0, tau);
            let up = rw.trace(1, Side::Plus, 0, tau);
            let s = rw.shock_speed(1, tau);
            let profile = solve_profile(&rw.system, &um, &up, s, tau)?;
            let k = rw.lax(1, tau)?.k;
            let ml = majda_liu_determinant(&rw.system, &um, &up, k)?;
            let eval = Evans::new(&profile, opts.clone())?.winding_check()?;
            let abs_dprime0 = eval.abs_d_prime0();
            Ok(EvansRow {
                tau,
                j: 1,
                winding: eval.winding,
                abs_dprime0,
                min_abs_d: eval.min_abs_d,
                radius: eval.radius,
                r0: eval.r0,
                majda_liu: ml,
                agree: (ml.abs() > 1e-8) == (abs_dprime0 > 1e-6),
            })
        })
        .collect()
}

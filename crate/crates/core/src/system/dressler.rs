//! Dressler-type roll-waves of the inclined Saint-Venant equations.
//!
//! In the frame moving with speed `s`, a traveling wave has constant
//! relative discharge `K = s h − q` and the depth obeys
//! `(G h³ − K²) h_y = S h³ − c_f (s h − K)²`. Both sides vanish at the sonic
//! depth `h_c = (K²/G)^{1/3}`, so after dividing out the common factor
//! `h − h_c` the arc is the regular quadrature
//! `dy/dh = G (h² + h h_c + h_c²) / Q(h)`.

use super::{HyperbolicSystem, RollWave, SaintVenant, Side, WaveShape};
use crate::error::{Error, Result};
use crate::numerics::quad::gauss_legendre;
use nalgebra::DVector;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DresslerParams {
    /// `g cos θ`.
    pub g_cos: f64,
    /// `g sin θ`.
    pub g_sin: f64,
    pub c_f: f64,
    /// Depth at the sonic point. Ignored when `speed` is set.
    pub sonic_depth: f64,
    /// Wave speed; determines the sonic depth when given.
    pub speed: Option<f64>,
    pub period: f64,
    pub t_star: f64,
}

impl Default for DresslerParams {
    fn default() -> Self {
        Self {
            g_cos: 1.0,
            g_sin: 0.1,
            c_f: 0.01,
            sonic_depth: 1.0,
            speed: None,
            period: 20.0,
            t_star: 1.0,
        }
    }
}

#[derive(Debug)]
struct DresslerArc {
    g: f64,
    hc: f64,
    s: f64,
    k: f64,
    /// Coefficients of Q(h) = q2 h² + q1 h + q0.
    q: [f64; 3],
    h_plus: f64,
    h_minus: f64,
    period: f64,
    /// Panel edges in h and cumulative y.
    h_edges: Vec<f64>,
    y_edges: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

impl DresslerArc {
    fn qpoly(&self, h: f64) -> f64 {
        (self.q[0] * h + self.q[1]) * h + self.q[2]
    }

    fn qpoly_d(&self, h: f64) -> f64 {
        2.0 * self.q[0] * h + self.q[1]
    }

    fn dy_dh(&self, h: f64) -> f64 {
        self.g * (h * h + h * self.hc + self.hc * self.hc) / self.qpoly(h)
    }

    /// h_y = R(h) and its h-derivative.
    fn rate(&self, h: f64) -> (f64, f64) {
        let p = self.g * (h * h + h * self.hc + self.hc * self.hc);
        let dp = self.g * (2.0 * h + self.hc);
        let q = self.qpoly(h);
        (q / p, (self.qpoly_d(h) * p - q * dp) / (p * p))
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        let (x, w) = &self.gl;
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        r * x.iter().zip(w).map(|(xi, wi)| wi * self.dy_dh(c + r * xi)).sum::<f64>()
    }

    fn depth(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.period);
        let p = match self.y_edges.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return self.h_edges[i],
            Err(i) => i.clamp(1, self.y_edges.len() - 1) - 1,
        };
        let (h0, y0) = (self.h_edges[p], self.y_edges[p]);
        let (h1, y1) = (self.h_edges[p + 1], self.y_edges[p + 1]);
        let mut h = h0 + (h1 - h0) * (y - y0) / (y1 - y0);
        for _ in 0..50 {
            let f = y0 + self.integrate(h0, h) - y;
            let dh = f / self.dy_dh(h);
            h = (h - dh).clamp(h0, h1);
            if dh.abs() < 1e-15 * h.abs().max(1.0) {
                break;
            }
        }
        h
    }

    fn state(&self, h: f64, order: usize) -> DVector<f64> {
        let (r, dr) = self.rate(h);
        let v = match order {
            0 => [h, self.s * h - self.k],
            1 => [r, self.s * r],
            _ => [dr * r, self.s * dr * r],
        };
        DVector::from_vec(v.to_vec())
    }
}

impl WaveShape for DresslerArc {
    fn eval(&self, y: f64, order: usize) -> DVector<f64> {
        self.state(self.depth(y), order)
    }

    fn trace(&self, side: Side, order: usize) -> DVector<f64> {
        match side {
            Side::Plus => self.state(self.h_plus, order),
            Side::Minus => self.state(self.h_minus, order),
        }
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-15 * m.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Periodic roll-wave with one shock per period and the prescribed period.
pub fn build_dressler_rollwave(p: &DresslerParams) -> Result<RollWave> {
    let (g, sn, cf) = (p.g_cos, p.g_sin, p.c_f);
    if !(g > 0.0 && sn > 0.0 && cf > 0.0 && p.period > 0.0) {
        return Err(Error::NoRollWave("parameters must be positive".into()));
    }
    let froude2 = sn / (cf * g);
    if froude2 <= 4.0 {
        return Err(Error::NoRollWave(format!(
            "uniform flow Froude number {:.3} does not exceed 2",
            froude2.sqrt()
        )));
    }
    let hc = match p.speed {
        Some(s) => (s / (g.sqrt() + (sn / cf).sqrt())).powi(2),
        None => p.sonic_depth,
    };
    let k = (g * hc.powi(3)).sqrt();
    let s = k / hc + (sn * hc / cf).sqrt();
    let b1 = -cf * s * s + sn * hc;
    let b0 = 2.0 * cf * s * k + hc * b1;
    let remainder = -cf * k * k + hc * b0;
    if remainder.abs() > 1e-10 * (cf * k * k).max(1.0) {
        return Err(Error::NoRollWave(format!("sonic compatibility fails (remainder {remainder:e})")));
    }
    let q = [sn, b1, b0];
    // Largest real root of Q; Q > 0 beyond it.
    let disc = b1 * b1 - 4.0 * sn * b0;
    let h_floor = if disc >= 0.0 { ((-b1 + disc.sqrt()) / (2.0 * sn)).max(0.0) } else { 0.0 };
    if h_floor >= hc {
        return Err(Error::NoRollWave("the arc through the sonic point is not monotone".into()));
    }
    let energy = |h: f64| 0.5 * g * h * h + k * k / h;
    let conjugate = |hp: f64| {
        let e = energy(hp);
        let mut hi = 2.0 * hc;
        while energy(hi) < e {
            hi *= 2.0;
        }
        bisect(|h| energy(h) - e, hc, hi)
    };
    let mut arc = DresslerArc {
        g,
        hc,
        s,
        k,
        q,
        h_plus: 0.0,
        h_minus: 0.0,
        period: 0.0,
        h_edges: vec![],
        y_edges: vec![],
        gl: gauss_legendre(10),
    };
    let period_of = |arc: &DresslerArc, hp: f64| {
        let hm = conjugate(hp);
        let panels = 64;
        (0..panels)
            .map(|i| {
                let a = hp + (hm - hp) * i as f64 / panels as f64;
                let b = hp + (hm - hp) * (i + 1) as f64 / panels as f64;
                arc.integrate(a, b)
            })
            .sum::<f64>()
    };
    let lo = h_floor + 1e-9 * hc;
    if period_of(&arc, lo) <= p.period {
        return Err(Error::NoRollWave(format!(
            "period {} is longer than any admissible wave",
            p.period
        )));
    }
    let hp = bisect(|h| period_of(&arc, h) - p.period, lo, hc * (1.0 - 1e-12));
    let hm = conjugate(hp);
    let panels = 2000;
    arc.h_edges = (0..=panels)
        .map(|i| hp + (hm - hp) * i as f64 / panels as f64)
        .collect();
    arc.y_edges = vec![0.0; panels + 1];
    for i in 0..panels {
        arc.y_edges[i + 1] = arc.y_edges[i] + arc.integrate(arc.h_edges[i], arc.h_edges[i + 1]);
    }
    arc.h_plus = hp;
    arc.h_minus = hm;
    arc.period = arc.y_edges[panels];
    let period = arc.period;
    let rw = RollWave {
        system: HyperbolicSystem::new(SaintVenant {
            g_cos: g,
            g_sin: sn,
            c_f: cf,
        }),
        period,
        m: 1,
        speed: s,
        x0: 0.0,
        t_star: p.t_star,
        r: period / 4.0,
        label: format!("dressler(G={g}, S={sn}, c_f={cf}, h_c={hc:.6}, L={period:.6})"),
        shape: Arc::new(arc),
    };
    Ok(rw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_wave_is_lax_2_with_sonic_point() {
        let rw = build_dressler_rollwave(&DresslerParams::default()).unwrap();
        assert!((rw.period - 20.0).abs() < 1e-9);
        assert!(rw.rh_residual(1, 0.0).norm() <= 1e-8);
        assert_eq!(rw.lax(1, 0.0).unwrap().k, 2);
        // Depth crosses the sonic value inside the arc.
        let hp = rw.u_plus()[0];
        let hm = rw.u_minus()[0];
        assert!(hp < 1.0 && hm > 1.0);
        rw.check_invariants(50, 1e-8).unwrap();
    }

    #[test]
    fn subcritical_flow_has_no_roll_wave() {
        let p = DresslerParams {
            g_sin: 0.03,
            ..Default::default()
        };
        assert!(matches!(build_dressler_rollwave(&p), Err(Error::NoRollWave(_))));
    }
}

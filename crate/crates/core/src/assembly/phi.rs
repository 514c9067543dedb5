//! The shock-fixing map `φ(z, t) = z + Σ_j α_j(z) s_j(t)` with a smooth
//! partition of unity `α_j` and shifts `s_j = X_j − (j−1)L/m − εδ^j`.

use super::cutoff::smoothstep;
use crate::error::{Error, Result};
use std::sync::Arc;

/// `t ↦ [s_j, s_j', s_j'']`.
pub type Shift = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// `φ` and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub phi: f64,
    pub z: f64,
    pub zz: f64,
    pub t: f64,
    pub zt: f64,
    pub tt: f64,
}

#[derive(Clone)]
pub struct PhiMap {
    pub period: f64,
    pub r: f64,
    shifts: Vec<Shift>,
}

impl std::fmt::Debug for PhiMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiMap")
            .field("period", &self.period)
            .field("r", &self.r)
            .field("m", &self.shifts.len())
            .finish()
    }
}

impl PhiMap {
    /// Partition with plateaus of half-width `r` around the anchors
    /// `(j−1)L/m` and transitions of width `r/2` centred between them.
    pub fn new(period: f64, r: f64, shifts: Vec<Shift>) -> Result<Self> {
        let m = shifts.len();
        if m == 0 {
            return Err(Error::Config("shock-fixing map needs at least one shock".into()));
        }
        let spacing = period / m as f64;
        if 0.5 * spacing - 0.25 * r < r {
            return Err(Error::Config(format!(
                "shock separation {spacing} too small for plateau half-width {r}"
            )));
        }
        Ok(Self { period, r, shifts })
    }

    pub fn m(&self) -> usize {
        self.shifts.len()
    }

    fn spacing(&self) -> f64 {
        self.period / self.m() as f64
    }

    /// The (at most two) partition functions that are nonzero at `z`,
    /// as `(j, [α_j, α_j', α_j''])`.
    pub fn alphas(&self, z: f64) -> [(usize, [f64; 3]); 2] {
        let m = self.m() as i64;
        let h = self.spacing();
        let w = 0.5 * self.r;
        let k = (z / h).round();
        let rel = z - k * h;
        let home = (k as i64).rem_euclid(m) as usize;
        let (dir, other) = if rel >= 0.0 {
            (1.0, (k as i64 + 1).rem_euclid(m) as usize)
        } else {
            (-1.0, (k as i64 - 1).rem_euclid(m) as usize)
        };
        if home == other {
            return [(home, [1.0, 0.0, 0.0]), (other, [0.0; 3])];
        }
        let arg = (rel.abs() - (0.5 * h - 0.5 * w)) / w;
        let [s, s1, s2] = smoothstep(arg);
        // d/dz of arg is dir / w.
        let b = [s, s1 * dir / w, s2 / (w * w)];
        [(home, [1.0 - b[0], -b[1], -b[2]]), (other, b)]
    }

    pub fn eval(&self, z: f64, t: f64) -> PhiValue {
        let mut out = PhiValue {
            phi: z,
            z: 1.0,
            zz: 0.0,
            t: 0.0,
            zt: 0.0,
            tt: 0.0,
        };
        for (j, a) in self.alphas(z) {
            let s = (self.shifts[j])(t);
            out.phi += a[0] * s[0];
            out.z += a[1] * s[0];
            out.zz += a[2] * s[0];
            out.t += a[0] * s[1];
            out.zt += a[1] * s[1];
            out.tt += a[0] * s[2];
        }
        out
    }

    /// Solve `φ(z, t) = x` for `z` by safeguarded Newton iteration.
    pub fn invert(&self, x: f64, t: f64) -> f64 {
        let mut z = x - (self.shifts[0])(t)[0];
        for _ in 0..50 {
            let p = self.eval(z, t);
            let step = (p.phi - x) / p.z;
            z -= step;
            if step.abs() < 1e-14 * (1.0 + z.abs()) {
                break;
            }
        }
        z
    }

    /// Smallest `φ_z` over `nz` points of one period at `nt` times in
    /// `[0, t_end]`; fails with `NotMonotone` if it is not positive.
    pub fn check_monotone(&self, t_end: f64, nt: usize, nz: usize) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for i in 0..nt.max(1) {
            let t = if nt > 1 { t_end * i as f64 / (nt - 1) as f64 } else { 0.0 };
            for k in 0..nz {
                let z = self.period * k as f64 / nz as f64;
                worst = worst.min(self.eval(z, t).z);
            }
        }
        if worst <= 0.0 {
            return Err(Error::NotMonotone(worst));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift(a: f64, w: f64) -> Shift {
        Arc::new(move |t: f64| [a * (w * t).sin(), a * w * (w * t).cos(), -a * w * w * (w * t).sin()])
    }

    fn three() -> PhiMap {
        PhiMap::new(3.0, 0.3, vec![shift(0.02, 1.0), shift(-0.01, 2.0), shift(0.015, 0.5)]).unwrap()
    }

    #[test]
    fn partition_of_unity_and_plateaus() {
        let p = three();
        for i in 0..600 {
            let z = -1.0 + 0.01 * i as f64;
            let a = p.alphas(z);
            let total: f64 = a.iter().map(|(_, v)| v[0]).sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!(a.iter().map(|(_, v)| v[1]).sum::<f64>().abs() < 1e-12);
        }
        // On the plateau around anchor 1 (z = 1) the map is a pure shift.
        let t = 0.7;
        for &z in &[0.75, 1.0, 1.25] {
            let v = p.eval(z, t);
            assert!((v.phi - z - (p.shifts[1])(t)[0]).abs() < 1e-14);
            assert_eq!(v.z, 1.0);
        }
    }

    #[test]
    fn derivatives_and_inverse() {
        let p = three();
        let (e, t) = (1e-6, 0.4);
        for &z in &[0.4, 0.5, 1.52, 2.45, 2.6] {
            let v = p.eval(z, t);
            let fz = (p.eval(z + e, t).phi - p.eval(z - e, t).phi) / (2.0 * e);
            let fzz = (p.eval(z + e, t).z - p.eval(z - e, t).z) / (2.0 * e);
            let ft = (p.eval(z, t + e).phi - p.eval(z, t - e).phi) / (2.0 * e);
            let fzt = (p.eval(z, t + e).z - p.eval(z, t - e).z) / (2.0 * e);
            let ftt = (p.eval(z, t + e).t - p.eval(z, t - e).t) / (2.0 * e);
            assert!((v.z - fz).abs() < 1e-7);
            assert!((v.zz - fzz).abs() < 1e-6);
            assert!((v.t - ft).abs() < 1e-7);
            assert!((v.zt - fzt).abs() < 1e-6);
            assert!((v.tt - ftt).abs() < 1e-6);
            assert!((p.invert(v.phi, t) - z).abs() < 1e-12);
        }
        assert!(p.check_monotone(2.0, 5, 300).unwrap() > 0.0);
    }

    #[test]
    fn periodic_extension() {
        let p = three();
        let (a, b) = (p.eval(0.37, 0.2), p.eval(3.37, 0.2));
        assert!((b.phi - a.phi - 3.0).abs() < 1e-13);
    }

    #[test]
    fn large_drift_is_not_monotone() {
        let p = PhiMap::new(3.0, 0.3, vec![shift(0.0, 1.0), shift(2.0, 1.0), shift(0.0, 1.0)]).unwrap();
        assert!(matches!(p.check_monotone(1.5, 4, 600), Err(Error::NotMonotone(_))));
    }

    #[test]
    fn overlapping_plateaus_are_rejected() {
        assert!(PhiMap::new(1.0, 0.3, vec![shift(0.0, 1.0), shift(0.0, 1.0)]).is_err());
    }
}

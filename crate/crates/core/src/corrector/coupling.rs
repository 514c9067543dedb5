//! Linearised shock coupling: given the characteristic amplitudes arriving at
//! a shock, find the outgoing ones and the shift velocity from
//! `A⁺ v⁺ − A⁻ v⁻ + δ_t [u] = l`, `A± = df(u±) − s`.

use crate::error::{Error, Result};
use crate::system::{eigen_decompose, Eigen, RollWave, Side};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ShockCoupling {
    pub k: usize,
    pub n: usize,
    pub minus: Eigen,
    pub plus: Eigen,
    pub jump: DVector<f64>,
    pub speed: f64,
    pub determinant: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Result of [`ShockCoupling::solve`]. Amplitudes are indexed by family
/// (0-based); entries that were inputs are copied through.
#[derive(Debug, Clone)]
pub struct CouplingSolution {
    pub a_plus: DVector<f64>,
    pub a_minus: DVector<f64>,
    pub delta_t: f64,
    pub residual: f64,
}

impl ShockCoupling {
    pub fn new(rw: &RollWave, j: usize, t: f64) -> Result<Self> {
        let um = rw.trace(j, Side::Minus, 0, t);
        let up = rw.trace(j, Side::Plus, 0, t);
        let k = rw.lax(j, t)?.k;
        let minus = eigen_decompose(&rw.system, &um)?;
        let plus = eigen_decompose(&rw.system, &up)?;
        let n = um.len();
        let speed = rw.shock_speed(j, t);
        let jump = &up - &um;
        // Unknown columns: (λ_i⁻ − s) r_i⁻ for i < k, [u], (λ_i⁺ − s) r_i⁺ for i > k.
        let mut m = DMatrix::zeros(n, n);
        let mut ml = DMatrix::zeros(n, n);
        for i in 0..n {
            let (col, geo) = match (i + 1).cmp(&k) {
                std::cmp::Ordering::Less => (-minus.r(i) * (minus.lambdas[i] - speed), minus.r(i)),
                std::cmp::Ordering::Equal => (jump.clone(), jump.clone()),
                std::cmp::Ordering::Greater => (plus.r(i) * (plus.lambdas[i] - speed), plus.r(i)),
            };
            m.set_column(i, &col);
            ml.set_column(i, &geo);
        }
        let determinant = ml.determinant();
        if determinant.abs() <= 1e-8 {
            return Err(Error::MajdaLiuDegenerate(determinant.abs()));
        }
        Ok(Self {
            k,
            n,
            minus,
            plus,
            jump,
            speed,
            determinant,
            lu: m.lu(),
        })
    }

    /// `A⁺ Σ a_i⁺ r_i⁺ − A⁻ Σ a_i⁻ r_i⁻ + δ_t [u] − l`.
    pub fn defect(&self, a_plus: &DVector<f64>, a_minus: &DVector<f64>, delta_t: f64, l: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.jump * delta_t - l;
        for i in 0..self.n {
            out += self.plus.r(i) * ((self.plus.lambdas[i] - self.speed) * a_plus[i]);
            out -= self.minus.r(i) * ((self.minus.lambdas[i] - self.speed) * a_minus[i]);
        }
        out
    }

    /// Solve for `a_i⁺ (i > k)`, `a_i⁻ (i < k)` and `δ_t`. The incoming
    /// entries `a_i⁺ (i ≤ k)`, `a_i⁻ (i ≥ k)` are read from the inputs.
    pub fn solve(&self, a_plus: &DVector<f64>, a_minus: &DVector<f64>, l: &DVector<f64>) -> CouplingSolution {
        let k = self.k;
        let mut known_p = a_plus.clone();
        let mut known_m = a_minus.clone();
        for i in 0..self.n {
            if i + 1 > k {
                known_p[i] = 0.0;
            }
            if i + 1 < k {
                known_m[i] = 0.0;
            }
        }
        let rhs = -self.defect(&known_p, &known_m, 0.0, l);
        let x = self.lu.solve(&rhs).expect("coupling matrix checked at construction");
        let mut ap = a_plus.clone();
        let mut am = a_minus.clone();
        let mut delta_t = 0.0;
        for i in 0..self.n {
            match (i + 1).cmp(&k) {
                std::cmp::Ordering::Less => am[i] = x[i],
                std::cmp::Ordering::Equal => delta_t = x[i],
                std::cmp::Ordering::Greater => ap[i] = x[i],
            }
        }
        let residual = self.defect(&ap, &am, delta_t, l).amax();
        CouplingSolution {
            a_plus: ap,
            a_minus: am,
            delta_t,
            residual,
        }
    }
}

/// One-shot form of [`ShockCoupling::solve`].
pub fn shock_coupling_solve(
    rw: &RollWave,
    j: usize,
    t: f64,
    a_plus: &DVector<f64>,
    a_minus: &DVector<f64>,
    l: &DVector<f64>,
) -> Result<CouplingSolution> {
    Ok(ShockCoupling::new(rw, j, t)?.solve(a_plus, a_minus, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_dressler_rollwave, build_sawtooth_rollwave, DresslerParams};

    #[test]
    fn sawtooth_scalar_coupling() {
        let rw = build_sawtooth_rollwave(2.0, 0.0);
        let c = ShockCoupling::new(&rw, 1, 0.0).unwrap();
        assert_eq!(c.determinant, -2.0);
        // l = δ₀(A⁺u_x⁺ − A⁻u_x⁻) = −2 δ₀ with u₁ ≡ 0.
        for &d0 in &[0.0, 0.25, -1.5] {
            let l = DVector::from_vec(vec![-2.0 * d0]);
            let z = DVector::zeros(1);
            let sol = c.solve(&z, &z, &l);
            assert!((sol.delta_t - d0).abs() < 1e-15);
            assert!(sol.residual <= 1e-12);
        }
    }

    #[test]
    fn dressler_coupling_is_solvable() {
        let rw = build_dressler_rollwave(&DresslerParams::default()).unwrap();
        let c = ShockCoupling::new(&rw, 1, 0.0).unwrap();
        assert_eq!(c.k, 2);
        assert!(c.determinant.abs() > 1e-3);
        let inc_p = DVector::from_vec(vec![0.3, 0.0]);
        let inc_m = DVector::from_vec(vec![0.0, -0.2]);
        let l = DVector::from_vec(vec![0.1, -0.4]);
        let sol = c.solve(&inc_p, &inc_m, &l);
        assert!(sol.residual <= 1e-12);
        assert_eq!(sol.a_plus[0], 0.3);
        assert_eq!(sol.a_minus[1], -0.2);
    }
}

use super::{eigen_decompose, HyperbolicSystem};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// `f(u⁺) − f(u⁻) − s (u⁺ − u⁻)`.
pub fn rankine_hugoniot_residual(
    system: &HyperbolicSystem,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    s: f64,
) -> DVector<f64> {
    system.f(u_plus) - system.f(u_minus) - (u_plus - u_minus) * s
}

/// Classification of a Lax shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxShock {
    /// Family index, 1-based.
    pub k: usize,
    /// Smallest distance between `s` and the bracketing eigenvalues.
    pub margin: f64,
}

const CHAR_TOL: f64 = 1e-10;

/// Family index `k` with `λ_{k−1}(u⁻) < s < λ_k(u⁻)` and
/// `λ_k(u⁺) < s < λ_{k+1}(u⁺)`.
pub fn lax_family(
    system: &HyperbolicSystem,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    s: f64,
) -> Result<LaxShock> {
    let lm = eigen_decompose(system, u_minus)?.lambdas;
    let lp = eigen_decompose(system, u_plus)?.lambdas;
    for (i, l) in lm.iter().chain(lp.iter()).enumerate() {
        if (l - s).abs() < CHAR_TOL {
            return Err(Error::Characteristic {
                family: i % lm.len() + 1,
                gap: (l - s).abs(),
            });
        }
    }
    let n = lm.len();
    for k in 1..=n {
        let left_ok = (k == 1 || lm[k - 2] < s) && s < lm[k - 1];
        let right_ok = lp[k - 1] < s && (k == n || s < lp[k]);
        if left_ok && right_ok {
            let mut margin = f64::INFINITY;
            margin = margin.min(lm[k - 1] - s).min(s - lp[k - 1]);
            if k > 1 {
                margin = margin.min(s - lm[k - 2]);
            }
            if k < n {
                margin = margin.min(lp[k] - s);
            }
            return Ok(LaxShock { k, margin });
        }
    }
    Err(Error::NotLax { speed: s })
}

/// `det(r_1⁻, …, r_{k−1}⁻, u⁺ − u⁻, r_{k+1}⁺, …, r_n⁺)`.
pub fn majda_liu_determinant(
    system: &HyperbolicSystem,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    k: usize,
) -> Result<f64> {
    let n = system.n();
    let em = eigen_decompose(system, u_minus)?;
    let ep = eigen_decompose(system, u_plus)?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let col = match (i + 1).cmp(&k) {
            std::cmp::Ordering::Less => em.r(i),
            std::cmp::Ordering::Equal => u_plus - u_minus,
            std::cmp::Ordering::Greater => ep.r(i),
        };
        m.set_column(i, &col);
    }
    Ok(m.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Burgers;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn burgers_rh_examples() {
        let s = HyperbolicSystem::new(Burgers::plain());
        assert_eq!(rankine_hugoniot_residual(&s, &v(1.0), &v(-1.0), 0.0)[0], 0.0);
        assert_eq!(rankine_hugoniot_residual(&s, &v(1.0), &v(0.0), 0.5)[0], 0.0);
        assert_eq!(rankine_hugoniot_residual(&s, &v(0.3), &v(0.3), 7.0)[0], 0.0);
    }

    #[test]
    fn burgers_lax() {
        let s = HyperbolicSystem::new(Burgers::plain());
        let l = lax_family(&s, &v(1.0), &v(-1.0), 0.0).unwrap();
        assert_eq!(l.k, 1);
        assert_eq!(l.margin, 1.0);
        assert!(matches!(
            lax_family(&s, &v(-1.0), &v(1.0), 0.0),
            Err(Error::NotLax { .. })
        ));
        assert!(matches!(
            lax_family(&s, &v(1.0), &v(0.0), 0.0),
            Err(Error::Characteristic { .. })
        ));
        let d = majda_liu_determinant(&s, &v(1.0), &v(-1.0), 1).unwrap();
        assert_eq!(d, -2.0);
    }
}

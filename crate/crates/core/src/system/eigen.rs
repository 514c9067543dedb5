use super::HyperbolicSystem;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Real diagonalisation `df(u) = P diag(λ) P⁻¹` with ascending `λ`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub lambdas: Vec<f64>,
    pub p: DMatrix<f64>,
    pub p_inv: DMatrix<f64>,
}

impl Eigen {
    /// Right eigenvector `r_i` (column `i` of `P`).
    pub fn r(&self, i: usize) -> DVector<f64> {
        self.p.column(i).into_owned()
    }
}

const GAP_TOL: f64 = 1e-12;

/// Decompose an arbitrary real matrix with real, simple spectrum.
pub fn decompose_matrix(a: &DMatrix<f64>, state: &[f64]) -> Result<Eigen> {
    let n = a.nrows();
    let fail = |reason: String| Error::NotStrictlyHyperbolic {
        state: state.to_vec(),
        reason,
    };
    let scale = a.amax().max(1.0);
    let mut lambdas: Vec<f64> = if n == 1 {
        vec![a[(0, 0)]]
    } else if n == 2 {
        let tr = a[(0, 0)] + a[(1, 1)];
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let disc = 0.25 * tr * tr - det;
        if disc < 0.0 {
            return Err(fail(format!("complex eigenvalue pair (discriminant {disc:e})")));
        }
        let r = disc.sqrt();
        // Stable root pair.
        let big = 0.5 * tr + r.copysign(tr);
        let other = if big != 0.0 { det / big } else { 0.5 * tr - r.copysign(tr) };
        vec![big, other]
    } else {
        let ev = a.complex_eigenvalues();
        let mut v = Vec::with_capacity(n);
        for z in ev.iter() {
            if z.im.abs() > 1e-10 * scale {
                return Err(fail(format!("complex eigenvalue {z}")));
            }
            v.push(z.re);
        }
        v
    };
    lambdas.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for w in lambdas.windows(2) {
        if (w[1] - w[0]).abs() < GAP_TOL * scale {
            return Err(fail(format!("eigenvalue gap {:e}", w[1] - w[0])));
        }
    }
    let mut p = DMatrix::zeros(n, n);
    for (i, &l) in lambdas.iter().enumerate() {
        let m = a - DMatrix::identity(n, n) * l;
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("v_t requested");
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, &s)| if s < bv { (k, s) } else { (bk, bv) });
        let mut r: DVector<f64> = vt.row(k).transpose().into_owned();
        r /= r.norm();
        let first = r.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        if first < 0.0 {
            r = -r;
        }
        p.set_column(i, &r);
    }
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| fail("eigenvector matrix is singular".into()))?;
    Ok(Eigen { lambdas, p, p_inv })
}

/// Diagonalise `df(u)`; fails unless the spectrum is real and simple.
pub fn eigen_decompose(system: &HyperbolicSystem, u: &DVector<f64>) -> Result<Eigen> {
    decompose_matrix(&system.df(u), u.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Burgers, SaintVenant};

    #[test]
    fn burgers_scalar() {
        let s = HyperbolicSystem::new(Burgers::plain());
        let e = eigen_decompose(&s, &DVector::from_vec(vec![0.5])).unwrap();
        assert_eq!(e.lambdas, vec![0.5]);
        assert_eq!(e.p[(0, 0)], 1.0);
    }

    #[test]
    fn saint_venant_at_rest() {
        let s = HyperbolicSystem::new(SaintVenant {
            g_cos: 1.0,
            g_sin: 0.0,
            c_f: 0.0,
        });
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let e = eigen_decompose(&s, &u).unwrap();
        // Characteristic polynomial λ² − tr λ + det with df = [[0,1],[1,0]].
        let df = s.df(&u);
        let tr = df.trace();
        let det = df.determinant();
        let roots = [
            0.5 * (tr - (tr * tr - 4.0 * det).sqrt()),
            0.5 * (tr + (tr * tr - 4.0 * det).sqrt()),
        ];
        assert!((e.lambdas[0] - roots[0]).abs() < 1e-14 && (e.lambdas[1] - roots[1]).abs() < 1e-14);
        assert!((e.lambdas[0] + 1.0).abs() < 1e-14);
        for i in 0..2 {
            assert!(e.p[(0, i)] > 0.0);
            assert!((e.r(i).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_pair_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(
            decompose_matrix(&a, &[0.0]),
            Err(Error::NotStrictlyHyperbolic { .. })
        ));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(decompose_matrix(&a, &[0.0]).is_err());
    }
}

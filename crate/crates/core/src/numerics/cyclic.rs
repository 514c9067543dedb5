//! Periodic (cyclic) tridiagonal systems, factored once and solved by the
//! Thomas algorithm with a Sherman–Morrison correction for the corners.

/// Row `i` reads `lower[i] x[i−1] + diag[i] x[i] + upper[i] x[i+1] = d[i]`
/// with indices taken modulo `n`.
#[derive(Debug, Clone)]
pub struct CyclicTridiagonal {
    lower: Vec<f64>,
    cp: Vec<f64>,
    denom: Vec<f64>,
    corner: f64,
    z: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 3 && lower.len() == n && upper.len() == n, "cyclic system needs n ≥ 3 rows");
        let gamma = -diag[0];
        // A = A' + u vᵀ with u = (γ, 0, …, 0, upper[n−1]), v = (1, 0, …, 0, lower[0]/γ).
        let corner = lower[0] / gamma;
        let mut d = diag.to_vec();
        d[0] -= gamma;
        d[n - 1] -= upper[n - 1] * corner;
        let mut cp = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = d[0];
        cp[0] = upper[0] / denom[0];
        for i in 1..n {
            denom[i] = d[i] - lower[i] * cp[i - 1];
            cp[i] = upper[i] / denom[i];
        }
        let mut s = Self {
            lower: lower.to_vec(),
            cp,
            denom,
            corner,
            z: Vec::new(),
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = upper[n - 1];
        s.thomas(&mut u);
        s.z = u;
        s
    }

    /// Constant coefficients `a x[i−1] + b x[i] + a x[i+1]`.
    pub fn symmetric(n: usize, a: f64, b: f64) -> Self {
        let off = vec![a; n];
        Self::new(&off, &vec![b; n], &off)
    }

    fn thomas(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] /= self.denom[0];
        for i in 1..n {
            d[i] = (d[i] - self.lower[i] * d[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }

    /// Overwrite `d` with the solution.
    pub fn solve(&self, d: &mut [f64]) {
        let n = d.len();
        self.thomas(d);
        let v_y = d[0] + self.corner * d[n - 1];
        let v_z = self.z[0] + self.corner * self.z[n - 1];
        let f = v_y / (1.0 + v_z);
        for (di, zi) in d.iter_mut().zip(&self.z) {
            *di -= f * zi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(l: &[f64], d: &[f64], u: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| l[i] * x[(i + n - 1) % n] + d[i] * x[i] + u[i] * x[(i + 1) % n])
            .collect()
    }

    #[test]
    fn symmetric_matches_dense() {
        let n = 7;
        let (a, b) = (-0.3, 1.7);
        let s = CyclicTridiagonal::symmetric(n, a, b);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.2).collect();
        let mut x = rhs.clone();
        s.solve(&mut x);
        let back = apply(&vec![a; n], &vec![b; n], &vec![a; n], &x);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn variable_rows_match_dense() {
        let n = 9;
        let l: Vec<f64> = (0..n).map(|i| -0.2 - 0.05 * i as f64).collect();
        let u: Vec<f64> = (0..n).map(|i| -0.4 + 0.03 * (i as f64).cos()).collect();
        let d: Vec<f64> = (0..n).map(|i| 1.5 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (0.7 * i as f64).cos()).collect();
        let mut x = rhs.clone();
        CyclicTridiagonal::new(&l, &d, &u).solve(&mut x);
        let back = apply(&l, &d, &u, &x);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-13, "row {i}");
        }
    }
}

//! Layer polynomials `D(ξ)`: the outer Taylor expansion seen from inside the
//! layer, quadratic in `ξ` on each side and joined by a quintic on `[−1, 1]`.

use crate::numerics::hermite::quintic_segment;
use nalgebra::DVector;

/// `D(ξ) = c0± + c1± ξ + c2± ξ²` for `±ξ ≥ 1`, `C²` quintic blend in between.
#[derive(Debug, Clone)]
pub struct LayerPoly {
    minus: [DVector<f64>; 3],
    plus: [DVector<f64>; 3],
}

impl LayerPoly {
    pub fn new(minus: [DVector<f64>; 3], plus: [DVector<f64>; 3]) -> Self {
        Self { minus, plus }
    }

    /// `D(ξ) = ξ·slope±`.
    pub fn linear(slope_minus: &DVector<f64>, slope_plus: &DVector<f64>) -> Self {
        let z = DVector::zeros(slope_minus.len());
        Self::new(
            [z.clone(), slope_minus.clone(), z.clone()],
            [z.clone(), slope_plus.clone(), z],
        )
    }

    fn side(c: &[DVector<f64>; 3], xi: f64) -> [DVector<f64>; 3] {
        [
            &c[0] + &c[1] * xi + &c[2] * (xi * xi),
            &c[1] + &c[2] * (2.0 * xi),
            &c[2] * 2.0,
        ]
    }

    /// `(D, D', D'')` at `ξ`.
    pub fn eval(&self, xi: f64) -> [DVector<f64>; 3] {
        if xi >= 1.0 {
            return Self::side(&self.plus, xi);
        }
        if xi <= -1.0 {
            return Self::side(&self.minus, xi);
        }
        let a = Self::side(&self.minus, -1.0);
        let b = Self::side(&self.plus, 1.0);
        let n = a[0].len();
        let mut out = [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)];
        for c in 0..n {
            let s = quintic_segment(-1.0, 1.0, [a[0][c], a[1][c], a[2][c]], [b[0][c], b[1][c], b[2][c]], xi);
            for k in 0..3 {
                out[k][c] = s[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuity_at_the_joins() {
        let d = LayerPoly::new(
            [DVector::from_vec(vec![0.3]), DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-0.2])],
            [DVector::from_vec(vec![-0.1]), DVector::from_vec(vec![2.0]), DVector::from_vec(vec![0.5])],
        );
        for &x in &[-1.0f64, 1.0] {
            let inside = d.eval(x * (1.0 - 1e-12));
            let outside = d.eval(x * (1.0 + 1e-12));
            for k in 0..3 {
                assert!((inside[k][0] - outside[k][0]).abs() < 1e-9);
            }
        }
        let lin = LayerPoly::linear(&DVector::from_vec(vec![1.0]), &DVector::from_vec(vec![1.0]));
        for &x in &[-3.0, -0.4, 0.0, 0.7, 5.0] {
            assert!((lin.eval(x)[0][0] - x).abs() < 1e-14);
        }
    }
}

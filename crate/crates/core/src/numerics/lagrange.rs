//! Local Lagrange interpolation on uniform grids, with first and second
//! derivatives of the interpolant.

/// Weights of the `p`-point Lagrange interpolant through `x0 + h·(start..start+p)`
/// evaluated at `x`, returned as `(start, [w, w', w''])`.
///
/// The stencil is centred on `x` and clamped to `0..n`.
pub fn stencil(x0: f64, h: f64, n: usize, x: f64, p: usize) -> (usize, [Vec<f64>; 3]) {
    let p = p.min(n);
    let s = (x - x0) / h;
    let centre = s.floor() as i64 - (p as i64 - 1) / 2;
    let start = centre.clamp(0, (n - p) as i64) as usize;
    let nodes: Vec<f64> = (0..p).map(|i| (start + i) as f64).collect();
    let w = weights(&nodes, s);
    let scale = [1.0, 1.0 / h, 1.0 / (h * h)];
    let mut out = w;
    for (k, row) in out.iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v *= scale[k];
        }
    }
    (start, out)
}

/// Lagrange basis values and first two derivatives at `x` for arbitrary
/// distinct nodes.
pub fn weights(nodes: &[f64], x: f64) -> [Vec<f64>; 3] {
    let p = nodes.len();
    let mut w0 = vec![0.0; p];
    let mut w1 = vec![0.0; p];
    let mut w2 = vec![0.0; p];
    for i in 0..p {
        let denom: f64 = (0..p).filter(|&j| j != i).map(|j| nodes[i] - nodes[j]).product();
        let others: Vec<f64> = (0..p).filter(|&j| j != i).map(|j| x - nodes[j]).collect();
        let m = others.len();
        w0[i] = others.iter().product::<f64>() / denom;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for a in 0..m {
            let mut pa = 1.0;
            for (b, o) in others.iter().enumerate() {
                if b != a {
                    pa *= o;
                }
            }
            d1 += pa;
            for b in 0..m {
                if b == a {
                    continue;
                }
                let mut pab = 1.0;
                for (c, o) in others.iter().enumerate() {
                    if c != a && c != b {
                        pab *= o;
                    }
                }
                d2 += pab;
            }
        }
        w1[i] = d1 / denom;
        w2[i] = d2 / denom;
    }
    [w0, w1, w2]
}

/// Vector-valued samples at uniformly spaced times, interpolated with
/// cubic Lagrange polynomials.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, dim: usize) -> Self {
        Self { t0, dt, dim, data: Vec::new() }
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        self.data.extend_from_slice(v);
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.len() - 1) as f64
    }

    /// Derivative of order `k ≤ 2` of the interpolant at `t` (clamped to
    /// the sampled range).
    pub fn eval(&self, t: f64, k: usize) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return if k == 0 { self.sample(0).to_vec() } else { vec![0.0; self.dim] };
        }
        let t = t.clamp(self.t0, self.t_end());
        let (start, w) = stencil(self.t0, self.dt, n, t, 4);
        let mut out = vec![0.0; self.dim];
        for (i, wi) in w[k].iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.sample(start + i)) {
                *o += wi * v;
            }
        }
        out
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        self.eval(t, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_reproduced() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let mut ts = TimeSeries::new(0.0, 0.1, 1);
        for i in 0..11 {
            ts.push(&[f(0.1 * i as f64)]);
        }
        for &t in &[0.0, 0.03, 0.55, 0.97, 1.0] {
            assert!((ts.eval(t, 0)[0] - f(t)).abs() < 1e-13);
            assert!((ts.eval(t, 1)[0] - (-2.0 + 1.5 * t * t)).abs() < 1e-11);
            assert!((ts.eval(t, 2)[0] - 3.0 * t).abs() < 1e-9);
        }
    }

    #[test]
    fn six_point_second_derivative() {
        let (start, w) = stencil(0.0, 0.05, 40, 0.7321, 6);
        let d2: f64 = w[2].iter().enumerate().map(|(i, wi)| wi * (0.05 * (start + i) as f64).sin()).sum();
        assert!((d2 + 0.7321f64.sin()).abs() < 1e-6);
    }
}

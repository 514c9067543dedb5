//! Piecewise quintic Hermite interpolation of vector-valued data on a uniform
//! grid, given values and first and second derivatives at the nodes.

/// Quintic Hermite basis weights at `t ∈ [0,1]` for (value, d/dt, d²/dt²).
/// Order of the six weights: p0, p0', p0'', p1, p1', p1''.
fn basis(t: f64) -> [[f64; 6]; 3] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ],
        [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ],
        [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
        ],
    ]
}

/// Value weights of the quintic Hermite basis at `t ∈ [0,1]`, in the order
/// p0, p0', p0'', p1, p1', p1'' (derivative data scaled to the unit interval).
pub fn value_weights(t: f64) -> [f64; 6] {
    basis(t)[0]
}

/// Scalar quintic Hermite on a single interval `[a, b]`.
pub fn quintic_segment(a: f64, b: f64, pa: [f64; 3], pb: [f64; 3], x: f64) -> [f64; 3] {
    let h = b - a;
    let w = basis((x - a) / h);
    let c = [pa[0], pa[1] * h, pa[2] * h * h, pb[0], pb[1] * h, pb[2] * h * h];
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (0..6).map(|i| w[k][i] * c[i]).sum::<f64>() / h.powi(k as i32);
    }
    out
}

/// Vector-valued samples `u(x_i)`, `u'(x_i)`, `u''(x_i)` on a uniform grid.
#[derive(Debug, Clone)]
pub struct HermiteGrid {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
    /// Node-major storage: `val[i * n + c]`.
    pub val: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl HermiteGrid {
    pub fn new(x0: f64, h: f64, n: usize, val: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        assert_eq!(val.len() % n, 0);
        assert_eq!(val.len(), d1.len());
        assert_eq!(val.len(), d2.len());
        assert!(val.len() / n >= 2);
        Self {
            x0,
            h,
            n,
            val,
            d1,
            d2,
        }
    }

    pub fn nodes(&self) -> usize {
        self.val.len() / self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.nodes() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    pub fn value_at_node(&self, i: usize) -> &[f64] {
        &self.val[i * self.n..(i + 1) * self.n]
    }

    /// Interpolated value and derivatives at `x`, clamped to the grid range.
    /// Writes into `out[0..3n]` as (value, first, second derivative) blocks.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = self.n;
        let m = self.nodes();
        let s = ((x - self.x0) / self.h).clamp(0.0, (m - 1) as f64);
        let i = (s.floor() as usize).min(m - 2);
        let t = s - i as f64;
        let w = basis(t);
        let h = self.h;
        let (a, b) = (i * n, (i + 1) * n);
        for c in 0..n {
            let coef = [
                self.val[a + c],
                self.d1[a + c] * h,
                self.d2[a + c] * h * h,
                self.val[b + c],
                self.d1[b + c] * h,
                self.d2[b + c] * h * h,
            ];
            for k in 0..3 {
                let s: f64 = (0..6).map(|j| w[k][j] * coef[j]).sum();
                out[k * n + c] = s / h.powi(k as i32);
            }
        }
    }

    /// Interpolated value only.
    pub fn value(&self, x: f64) -> Vec<f64> {
        let mut o = vec![0.0; 3 * self.n];
        self.eval_into(x, &mut o);
        o.truncate(self.n);
        o
    }
}

//! Smooth cutoffs built from `ψ(x) = e^{−1/x}`.
//!
//! Every function here returns `[value, first derivative, second derivative]`.

/// `ψ(x) = e^{−1/x}` for `x > 0`, zero otherwise.
fn psi(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    let p = (-1.0 / x).exp();
    let r = 1.0 / x;
    [p, p * r * r, p * (r.powi(4) - 2.0 * r.powi(3))]
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, `ψ(x)/(ψ(x) + ψ(1−x))` between.
pub fn smoothstep(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let [a, a1, a2] = psi(x);
    let [b, pb1, pb2] = psi(1.0 - x);
    let (b1, b2) = (-pb1, pb2);
    let d = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    let d1 = a1 + b1;
    [a / d, num / (d * d), (num1 * d - 2.0 * num * d1) / (d * d * d)]
}

/// One-sided cutoff `K⁺`: 0 on `z ≤ 1`, 1 on `z ≥ 2`.
pub fn k_plus(z: f64) -> [f64; 3] {
    let [s, s1, s2] = smoothstep(2.0 - z);
    [1.0 - s, s1, -s2]
}

/// `K⁻(z) = K⁺(−z)`: 1 on `z ≤ −2`, 0 on `z ≥ −1`.
pub fn k_minus(z: f64) -> [f64; 3] {
    let [k, k1, k2] = k_plus(-z);
    [k, -k1, k2]
}

/// Even bump `μ = (1 − K⁺)(1 − K⁻)`: 1 on `|x| ≤ 1`, 0 on `|x| ≥ 2`.
pub fn mu(x: f64) -> [f64; 3] {
    let [s, s1, s2] = smoothstep(2.0 - x.abs());
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    [s, -sign * s1, s2]
}

/// Cutoff configuration of the assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffConfig {
    /// Exponent of the matching zone width `ε^γ`, in `(2/3, 1)`.
    pub gamma: f64,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self { gamma: 0.75 }
    }
}

impl CutoffConfig {
    pub fn new(gamma: f64) -> crate::Result<Self> {
        if !(gamma > 2.0 / 3.0 && gamma < 1.0) {
            return Err(crate::Error::Config(format!("gamma must lie in (2/3, 1), got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// Inner zone half-width `ε^γ`.
    pub fn width(&self, epsilon: f64) -> f64 {
        epsilon.powf(self.gamma)
    }
}

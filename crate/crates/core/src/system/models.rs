use super::BalanceLaw;

/// Scalar Burgers flux `u²/2` with affine source `g(u) = rate·(u − offset)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burgers {
    pub rate: f64,
    pub offset: f64,
}

impl Burgers {
    /// Inviscid Burgers without source.
    pub fn plain() -> Self {
        Self {
            rate: 0.0,
            offset: 0.0,
        }
    }
}

impl BalanceLaw for Burgers {
    fn dim(&self) -> usize {
        1
    }
    fn name(&self) -> String {
        format!("burgers(rate={}, offset={})", self.rate, self.offset)
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * u[0] * u[0];
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.rate * (u[0] - self.offset);
    }
    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn source_jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out[0] = self.rate;
    }
    fn flux_hessian(&self, _u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        out[0] = a[0] * b[0];
    }
    fn source_hessian(&self, _u: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn flux_third(&self, _u: &[f64], _v: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Linear scalar law `u_t + (a u)_x = b u`; with `a = b = 0` the viscous
/// equation is the heat equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScalar {
    pub speed: f64,
    pub rate: f64,
}

impl BalanceLaw for LinearScalar {
    fn dim(&self) -> usize {
        1
    }
    fn name(&self) -> String {
        format!("linear(speed={}, rate={})", self.speed, self.rate)
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.speed * u[0];
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.rate * u[0];
    }
    fn flux_jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out[0] = self.speed;
    }
    fn source_jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out[0] = self.rate;
    }
    fn flux_hessian(&self, _u: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn source_hessian(&self, _u: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn flux_third(&self, _u: &[f64], _v: &[f64], _a: &[f64], _b: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Inclined shallow-water (Saint-Venant) equations in conservative variables
/// `(h, q = h·u)`:
///
/// `h_t + q_x = 0`,
/// `q_t + (G h²/2 + q²/h)_x = S h − c_f q²/h²`,
///
/// with `G = g cos θ` and `S = g sin θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaintVenant {
    pub g_cos: f64,
    pub g_sin: f64,
    pub c_f: f64,
}

impl BalanceLaw for SaintVenant {
    fn dim(&self) -> usize {
        2
    }
    fn name(&self) -> String {
        format!(
            "saint-venant(G={}, S={}, c_f={})",
            self.g_cos, self.g_sin, self.c_f
        )
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        out[0] = q;
        out[1] = 0.5 * self.g_cos * h * h + q * q / h;
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        out[0] = 0.0;
        out[1] = self.g_sin * h - self.c_f * q * q / (h * h);
    }
    fn flux_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        out[0] = 0.0;
        out[1] = 1.0;
        out[2] = self.g_cos * h - q * q / (h * h);
        out[3] = 2.0 * q / h;
    }
    fn source_jacobian(&self, u: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = self.g_sin + 2.0 * self.c_f * q * q / (h * h * h);
        out[3] = -2.0 * self.c_f * q / (h * h);
    }
    fn flux_hessian(&self, u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        let fhh = self.g_cos + 2.0 * q * q / (h * h * h);
        let fhq = -2.0 * q / (h * h);
        let fqq = 2.0 / h;
        out[0] = 0.0;
        out[1] = fhh * a[0] * b[0] + fhq * (a[0] * b[1] + a[1] * b[0]) + fqq * a[1] * b[1];
    }
    fn source_hessian(&self, u: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        let c = self.c_f;
        let ghh = -6.0 * c * q * q / h.powi(4);
        let ghq = 4.0 * c * q / h.powi(3);
        let gqq = -2.0 * c / (h * h);
        out[0] = 0.0;
        out[1] = ghh * a[0] * b[0] + ghq * (a[0] * b[1] + a[1] * b[0]) + gqq * a[1] * b[1];
    }
    fn flux_third(&self, u: &[f64], v: &[f64], a: &[f64], b: &[f64], out: &mut [f64]) {
        let (h, q) = (u[0], u[1]);
        // Derivatives of (fhh, fhq, fqq) with respect to h and q.
        let fhh_h = -6.0 * q * q / h.powi(4);
        let fhh_q = 4.0 * q / h.powi(3);
        let fhq_h = 4.0 * q / h.powi(3);
        let fhq_q = -2.0 / (h * h);
        let fqq_h = -2.0 / (h * h);
        let fqq_q = 0.0;
        let dfhh = fhh_h * v[0] + fhh_q * v[1];
        let dfhq = fhq_h * v[0] + fhq_q * v[1];
        let dfqq = fqq_h * v[0] + fqq_q * v[1];
        out[0] = 0.0;
        out[1] = dfhh * a[0] * b[0] + dfhq * (a[0] * b[1] + a[1] * b[0]) + dfqq * a[1] * b[1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian<F: Fn(&[f64], &mut [f64])>(f: F, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let h = 1e-6 * u[j].abs().max(1.0);
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += h;
            um[j] -= h;
            let mut fp = vec![0.0; n];
            let mut fm = vec![0.0; n];
            f(&up, &mut fp);
            f(&um, &mut fm);
            for i in 0..n {
                out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn saint_venant_derivatives_match_differences() {
        let sv = SaintVenant {
            g_cos: 1.0,
            g_sin: 0.1,
            c_f: 0.01,
        };
        let u = [1.3, 2.1];
        let mut j = vec![0.0; 4];
        sv.flux_jacobian(&u, &mut j);
        let jf = fd_jacobian(|v, o| sv.flux(v, o), &u);
        for k in 0..4 {
            assert!((j[k] - jf[k]).abs() < 1e-7 * (1.0 + j[k].abs()));
        }
        sv.source_jacobian(&u, &mut j);
        let jg = fd_jacobian(|v, o| sv.source(v, o), &u);
        for k in 0..4 {
            assert!((j[k] - jg[k]).abs() < 1e-7 * (1.0 + j[k].abs()));
        }
        // Hessians and third derivative against the generic defaults.
        #[derive(Debug)]
        struct Fd(SaintVenant);
        impl BalanceLaw for Fd {
            fn dim(&self) -> usize {
                2
            }
            fn name(&self) -> String {
                "fd".into()
            }
            fn flux(&self, u: &[f64], o: &mut [f64]) {
                self.0.flux(u, o)
            }
            fn source(&self, u: &[f64], o: &mut [f64]) {
                self.0.source(u, o)
            }
            fn flux_jacobian(&self, u: &[f64], o: &mut [f64]) {
                self.0.flux_jacobian(u, o)
            }
            fn source_jacobian(&self, u: &[f64], o: &mut [f64]) {
                self.0.source_jacobian(u, o)
            }
        }
        let fd = Fd(sv);
        let (a, b, v) = ([0.3, -0.7], [1.1, 0.4], [-0.2, 0.9]);
        let mut x = [0.0; 2];
        let mut y = [0.0; 2];
        sv.flux_hessian(&u, &a, &b, &mut x);
        fd.flux_hessian(&u, &a, &b, &mut y);
        assert!((x[1] - y[1]).abs() < 1e-6);
        sv.source_hessian(&u, &a, &b, &mut x);
        fd.source_hessian(&u, &a, &b, &mut y);
        assert!((x[1] - y[1]).abs() < 1e-6);
        sv.flux_third(&u, &v, &a, &b, &mut x);
        fd.flux_third(&u, &v, &a, &b, &mut y);
        assert!((x[1] - y[1]).abs() < 1e-5);
    }
}

//! Banded LU factorisation with partial pivoting.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Storage keeps
/// `kl` extra super-diagonals for the fill-in created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    w: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            w,
            a: vec![0.0; n * w],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let off = j + self.kl - i;
        debug_assert!(off < self.w, "entry ({i},{j}) outside band");
        i * self.w + off
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j + self.kl - i < self.w - self.kl, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    /// Solve `A x = b`, consuming the matrix.
    pub fn solve(self, b: Vec<f64>) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(b))
    }

    /// LU factorisation with partial pivoting, reusable for several
    /// right-hand sides.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.w - 1 - kl;
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0usize; n];
        for c in 0..n {
            let last = (c + kl).min(n - 1);
            let mut p = c;
            let mut best = self.a[self.idx(c, c)].abs();
            for r in c + 1..=last {
                let v = self.a[self.idx(r, c)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-300 || best < 1e-20 * scale {
                return Err(Error::Integration(format!("singular band matrix at column {c}")));
            }
            piv[c] = p;
            let cmax = (c + reach).min(n - 1);
            if p != c {
                for j in c..=cmax {
                    let (ia, ib) = (self.idx(c, j), self.idx(p, j));
                    self.a.swap(ia, ib);
                }
            }
            let d = self.a[self.idx(c, c)];
            for r in c + 1..=last {
                let ir = self.idx(r, c);
                let m = self.a[ir] / d;
                // The multiplier is kept in the eliminated slot.
                self.a[ir] = m;
                if m == 0.0 {
                    continue;
                }
                for j in c + 1..=cmax {
                    let (ic, irj) = (self.idx(c, j), self.idx(r, j));
                    self.a[irj] -= m * self.a[ic];
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factorised band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let kl = m.kl;
        let reach = m.w - 1 - kl;
        for c in 0..n {
            let p = self.piv[c];
            if p != c {
                b.swap(c, p);
            }
            let last = (c + kl).min(n - 1);
            for r in c + 1..=last {
                let mult = m.a[m.idx(r, c)];
                if mult != 0.0 {
                    b[r] -= mult * b[c];
                }
            }
        }
        for c in (0..n).rev() {
            let cmax = (c + reach).min(n - 1);
            let mut s = b[c];
            for j in c + 1..=cmax {
                s -= m.a[m.idx(c, j)] * b[j];
            }
            b[c] = s / m.a[m.idx(c, c)];
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_with_pivoting() {
        // Zero diagonal in the first row forces a row interchange.
        let n = 6;
        let mut m = BandMatrix::zeros(n, 1, 1);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            let d = if i == 0 { 0.0 } else { 2.0 + i as f64 };
            m.add(i, i, d);
            dense[i][i] = d;
            if i + 1 < n {
                m.add(i, i + 1, 1.0);
                m.add(i + 1, i, -1.5);
                dense[i][i + 1] = 1.0;
                dense[i + 1][i] = -1.5;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum()).collect();
        let x = m.solve(b).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }
}

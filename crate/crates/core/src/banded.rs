//! Real banded matrices with an LU factorization using partial pivoting.
//!
//! Rows are stored with a window of `kl + ku + kl + 1` entries starting at
//! column `row - kl`, which leaves room for the fill-in produced by row
//! interchanges (the upper bandwidth of U grows to `ku + kl`).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl, "({r},{c}) outside band");
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn in_band(&self, r: usize, c: usize) -> bool {
        c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl >= r && c <= r + self.ku + self.kl && c < self.n {
            self.data[self.idx(r, c)]
        } else {
            0.0
        }
    }

    /// Adds `v` at (r, c). Panics if the entry lies outside the declared band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band kl={} ku={}", self.kl, self.ku);
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside band kl={} ku={}", self.kl, self.ku);
        let i = self.idx(r, c);
        self.data[i] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    /// In-place LU factorization with row partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut scale = 0.0f64;
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= scale * 1e-300 || !best.is_finite() {
                return Err(Error::NonConvergence {
                    what: "banded LU (singular Jacobian)",
                    iterations: k,
                    residual: best,
                });
            }
            piv[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let factor = self.data[ir] / pivot;
                self.data[ir] = factor;
                if factor != 0.0 {
                    for c in k + 1..=last_col {
                        let v = self.data[self.idx(k, c)];
                        let i = self.idx(r, c);
                        self.data[i] -= factor * v;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + m.kl).min(n - 1) {
                    b[r] -= m.data[m.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + m.ku + m.kl).min(n - 1) {
                acc -= m.data[m.idx(k, c)] * b[c];
            }
            b[k] = acc / m.data[m.idx(k, k)];
        }
    }
}

/// LDLᵀ factorization of a symmetric positive definite pentadiagonal
/// matrix; no pivoting, flat storage, for the hot loop of time stepping.
#[derive(Debug, Clone)]
pub struct SymPentaLdl {
    l1: Vec<f64>,
    l2: Vec<f64>,
    inv_d: Vec<f64>,
}

impl SymPentaLdl {
    /// `diag[i] = A[i][i]`, `off1[i] = A[i][i-1]`, `off2[i] = A[i][i-2]`
    /// (leading entries of the off-diagonals are ignored).
    pub fn factor(diag: &[f64], off1: &[f64], off2: &[f64]) -> Result<Self> {
        let n = diag.len();
        if off1.len() != n || off2.len() != n {
            return Err(Error::InvalidInput("pentadiagonal bands must have equal length".into()));
        }
        let (mut l1, mut l2, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            if i >= 2 {
                l2[i] = off2[i] / d[i - 2];
            }
            if i >= 1 {
                let fill = if i >= 2 { l2[i] * d[i - 2] * l1[i - 1] } else { 0.0 };
                l1[i] = (off1[i] - fill) / d[i - 1];
            }
            d[i] = diag[i]
                - if i >= 2 { l2[i] * l2[i] * d[i - 2] } else { 0.0 }
                - if i >= 1 { l1[i] * l1[i] * d[i - 1] } else { 0.0 };
            if !(d[i] > 0.0) {
                return Err(Error::InvalidInput(format!("pentadiagonal matrix not positive definite at row {i}")));
            }
        }
        let inv_d = d.iter().map(|v| 1.0 / v).collect();
        Ok(Self { l1, l2, inv_d })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = b.len();
        assert_eq!(n, self.inv_d.len());
        if n >= 2 {
            b[1] -= self.l1[1] * b[0];
        }
        for i in 2..n {
            b[i] -= self.l1[i] * b[i - 1] + self.l2[i] * b[i - 2];
        }
        for (v, s) in b.iter_mut().zip(&self.inv_d) {
            *v *= s;
        }
        if n >= 2 {
            b[n - 2] -= self.l1[n - 1] * b[n - 1];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] -= self.l1[i + 1] * b[i + 1] + self.l2[i + 2] * b[i + 2];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_random_banded_system_against_dense() {
        let (n, kl, ku) = (40, 3, 2);
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                // Weak diagonal forces genuine pivoting.
                let v = rnd();
                a.set(r, c, v);
                dense[(r, c)] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul_vec(&x_true);
        let lu = a.factor().unwrap();
        lu.solve_in_place(&mut b);
        let err = b.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
        let xd = dense.lu().solve(&nalgebra::DVector::from_vec(x_true.clone())).is_some();
        assert!(xd);
    }

    #[test]
    fn singular_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(1, 0, 1.0);
        assert!(a.factor().is_err());
    }
    #[test]
    fn pentadiagonal_ldl_matches_band_lu() {
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| 7.0 + (i % 3) as f64).collect();
        let off1: Vec<f64> = (0..n).map(|i| -2.0 + 0.1 * i as f64 / n as f64).collect();
        let off2: Vec<f64> = (0..n).map(|i| 0.5 - 0.01 * i as f64).collect();
        let mut a = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            a.set(i, i, diag[i]);
            if i >= 1 {
                a.set(i, i - 1, off1[i]);
                a.set(i - 1, i, off1[i]);
            }
            if i >= 2 {
                a.set(i, i - 2, off2[i]);
                a.set(i - 2, i, off2[i]);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x1 = b.clone();
        a.clone().factor().unwrap().solve_in_place(&mut x1);
        let mut x2 = b.clone();
        SymPentaLdl::factor(&diag, &off1, &off2).unwrap().solve_in_place(&mut x2);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}

//! Small dense linear algebra: a scalar abstraction shared by the
//! integrators, an in-place LU for tiny systems, and 4x4 complex
//! eigen-decompositions with a reproducible eigenvector normalization.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat4 = Matrix4<C64>;
pub type CVec4 = Vector4<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Field scalar used by the generic integrators and LU.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Default
    + std::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Row-major LU with partial pivoting for small n x n systems.
#[derive(Debug, Clone)]
pub struct SmallLu<T: Scalar> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> SmallLu<T> {
    /// Factor `a` (row-major, n*n). Fails on an exactly singular pivot.
    pub fn factor(n: usize, a: Vec<T>) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = Self {
            n,
            lu: a,
            piv: vec![0; n],
        };
        lu.refactor()?;
        Ok(lu)
    }

    /// Zero matrix of size n, to be filled through [`SmallLu::matrix_mut`]
    /// and factored with [`SmallLu::refactor`]; avoids reallocation in loops.
    pub fn with_size(n: usize) -> Self {
        Self {
            n,
            lu: vec![T::zero(); n * n],
            piv: vec![0; n],
        }
    }

    pub fn matrix_mut(&mut self) -> &mut [T] {
        &mut self.lu
    }

    pub fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let a = &mut self.lu;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].modulus();
            for r in k + 1..n {
                let v = a[r * n + k].modulus();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::InvalidInput("singular matrix in LU".into()));
            }
            self.piv[k] = p;
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                for c in k + 1..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= factor * v;
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for r in 0..n {
            let mut acc = b[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc -= self.lu[r * n + c] * b[c];
            }
            b[r] = acc / self.lu[r * n + r];
        }
    }
}

/// Rescale so the vector has unit 2-norm and its first component of
/// non-negligible modulus is real and positive.
pub fn normalize_phase(v: &mut CVec4) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    *v /= C64::new(norm, 0.0);
    if let Some(lead) = v.iter().copied().find(|z| z.norm() > 1e-12) {
        let phase = lead.conj() / lead.norm();
        *v *= phase;
    }
}

/// Eigen-decomposition of a 4x4 complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen4 {
    /// Ascending by real part.
    pub values: [C64; 4],
    /// Column k is the normalized right eigenvector for `values[k]`.
    pub vectors: CMat4,
    /// Smallest pairwise eigenvalue distance, relative to the spectral radius.
    pub min_gap: f64,
}

impl Eigen4 {
    pub fn vector(&self, k: usize) -> CVec4 {
        self.vectors.column(k).into_owned()
    }

    /// Number of eigenvalues with positive real part.
    pub fn unstable_count(&self) -> usize {
        self.values.iter().filter(|z| z.re > 0.0).count()
    }
}

fn null_vector(m: &CMat4) -> CVec4 {
    let dm = DMatrix::from_iterator(4, 4, m.iter().copied());
    let svd = dm.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    CVec4::from_iterator(v_t.row(k).iter().map(|z| z.conj()))
}

/// Eigenvalues from the complex Schur form. The unshifted-restart-free QR
/// iteration can cycle on exactly cyclic structures (e.g. companion-like
/// matrices with eigenvalues on a circle), so a stalled iteration is retried
/// on a fixed unitary similarity of the matrix.
fn schur_eigenvalues(a: &CMat4) -> Result<nalgebra::Vector4<C64>> {
    const MAX_ITER: usize = 500;
    if let Some(s) = nalgebra::Schur::try_new(*a, f64::EPSILON, MAX_ITER) {
        if let Some(v) = s.eigenvalues() {
            return Ok(v);
        }
    }
    for seed in 1..4 {
        // Householder reflector I - 2 u u^H / |u|^2 with a seed-dependent u.
        let u = CVec4::from_fn(|i, _| C64::new(1.0 + (i * seed) as f64 * 0.37, 0.21 * (i + seed) as f64));
        let q = CMat4::identity() - u * u.adjoint() * C64::new(2.0 / u.norm_squared(), 0.0);
        let b = q * a * q.adjoint();
        if let Some(s) = nalgebra::Schur::try_new(b, f64::EPSILON, MAX_ITER) {
            if let Some(v) = s.eigenvalues() {
                return Ok(v);
            }
        }
    }
    Err(Error::NonConvergence {
        what: "complex Schur iteration",
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

/// Dense eigen-decomposition via complex Schur form; eigenvectors from the
/// SVD null space of (A - mu I), normalized with [`normalize_phase`].
pub fn eigen4(a: &CMat4) -> Result<Eigen4> {
    let vals = schur_eigenvalues(a)?;
    let mut values = [vals[0], vals[1], vals[2], vals[3]];
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let scale = values.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut min_gap = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            min_gap = min_gap.min((values[i] - values[j]).norm() / scale);
        }
    }
    let mut vectors = CMat4::zeros();
    for (k, &mu) in values.iter().enumerate() {
        let shifted = a - CMat4::identity() * mu;
        let mut v = null_vector(&shifted);
        normalize_phase(&mut v);
        vectors.set_column(k, &v);
    }
    Ok(Eigen4 {
        values,
        vectors,
        min_gap,
    })
}

/// Left eigenvectors (rows l with l A = mu l), in the same ascending order.
pub fn left_eigen4(a: &CMat4) -> Result<Eigen4> {
    eigen4(&a.transpose())
}

/// Cosines of the principal angles between the column spans of two 4x2
/// frames, descending.
pub fn principal_cosines(a: &nalgebra::Matrix4x2<C64>, b: &nalgebra::Matrix4x2<C64>) -> [f64; 2] {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let m = qa.adjoint() * qb;
    let s = m.singular_values();
    let (s0, s1) = (s[0].min(1.0), s[1].min(1.0));
    if s0 >= s1 {
        [s0, s1]
    } else {
        [s1, s0]
    }
}

/// Largest principal angle between two 2-planes, in radians.
pub fn max_principal_angle(a: &nalgebra::Matrix4x2<C64>, b: &nalgebra::Matrix4x2<C64>) -> f64 {
    let [_, smallest] = principal_cosines(a, b);
    // arccos loses precision near 1; use the sine via the complement.
    let sin_sq = (1.0 - smallest * smallest).max(0.0);
    sin_sq.sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lu_solves() {
        let a = vec![2.0, 1.0, 1.0, 4.0, -6.0, 0.0, -2.0, 7.0, 2.0];
        let lu = SmallLu::factor(3, a.clone()).unwrap();
        let mut b = vec![5.0, -2.0, 9.0];
        lu.solve_in_place(&mut b);
        for r in 0..3 {
            let lhs: f64 = (0..3).map(|c| a[r * 3 + c] * b[c]).sum();
            assert!((lhs - [5.0, -2.0, 9.0][r]).abs() < 1e-12);
        }
        assert!(SmallLu::factor(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
    }

    #[test]
    fn eigen4_recovers_diagonalizable_matrix() {
        let d = CMat4::from_diagonal(&CVec4::new(
            C64::new(-3.0, 0.0),
            C64::new(-0.5, 1.0),
            C64::new(0.7, 0.0),
            C64::new(2.0, -1.0),
        ));
        let p = CMat4::new(
            C64::new(1.0, 0.0), C64::new(0.2, 0.1), C64::new(0.0, 0.0), C64::new(0.3, 0.0),
            C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.2),
            C64::new(0.1, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.3), C64::new(0.0, 0.0), C64::new(0.2, 0.0), C64::new(1.0, 0.0),
        );
        let a = p * d * p.try_inverse().unwrap();
        let e = eigen4(&a).unwrap();
        assert!((e.values[0] - C64::new(-3.0, 0.0)).norm() < 1e-12);
        assert!((e.values[3] - C64::new(2.0, -1.0)).norm() < 1e-12);
        assert_eq!(e.unstable_count(), 2);
        for k in 0..4 {
            let v = e.vector(k);
            assert!((a * v - v * e.values[k]).norm() < 1e-11);
            assert!((v.norm() - 1.0).abs() < 1e-14);
            let lead = v.iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
    }

    #[test]
    fn principal_angles_detect_same_plane() {
        let a = nalgebra::Matrix4x2::from_columns(&[
            CVec4::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 1.0), C64::new(0.0, 0.0)),
            CVec4::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(2.0, 0.0)),
        ]);
        let mix = nalgebra::Matrix2::new(
            C64::new(1.0, 2.0), C64::new(0.5, 0.0),
            C64::new(-1.0, 0.0), C64::new(0.0, 3.0),
        );
        let b = a * mix;
        assert!(max_principal_angle(&a, &b) < 1e-12);
        let c = nalgebra::Matrix4x2::from_columns(&[
            CVec4::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            CVec4::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        ]);
        assert!(max_principal_angle(&a, &c) > 0.1);
    }
}

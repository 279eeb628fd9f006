//! Dense real polynomials in ascending-degree coefficient form.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &a)| k as f64 * a)
                .collect::<Vec<_>>(),
        )
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &a)| a / (k as f64 + 1.0)),
        );
        Self::new(out)
    }

    /// Real roots of a polynomial of degree at most two, ascending.
    /// Returns `None` when the discriminant is not positive.
    pub fn quadratic_roots(&self) -> Option<(f64, f64)> {
        if self.degree() != 2 {
            return None;
        }
        let (c, b, a) = (self.coeffs[0], self.coeffs[1], self.coeffs[2]);
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            return None;
        }
        // Cancellation-free form.
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (r1, r2) = (q / a, c / q);
        Some((r1.min(r2), r1.max(r2)))
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_calculus() {
        let p = Poly::new(vec![1.0, -3.0, 0.0, 2.0]);
        assert_eq!(p.eval(2.0), 1.0 - 6.0 + 16.0);
        assert_eq!(p.derivative().coeffs(), &[-3.0, 0.0, 6.0]);
        assert_eq!(p.antiderivative().coeffs(), &[0.0, 1.0, -1.5, 0.0, 0.5]);
        assert_eq!(p.antiderivative().derivative(), p);
    }

    #[test]
    fn quadratic_roots_ascending() {
        let p = Poly::new(vec![21.0 / 8.0, -8.0, 6.0]);
        let (a, b) = p.quadratic_roots().unwrap();
        assert!((a - 7.0 / 12.0).abs() < 1e-15);
        assert!((b - 0.75).abs() < 1e-15);
        assert!(Poly::new(vec![1.0, 0.0, 1.0]).quadratic_roots().is_none());
    }

    #[test]
    fn trailing_zeros_trimmed() {
        assert_eq!(Poly::new(vec![1.0, 2.0, 0.0, 0.0]).degree(), 1);
        assert_eq!(Poly::new(Vec::<f64>::new()).eval(3.0), 0.0);
    }
}

//! The linearization about the wave and its constant-coefficient limits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigen4, left_eigen4, CMat4, Eigen4, C64};
use crate::model::Model;

/// Coefficient matrix of the linearized wave system in Z = (U, W, P, V):
///
/// ```text
/// [ 0         1/ε  0  0   ]
/// [ D(ū)/ε    0    0  −1/ε]
/// [ λ − R'(ū) 0    0  0   ]
/// [ −c        0    1  0   ]
/// ```
pub fn linear_matrix(model: &Model, ubar: f64, lambda: C64, eps: f64, c: f64) -> CMat4 {
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let ie = 1.0 / eps;
    CMat4::new(
        z, r(ie), z, z,
        r(model.d(ubar) * ie), z, z, r(-ie),
        lambda - model.r_prime(ubar), z, z, z,
        r(-c), z, r(1.0), z,
    )
}

/// End states of the wave and the spectral data of the limiting matrices.
#[derive(Debug, Clone)]
pub struct EquilibriumData {
    /// Ū = 0 end, approached as ζ → +∞.
    pub q_minus: [f64; 4],
    /// Ū = 1 end, approached as ζ → −∞.
    pub q_plus: [f64; 4],
    pub eig_minus: Eigen4,
    pub eig_plus: Eigen4,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSummary {
    pub q_minus: [f64; 4],
    pub q_plus: [f64; 4],
    pub eigvals_minus: Vec<C64>,
    pub eigvals_plus: Vec<C64>,
}

impl EquilibriumData {
    pub fn summary(&self) -> EquilibriumSummary {
        EquilibriumSummary {
            q_minus: self.q_minus,
            q_plus: self.q_plus,
            eigvals_minus: self.eig_minus.values.to_vec(),
            eigvals_plus: self.eig_plus.values.to_vec(),
        }
    }
}

pub fn end_states(model: &Model, c: f64) -> ([f64; 4], [f64; 4]) {
    ([0.0, 0.0, 0.0, model.f(0.0)], [1.0, 0.0, c, model.f(1.0)])
}

pub fn equilibria_and_linearization(
    model: &Model,
    eps: f64,
    c: f64,
    lambda: C64,
) -> Result<EquilibriumData> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let (q_minus, q_plus) = end_states(model, c);
    let eig_minus = eigen4(&linear_matrix(model, 0.0, lambda, eps, c))?;
    let eig_plus = eigen4(&linear_matrix(model, 1.0, lambda, eps, c))?;
    for e in [&eig_minus, &eig_plus] {
        if e.min_gap < 1e-12 {
            return Err(Error::DegenerateSplitting { gap: e.min_gap });
        }
    }
    Ok(EquilibriumData {
        q_minus,
        q_plus,
        eig_minus,
        eig_plus,
    })
}

/// Real left eigenvectors of the λ = 0 end matrix at `ubar`, split into the
/// two stable and two unstable ones (ascending real part within each).
pub(crate) fn real_left_split(model: &Model, ubar: f64, eps: f64, c: f64) -> Result<([[f64; 4]; 2], [[f64; 4]; 2])> {
    let a = linear_matrix(model, ubar, C64::new(0.0, 0.0), eps, c);
    let left = left_eigen4(&a)?;
    let neg = left.values.iter().filter(|z| z.re < 0.0).count();
    if neg != 2 {
        return Err(Error::NoSplitting {
            lambda: C64::new(0.0, 0.0),
            unstable: 4 - neg,
        });
    }
    let row = |k: usize| {
        let v = left.vector(k);
        [v[0].re, v[1].re, v[2].re, v[3].re]
    };
    Ok(([row(0), row(1)], [row(2), row(3)]))
}

//! Essential spectrum: Fredholm borders from the dispersion relation of the
//! end states, region classification by end-state signatures, and the
//! large-|λ| spatial eigenvalues behind sectoriality.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen4, C64};
use crate::model::Model;
use crate::wave::linear_matrix;

/// |Re μ| below this is treated as a spatial eigenvalue on the imaginary axis.
pub const BORDER_TOL: f64 = 1e-12;

/// End state of the wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    /// Ū = 0.
    Left,
    /// Ū = 1.
    Right,
}

impl Endpoint {
    pub fn ubar(self) -> f64 {
        match self {
            Endpoint::Left => 0.0,
            Endpoint::Right => 1.0,
        }
    }
}

/// λ(k) = −ε²k⁴ − D(Ū)k² + R'(Ū) + ick at an end state, using the model's ε and c.
pub fn dispersion(k: f64, endpoint: Endpoint, model: &Model) -> C64 {
    let u = endpoint.ubar();
    let (eps, c) = (model.eps(), model.c());
    let k2 = k * k;
    C64::new(-eps * eps * k2 * k2 - model.d(u) * k2 + model.r_prime(u), c * k)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FredholmBorder {
    pub endpoint: Endpoint,
    /// (k, λ(k)) samples.
    pub samples: Vec<(f64, C64)>,
}

/// Uniform k-samples of both borders.
pub fn essential_spectrum_plotdata(k_range: (f64, f64), n: usize, model: &Model) -> Result<[FredholmBorder; 2]> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two k samples".into()));
    }
    let ks: Vec<f64> = (0..n)
        .map(|i| k_range.0 + (k_range.1 - k_range.0) * i as f64 / (n - 1) as f64)
        .collect();
    let curve = |endpoint| FredholmBorder {
        endpoint,
        samples: ks.iter().map(|&k| (k, dispersion(k, endpoint, model))).collect(),
    };
    Ok([curve(Endpoint::Left), curve(Endpoint::Right)])
}

/// Writes border samples as CSV (k, re, im, endpoint).
pub fn write_borders_csv(borders: &[FredholmBorder], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
    wtr.write_record(["k", "re_lambda", "im_lambda", "endpoint"]).map_err(csv_err)?;
    for b in borders {
        let name = match b.endpoint {
            Endpoint::Left => "left",
            Endpoint::Right => "right",
        };
        for (k, l) in &b.samples {
            wtr.write_record([format!("{k:.17e}"), format!("{:.17e}", l.re), format!("{:.17e}", l.im), name.into()])
                .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("border CSV: {e}"))
}

/// Rightmost real part of the essential spectrum at height Im λ = y: the
/// larger of the two borders evaluated at k = y/c.
pub fn border_real_part(model: &Model, y: f64) -> f64 {
    let k = y / model.c();
    dispersion(k, Endpoint::Left, model).re.max(dispersion(k, Endpoint::Right, model).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionName {
    Omega,
    A1,
    A2,
    A3,
    A4,
}

/// Region of the λ-plane with the raw sign patterns of Re μ (ascending) for
/// the Ū = 0 end (`sig_minus`) and the Ū = 1 end (`sig_plus`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub name: RegionName,
    pub sig_minus: [i8; 4],
    pub sig_plus: [i8; 4],
}

fn signature(model: &Model, ubar: f64, lambda: C64) -> Result<[i8; 4]> {
    let e = eigen4(&linear_matrix(model, ubar, lambda, model.eps(), model.c()))?;
    let mut sig = [0i8; 4];
    for (s, mu) in sig.iter_mut().zip(e.values.iter()) {
        if mu.re.abs() < BORDER_TOL {
            return Err(Error::OnBorder { lambda, tol: BORDER_TOL });
        }
        *s = if mu.re > 0.0 { 1 } else { -1 };
    }
    Ok(sig)
}

/// Classifies λ by the signatures of both end-state matrices.
///
/// The two borders cross at a pair of conjugate points, so the set where only
/// the Ū = 1 end has lost an unstable direction has two components; they
/// share one signature pair and are told apart by the sign of Im λ (A2 above,
/// A3 below).
pub fn region_signature(lambda: C64, model: &Model) -> Result<RegionLabel> {
    let sig_minus = signature(model, 0.0, lambda)?;
    let sig_plus = signature(model, 1.0, lambda)?;
    let count = |s: &[i8; 4]| s.iter().filter(|&&x| x > 0).count();
    let name = match (count(&sig_minus), count(&sig_plus)) {
        (2, 2) => RegionName::Omega,
        (1, 2) => RegionName::A1,
        (2, 1) if lambda.im >= 0.0 => RegionName::A2,
        (2, 1) => RegionName::A3,
        (1, 1) => RegionName::A4,
        _ => {
            return Err(Error::UnexpectedSignature {
                minus: sig_minus,
                plus: sig_plus,
            })
        }
    };
    Ok(RegionLabel {
        name,
        sig_minus,
        sig_plus,
    })
}

/// Spatial eigenvalues ±e^{i arg λ/4}(1 ± i)/√(2ε) of the large-|λ| limit
/// system, ascending by real part.
pub fn sector_bound_eigs(arg_lambda: f64, eps: f64) -> Result<[C64; 4]> {
    if arg_lambda.abs() > std::f64::consts::PI || !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("need |arg| <= pi and eps > 0, got {arg_lambda}, {eps}")));
    }
    let rot = C64::from_polar(1.0 / (2.0 * eps).sqrt(), arg_lambda / 4.0);
    let mut mu = [
        rot * C64::new(1.0, 1.0),
        rot * C64::new(1.0, -1.0),
        -rot * C64::new(1.0, 1.0),
        -rot * C64::new(1.0, -1.0),
    ];
    mu.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(mu)
}

/// The limiting matrix whose eigenvalues [`sector_bound_eigs`] returns.
pub fn sector_bound_matrix(arg_lambda: f64, eps: f64) -> crate::linalg::CMat4 {
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    crate::linalg::CMat4::new(
        z, r(1.0 / eps), z, z,
        z, z, r(-1.0 / eps), z,
        z, z, z, r(1.0),
        C64::from_polar(1.0, arg_lambda), z, z, z,
    )
}

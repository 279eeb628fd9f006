//! A computed wave on a ζ-grid, with high-order interpolation and file IO.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};

/// Residual diagnostics recorded alongside a wave.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveResiduals {
    /// Largest projection boundary-condition residual.
    pub boundary: f64,
    /// Max-norm of the vector field at ζ = −L and ζ = +L.
    pub field_left: f64,
    pub field_right: f64,
    /// Largest per-interval local error estimate after refinement.
    pub max_error_estimate: f64,
    /// Mesh intervals after refinement.
    pub intervals: usize,
    pub newton_iterations: usize,
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    eps: f64,
    c: f64,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "N")]
    n: usize,
    residuals: WaveResiduals,
    model: ModelParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row {
    zeta: f64,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "P")]
    p: f64,
    #[serde(rename = "V")]
    v: f64,
}

/// Travelling wave (U, W, P, V)(ζ) with its speed.
///
/// Derivatives up to second order are recomputed from the vector field, so
/// [`WaveProfile::state_at`] is a quintic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub c: f64,
    pub eps: f64,
    pub residuals: WaveResiduals,
    model: Model,
    d1: Vec<[f64; 4]>,
    d2: Vec<[f64; 4]>,
}

/// Travelling-wave vector field in ζ.
pub(crate) fn wave_field(model: &Model, eps: f64, c: f64, y: &[f64; 4]) -> [f64; 4] {
    [
        y[1] / eps,
        (model.f(y[0]) - y[3]) / eps,
        -model.r(y[0]),
        y[2] - c * y[0],
    ]
}

/// y'' = J(y) y' for the autonomous wave field.
fn wave_field_prime(model: &Model, eps: f64, c: f64, y: &[f64; 4], f: &[f64; 4]) -> [f64; 4] {
    [
        f[1] / eps,
        (model.d(y[0]) * f[0] - f[3]) / eps,
        -model.r_prime(y[0]) * f[0],
        f[2] - c * f[0],
    ]
}

impl WaveProfile {
    pub fn new(
        model: &Model,
        eps: f64,
        c: f64,
        zeta: Vec<f64>,
        states: Vec<[f64; 4]>,
        residuals: WaveResiduals,
    ) -> Result<Self> {
        if zeta.len() != states.len() || zeta.len() < 2 {
            return Err(Error::InvalidInput("wave grid and states differ in length".into()));
        }
        if zeta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("wave grid must be strictly increasing".into()));
        }
        let model = model.with_eps_c(eps, c);
        let d1: Vec<[f64; 4]> = states.iter().map(|y| wave_field(&model, eps, c, y)).collect();
        let d2 = states
            .iter()
            .zip(&d1)
            .map(|(y, f)| wave_field_prime(&model, eps, c, y, f))
            .collect();
        Ok(Self {
            u: states.iter().map(|s| s[0]).collect(),
            w: states.iter().map(|s| s[1]).collect(),
            p: states.iter().map(|s| s[2]).collect(),
            v: states.iter().map(|s| s[3]).collect(),
            zeta,
            c,
            eps,
            residuals,
            model,
            d1,
            d2,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Half-length of the computational domain (assumes a symmetric grid).
    pub fn half_length(&self) -> f64 {
        self.zeta[self.zeta.len() - 1].min(-self.zeta[0])
    }

    pub fn left(&self) -> f64 {
        self.zeta[0]
    }

    pub fn right(&self) -> f64 {
        self.zeta[self.zeta.len() - 1]
    }

    pub fn state(&self, i: usize) -> [f64; 4] {
        [self.u[i], self.w[i], self.p[i], self.v[i]]
    }

    fn locate(&self, z: f64) -> usize {
        let n = self.zeta.len();
        match self.zeta.binary_search_by(|x| x.total_cmp(&z)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Quintic Hermite interpolation of all four components. Outside the
    /// grid the end values are returned.
    pub fn state_at(&self, z: f64) -> [f64; 4] {
        if z <= self.zeta[0] {
            return self.state(0);
        }
        if z >= self.right() {
            return self.state(self.zeta.len() - 1);
        }
        let i = self.locate(z);
        let h = self.zeta[i + 1] - self.zeta[i];
        let t = (z - self.zeta[i]) / h;
        let basis = quintic_basis(t);
        let (ya, yb) = (self.state(i), self.state(i + 1));
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = basis[0] * ya[k]
                + basis[1] * h * self.d1[i][k]
                + basis[2] * h * h * self.d2[i][k]
                + basis[3] * yb[k]
                + basis[4] * h * self.d1[i + 1][k]
                + basis[5] * h * h * self.d2[i + 1][k];
        }
        out
    }

    /// Ū(ζ) only; the spectral problems depend on the wave through Ū alone.
    pub fn u_at(&self, z: f64) -> f64 {
        if z <= self.zeta[0] {
            return self.u[0];
        }
        if z >= self.right() {
            return self.u[self.u.len() - 1];
        }
        let i = self.locate(z);
        let h = self.zeta[i + 1] - self.zeta[i];
        let b = quintic_basis((z - self.zeta[i]) / h);
        b[0] * self.u[i]
            + b[1] * h * self.d1[i][0]
            + b[2] * h * h * self.d2[i][0]
            + b[3] * self.u[i + 1]
            + b[4] * h * self.d1[i + 1][0]
            + b[5] * h * h * self.d2[i + 1][0]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path).map_err(csv_err)?;
        wtr.write_record(["zeta", "U", "W", "P", "V"]).map_err(csv_err)?;
        for i in 0..self.len() {
            wtr.write_record(
                [self.zeta[i], self.u[i], self.w[i], self.p[i], self.v[i]]
                    .iter()
                    .map(|x| format!("{x:.17e}")),
            )
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        let side = Sidecar {
            eps: self.eps,
            c: self.c,
            l: self.half_length(),
            n: self.len(),
            residuals: self.residuals.clone(),
            model: self.model.params().clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
        let mut zeta = Vec::new();
        let mut states = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let r = row.map_err(csv_err)?;
            zeta.push(r.zeta);
            states.push([r.u, r.w, r.p, r.v]);
        }
        let model = Model::new(side.model)?;
        Self::new(&model, side.eps, side.c, zeta, states, side.residuals)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("wave CSV: {e}"))
}

/// `wave.csv` → `wave.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Quintic Hermite basis on [0, 1]: (value, slope, curvature) at 0 then at 1.
fn quintic_basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * t3 - t4 + 0.5 * t5,
    ]
}

//! Fast line bundles: the λ-free reduced problem along the layer, and the
//! projectivized full linear flow used to probe for fast connections at ε > 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen4, CMat4, CVec4, C64};
use crate::model::Model;
use crate::ode::{rosenbrock, Control, OdeSystem, StepControl};
use crate::riccati::Direction;
use crate::roots::{brent, sign_changes};
use crate::wave::{linear_matrix, WaveProfile};

/// Fast reduced problem u' = w, w' = D(ū)u. λ does not enter.
pub fn fast_reduced_rhs(model: &Model, u: f64, w: f64, ubar: f64) -> (f64, f64) {
    (w, model.d(ubar) * u)
}

/// The linear flow in the fast variable ξ = ζ/ε, written on the chart u ≠ 0
/// with β = (w/u, p/u, v/u).
pub fn projectivized_full_rhs(model: &Model, beta: [C64; 3], ubar: f64, lambda: C64, eps: f64, c: f64) -> [C64; 3] {
    let [b1, b2, b3] = beta;
    [
        model.d(ubar) - b3 - b1 * b1,
        (lambda - model.r_prime(ubar)) * eps - b2 * b1,
        (b2 - c) * eps - b3 * b1,
    ]
}

/// Projective flow of z' = A z on the chart z_k = 1; `y` holds the other
/// three components in their natural order.
pub fn chart_rhs(a: &CMat4, k: usize, y: &[C64]) -> [C64; 3] {
    let z = embed(k, y);
    let dz = a * z;
    let mut out = [C64::new(0.0, 0.0); 3];
    for (slot, j) in (0..4).filter(|&j| j != k).enumerate() {
        out[slot] = dz[j] - z[j] * dz[k];
    }
    out
}

fn embed(k: usize, y: &[C64]) -> CVec4 {
    let mut z = CVec4::zeros();
    let mut it = y.iter();
    for j in 0..4 {
        z[j] = if j == k { C64::new(1.0, 0.0) } else { *it.next().expect("three chart coordinates") };
    }
    z
}

/// Coordinates of the line through `z` on the chart with pivot k.
fn chart_coords(z: &CVec4, k: usize) -> [C64; 3] {
    let mut out = [C64::new(0.0, 0.0); 3];
    for (slot, j) in (0..4).filter(|&j| j != k).enumerate() {
        out[slot] = z[j] / z[k];
    }
    out
}

fn pivot_of(z: &CVec4) -> usize {
    (0..4).fold(0, |best, j| if z[j].norm() > z[best].norm() { j } else { best })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastProbeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// A chart coordinate larger than this triggers a pivot switch.
    pub chart_switch: f64,
}

impl Default for FastProbeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            chart_switch: 4.0,
        }
    }
}

/// Linear flow along the wave on a fixed chart, in ζ.
struct ChartFlow<'a> {
    wave: &'a WaveProfile,
    lambda: C64,
    pivot: usize,
}

impl OdeSystem<C64> for ChartFlow<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let a = linear_matrix(self.wave.model(), self.wave.u_at(t), self.lambda, self.wave.eps, self.wave.c);
        dy.copy_from_slice(&chart_rhs(&a, self.pivot, y));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastClassification {
    UnstableToUnstable,
    StableToStable,
    UnstableToStable,
    Undetermined,
}

/// A fast line bundle sampled along the wave, in the β chart.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProjectivePathFast {
    pub xi: Vec<f64>,
    pub beta: Vec<[C64; 3]>,
}

impl ProjectivePathFast {
    fn push(&mut self, xi: f64, z: &CVec4) {
        self.xi.push(xi);
        self.beta.push(chart_coords(z, 0));
    }

    /// Reads the connection type off the sign of Re β₁ averaged over the
    /// outer tenth of the ξ-range at each end.
    pub fn classify(&self) -> FastClassification {
        if self.xi.len() < 2 {
            return FastClassification::Undetermined;
        }
        let (lo, hi) = self
            .xi
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = hi - lo;
        let window = |inside: &dyn Fn(f64) -> bool| {
            let signs: Vec<f64> = self
                .xi
                .iter()
                .zip(&self.beta)
                .filter(|(x, b)| inside(**x) && b[0].re.is_finite())
                .map(|(_, b)| b[0].re.signum())
                .collect();
            if signs.is_empty() {
                0.0
            } else {
                signs.iter().sum::<f64>() / signs.len() as f64
            }
        };
        let left = window(&|x| x <= lo + 0.1 * span);
        let right = window(&|x| x >= hi - 0.1 * span);
        match (left > 0.5, left < -0.5, right > 0.5, right < -0.5) {
            (true, _, true, _) => FastClassification::UnstableToUnstable,
            (_, true, _, true) => FastClassification::StableToStable,
            (true, _, _, true) => FastClassification::UnstableToStable,
            _ => FastClassification::Undetermined,
        }
    }
}

/// Fast unstable (from Ū = 1) or fast stable (from Ū = 0) eigenline of the
/// end-state matrix.
fn fast_end_line(wave: &WaveProfile, lambda: C64, direction: Direction) -> Result<CVec4> {
    let (ubar, k) = match direction {
        Direction::UnstableForward => (1.0, 3),
        Direction::StableBackward => (0.0, 0),
    };
    let e = eigen4(&linear_matrix(wave.model(), ubar, lambda, wave.eps, wave.c))?;
    Ok(e.vector(k))
}

/// Carries the line through `z0` from `z_from` to `z_to` with pivot switching.
fn carry_line(
    wave: &WaveProfile,
    lambda: C64,
    z0: CVec4,
    z_from: f64,
    z_to: f64,
    opts: &FastProbeOptions,
    mut path: Option<&mut ProjectivePathFast>,
) -> Result<CVec4> {
    let ctl = StepControl {
        h_min: 1e-13,
        ..StepControl::tol(opts.rtol, opts.atol)
    };
    let mut t = z_from;
    let mut pivot = pivot_of(&z0);
    let mut y = chart_coords(&z0, pivot).to_vec();
    let eps = wave.eps;
    loop {
        let sys = ChartFlow { wave, lambda, pivot };
        let out = rosenbrock(&sys, t, &y, z_to, &ctl, |s, yy: &[C64]| {
            if let Some(p) = path.as_deref_mut() {
                p.push(s / eps, &embed(pivot, yy));
            }
            if yy.iter().any(|v| v.norm() > opts.chart_switch) {
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        let z = embed(pivot, &out.y);
        if !out.stopped || out.t == z_to {
            return Ok(z);
        }
        t = out.t;
        pivot = pivot_of(&z);
        y = chart_coords(&z, pivot).to_vec();
    }
}

/// Fast bundle from its end of the wave to `zeta_end`, recorded in the β chart.
pub fn fast_bundle_path(
    wave: &WaveProfile,
    lambda: C64,
    direction: Direction,
    zeta_end: f64,
    opts: &FastProbeOptions,
) -> Result<ProjectivePathFast> {
    let z0 = fast_end_line(wave, lambda, direction)?;
    let start = match direction {
        Direction::UnstableForward => wave.left(),
        Direction::StableBackward => wave.right(),
    };
    let mut path = ProjectivePathFast::default();
    carry_line(wave, lambda, z0, start, zeta_end, opts, Some(&mut path))?;
    Ok(path)
}

/// Result of probing one λ for a fast connection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FastProbe {
    pub lambda: C64,
    /// Connection type of the fast unstable bundle carried across the wave.
    pub classification: FastClassification,
    /// E_f = β₁ᵘ − β₁ˢ at the section ζ = 0.
    pub e_f: C64,
    pub beta_unstable: [C64; 3],
    pub beta_stable: [C64; 3],
    /// β₂ᵘ − β₂ˢ at the section.
    pub beta2_gap: C64,
}

fn section_betas(wave: &WaveProfile, lambda: C64, opts: &FastProbeOptions) -> Result<(CVec4, CVec4)> {
    let zu = carry_line(wave, lambda, fast_end_line(wave, lambda, Direction::UnstableForward)?, wave.left(), 0.0, opts, None)?;
    let zs = carry_line(wave, lambda, fast_end_line(wave, lambda, Direction::StableBackward)?, wave.right(), 0.0, opts, None)?;
    Ok((zu, zs))
}

fn beta_of(z: &CVec4) -> Result<[C64; 3]> {
    if z[0].norm() < 1e-14 * z.norm() {
        return Err(Error::ChartFailure { cond: f64::INFINITY });
    }
    Ok(chart_coords(z, 0))
}

/// E_f at the section together with the classification of the fast
/// unstable bundle over the whole wave.
pub fn fast_connection_probe(wave: &WaveProfile, lambda: C64, opts: &FastProbeOptions) -> Result<FastProbe> {
    let mut path = ProjectivePathFast::default();
    let z0 = fast_end_line(wave, lambda, Direction::UnstableForward)?;
    let zu = carry_line(wave, lambda, z0, wave.left(), 0.0, opts, Some(&mut path))?;
    carry_line(wave, lambda, zu, 0.0, wave.right(), opts, Some(&mut path))?;
    let zs = carry_line(wave, lambda, fast_end_line(wave, lambda, Direction::StableBackward)?, wave.right(), 0.0, opts, None)?;
    let (bu, bs) = (beta_of(&zu)?, beta_of(&zs)?);
    Ok(FastProbe {
        lambda,
        classification: path.classify(),
        e_f: bu[0] - bs[0],
        beta_unstable: bu,
        beta_stable: bs,
        beta2_gap: bu[1] - bs[1],
    })
}

/// A zero of E_f on the real axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FastRoot {
    pub lambda: f64,
    pub beta2_gap: f64,
    pub beta3_gap: f64,
    pub classification: FastClassification,
}

/// Real E_f, or NaN where the u-chart fails at the section.
fn e_f_real(wave: &WaveProfile, lambda: f64, opts: &FastProbeOptions) -> Result<f64> {
    let (zu, zs) = section_betas(wave, C64::new(lambda, 0.0), opts)?;
    match (beta_of(&zu), beta_of(&zs)) {
        (Ok(bu), Ok(bs)) => Ok((bu[0] - bs[0]).re),
        _ => Ok(f64::NAN),
    }
}

/// Sign-change scan of E_f over `n` real samples with Brent polishing.
/// Sign changes through a pole (the u-chart failing at the section) are
/// rejected by requiring E_f to be small at the polished point.
pub fn fast_probe_root_scan(
    wave: &WaveProfile,
    interval: (f64, f64),
    n: usize,
    opts: &FastProbeOptions,
) -> Result<Vec<FastRoot>> {
    if n < 2 || !(interval.1 > interval.0) {
        return Err(Error::InvalidInput("scan needs n >= 2 and a nonempty interval".into()));
    }
    let lams: Vec<f64> = (0..n)
        .map(|i| interval.0 + (interval.1 - interval.0) * i as f64 / (n - 1) as f64)
        .collect();
    let vals = lams.iter().map(|&l| e_f_real(wave, l, opts)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in sign_changes(&vals) {
        let xtol = 1e-9 * lams[i + 1].abs().max(1.0);
        let r = brent(|l| e_f_real(wave, l, opts), lams[i], lams[i + 1], xtol, "fast Evans function")?;
        let probe = fast_connection_probe(wave, C64::new(r, 0.0), opts)?;
        let scale = vals[i].abs().min(vals[i + 1].abs()).max(1e-3);
        if probe.e_f.norm() > 1e-3 * scale {
            continue;
        }
        roots.push(FastRoot {
            lambda: r,
            beta2_gap: probe.beta2_gap.re,
            beta3_gap: (probe.beta_unstable[2] - probe.beta_stable[2]).re,
            classification: probe.classification,
        });
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_zero_matches_beta_form() {
        let model = Model::default();
        let (eps, c, ubar) = (1e-2, 0.2, 0.7);
        let lambda = C64::new(0.3, -0.4);
        let beta = [C64::new(0.5, 0.1), C64::new(-0.2, 0.3), C64::new(0.1, 0.0)];
        // ξ-scaled matrix is ε times the ζ matrix.
        let a = linear_matrix(&model, ubar, lambda, eps, c) * C64::new(eps, 0.0);
        let generic = chart_rhs(&a, 0, &beta);
        let direct = projectivized_full_rhs(&model, beta, ubar, lambda, eps, c);
        for k in 0..3 {
            assert!((generic[k] - direct[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn lambda_drops_out_at_zero_eps() {
        let model = Model::default();
        let beta = [C64::new(0.5, 0.0), C64::new(-0.2, 0.0), C64::new(0.1, 0.0)];
        let a = projectivized_full_rhs(&model, beta, 0.6, C64::new(3.0, 1.0), 0.0, 0.2);
        let b = projectivized_full_rhs(&model, beta, 0.6, C64::new(-7.0, 0.0), 0.0, 0.2);
        assert_eq!(a, b);
        assert_eq!(a[1], -beta[1] * beta[0]);
    }

    #[test]
    fn tails_are_equilibria_at_zero_eps() {
        let model = Model::default();
        for u in [0.0, 1.0] {
            for s in [1.0, -1.0] {
                let b = [C64::new(s * model.d(u).sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
                let r = projectivized_full_rhs(&model, b, u, C64::new(1.0, 0.0), 0.0, 0.2);
                assert!(r.iter().all(|v| v.norm() < 1e-14));
            }
        }
    }
}

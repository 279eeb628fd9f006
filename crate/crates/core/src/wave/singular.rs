//! The ε = 0 skeleton of the wave: reduced slow flow on the critical manifold,
//! its two slow segments, the fast layer jump, and the singular wavespeed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::ode::{dopri5, Control, FnSystem, StepControl};
use crate::roots::brent;

const FOLD_GUARD: f64 = 1e-10;
/// Offset from the end-state equilibria at which slow segments start.
const START_OFFSET: f64 = 1e-7;

/// Reduced slow flow (dU/dζ, dP/dζ) = ((P − cU)/D(U), −R(U)).
pub fn reduced_flow_rhs(model: &Model, u: f64, p: f64, c: f64) -> Result<(f64, f64)> {
    let d = model.d(u);
    if d.abs() < FOLD_GUARD {
        return Err(Error::FoldProximity { u, d });
    }
    Ok(((p - c * u) / d, -model.r(u)))
}

/// Which end state a slow segment emanates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlowEnd {
    /// Ū = 1, reached as ζ → −∞; the segment runs down to u_plus.
    Right,
    /// Ū = 0, reached as ζ → +∞; the segment runs up (in −ζ) to u_minus.
    Left,
}

/// Leading eigenvalue and tangent slope dP/dU of the reduced saddle at an end.
///
/// At Ū = 1 this is the unstable eigenvalue, at Ū = 0 the stable one.
pub fn reduced_end_eigen(model: &Model, end: SlowEnd, c: f64) -> (f64, f64) {
    let u = match end {
        SlowEnd::Right => 1.0,
        SlowEnd::Left => 0.0,
    };
    let (d, rp) = (model.d(u), model.r_prime(u));
    // mu^2 + (c/D) mu + R'/D = 0
    let b = c / d;
    let disc = (b * b - 4.0 * rp / d).sqrt();
    let mu = match end {
        SlowEnd::Right => 0.5 * (-b + disc),
        SlowEnd::Left => 0.5 * (-b - disc),
    };
    (mu, mu * d + c)
}

/// A slow segment sampled at the integrator's accepted steps, in ascending ζ.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SlowSegment {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Exponential rate of approach to the end state beyond the sampled range.
    pub tail_rate: f64,
}

/// Integrates one slow segment using Ū as the independent variable.
///
/// The unknowns are q = P − cŪ (which vanishes at both equilibria, so
/// integrating it directly avoids cancellation) and ζ(Ū). The ζ origin is the
/// jump point.
pub fn slow_segment(model: &Model, c: f64, end: SlowEnd) -> Result<SlowSegment> {
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let (mu, _) = reduced_end_eigen(model, end, c);
    let (u0, u1, d_end) = match end {
        SlowEnd::Right => (1.0 - START_OFFSET, u_plus, model.d(1.0)),
        SlowEnd::Left => (START_OFFSET, u_minus, model.d(0.0)),
    };
    // Along the eigendirection q = P - cU = -mu D (1 - U) at the right end
    // and mu D U at the left end.
    let q0 = match end {
        SlowEnd::Right => -mu * d_end * START_OFFSET,
        SlowEnd::Left => mu * d_end * START_OFFSET,
    };
    let sys = FnSystem::new(2, |u: f64, y: &[f64], dy: &mut [f64]| {
        let d = model.d(u);
        dy[0] = -model.r(u) * d / y[0] - c;
        dy[1] = d / y[0];
    });
    let mut us = Vec::new();
    let mut ys = Vec::new();
    let mut fold_hit = None;
    let ctl = StepControl::tol(1e-12, 1e-15);
    dopri5(&sys, u0, &[q0, 0.0], u1, &ctl, |u, y: &[f64]| {
        if model.d(u).abs() < FOLD_GUARD {
            fold_hit = Some(u);
            return Control::Stop;
        }
        us.push(u);
        ys.push([y[0], y[1]]);
        Control::Continue
    })?;
    if let Some(u) = fold_hit {
        return Err(Error::FoldProximity { u, d: model.d(u) });
    }
    let zeta_jump = ys.last().map(|y| y[1]).unwrap_or(0.0);
    let mut seg = SlowSegment {
        tail_rate: mu,
        ..Default::default()
    };
    for (u, y) in us.iter().zip(&ys) {
        seg.zeta.push(y[1] - zeta_jump);
        seg.u.push(*u);
        seg.p.push(y[0] + c * u);
    }
    if end == SlowEnd::Left {
        seg.zeta.reverse();
        seg.u.reverse();
        seg.p.reverse();
    }
    Ok(seg)
}

impl SlowSegment {
    /// Reduced state at ζ via cubic Hermite interpolation with exact slopes;
    /// beyond the sampled range the linear tail toward the end state is used.
    pub fn state_at(&self, model: &Model, c: f64, zeta: f64) -> (f64, f64) {
        let n = self.zeta.len();
        let (z0, zn) = (self.zeta[0], self.zeta[n - 1]);
        if zeta <= z0 || zeta >= zn {
            let (k, target) = if zeta <= z0 { (0, self.u[0]) } else { (n - 1, self.u[n - 1]) };
            // Tail toward the equilibrium the sample sits next to.
            let u_eq = if (1.0 - target).abs() < target.abs() { 1.0 } else { 0.0 };
            let p_eq = c * u_eq;
            let s = ((zeta - self.zeta[k]) * self.tail_rate).exp();
            let within = (zeta <= z0 && u_eq == 1.0) || (zeta >= zn && u_eq == 0.0);
            if within {
                return (u_eq + (self.u[k] - u_eq) * s, p_eq + (self.p[k] - p_eq) * s);
            }
            return (self.u[k], self.p[k]);
        }
        let i = match self.zeta.binary_search_by(|z| z.total_cmp(&zeta)) {
            Ok(i) => return (self.u[i], self.p[i]),
            Err(i) => i - 1,
        };
        let (za, zb) = (self.zeta[i], self.zeta[i + 1]);
        let h = zb - za;
        let t = (zeta - za) / h;
        let slope = |k: usize| {
            reduced_flow_rhs(model, self.u[k], self.p[k], c).unwrap_or((0.0, 0.0))
        };
        let (ua, pa) = (self.u[i], self.p[i]);
        let (ub, pb) = (self.u[i + 1], self.p[i + 1]);
        let ((dua, dpa), (dub, dpb)) = (slope(i), slope(i + 1));
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        (
            h00 * ua + h10 * h * dua + h01 * ub + h11 * h * dub,
            h00 * pa + h10 * h * dpa + h01 * pb + h11 * h * dpb,
        )
    }
}

/// P at the right jump endpoint minus P at the left jump endpoint.
pub fn matching_residual(model: &Model, c: f64) -> Result<f64> {
    let right = slow_segment(model, c, SlowEnd::Right)?;
    let left = slow_segment(model, c, SlowEnd::Left)?;
    Ok(right.p[right.p.len() - 1] - left.p[0])
}

/// Singular wavespeed: the root of [`matching_residual`] in the bracket.
pub fn singular_wavespeed(model: &Model, bracket: (f64, f64)) -> Result<f64> {
    brent(
        |c| matching_residual(model, c),
        bracket.0,
        bracket.1,
        1e-13,
        "slow-segment matching residual",
    )
}

/// Singular heteroclinic: two slow segments joined by a layer jump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularOrbit {
    /// (U, P) from Ū = 1 down to u_plus.
    pub right_slow: Vec<(f64, f64)>,
    /// (U, P) from u_minus down to 0.
    pub left_slow: Vec<(f64, f64)>,
    /// (u, w) along the layer heteroclinic at level v_star.
    pub shock: Vec<(f64, f64)>,
    pub c0: f64,
    pub right: SlowSegment,
    pub left: SlowSegment,
}

pub fn singular_orbit(model: &Model, c0: f64) -> Result<SingularOrbit> {
    let right = slow_segment(model, c0, SlowEnd::Right)?;
    let left = slow_segment(model, c0, SlowEnd::Left)?;
    let geom = model.singular_geometry()?;
    let shock = layer_shock_profile(model, geom.v_star, 400)?;
    Ok(SingularOrbit {
        right_slow: right.u.iter().copied().zip(right.p.iter().copied()).collect(),
        left_slow: left.u.iter().copied().zip(left.p.iter().copied()).collect(),
        shock,
        c0,
        right,
        left,
    })
}

/// Layer energy H(u, w) = w²/2 − G(u) + v u.
pub fn layer_hamiltonian(model: &Model, v: f64, u: f64, w: f64) -> f64 {
    0.5 * w * w - model.g(u) + v * u
}

/// Layer heteroclinic from (u_plus, 0) to (u_minus, 0) of u' = w,
/// w' = F(u) − v_star, integrated from a small offset along the unstable
/// eigendirection. Endpoints are the exact saddles; interior points are
/// resampled uniformly in u when `n_points` is smaller than the step count.
pub fn layer_shock_profile(model: &Model, v_star: f64, n_points: usize) -> Result<Vec<(f64, f64)>> {
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let level_gap = (model.f(u_plus) - v_star).abs().max((model.f(u_minus) - v_star).abs());
    if level_gap > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "v_star = {v_star} is not the equal-area level (mismatch {level_gap:.3e})"
        )));
    }
    let kappa = model.d(u_plus).sqrt();
    let delta = 1e-10;
    let sys = FnSystem::new(2, |_xi: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = model.f(y[0]) - v_star;
    });
    let mut pts = vec![(u_plus, 0.0)];
    let stop_at = u_minus + 1e-9;
    dopri5(
        &sys,
        0.0,
        &[u_plus - delta, -kappa * delta],
        200.0,
        &StepControl::tol(1e-13, 1e-16),
        |_, y: &[f64]| {
            if y[0] <= stop_at || y[1] >= 0.0 {
                return Control::Stop;
            }
            pts.push((y[0], y[1]));
            Control::Continue
        },
    )?;
    pts.push((u_minus, 0.0));
    if n_points >= 2 && pts.len() > n_points {
        let step = (pts.len() - 1) as f64 / (n_points - 1) as f64;
        pts = (0..n_points)
            .map(|k| pts[((k as f64 * step).round() as usize).min(pts.len() - 1)])
            .collect();
    }
    Ok(pts)
}

/// Closed-form layer profile ū(ξ) = m − s·tanh(√(a/2)·s·ξ), where m is the
/// inflection, s the jump half-width and a the leading coefficient of F.
/// ū(0) = m, and ū decreases from u_plus to u_minus.
pub fn layer_profile_xi(model: &Model, xi: f64) -> Result<(f64, f64)> {
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let m = 0.5 * (u_minus + u_plus);
    let s = 0.5 * (u_plus - u_minus);
    let a = model.potential().coeffs()[3];
    let k = (0.5 * a).sqrt() * s;
    let th = (k * xi).tanh();
    Ok((m - s * th, -s * k * (1.0 - th * th)))
}

//! Slow reduced eigenvalue problem: the linearized reduced flow on each outer
//! slow segment, glued across the shock by a linear jump map.
//!
//! Everything is parameterized by Ū. The base flow is carried as q = P̄ − cŪ,
//! which vanishes at both end states, and dζ/dŪ = D(Ū)/q.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::Model;
use crate::ode::{dopri5, Control, OdeSystem, StepControl};
use crate::roots::{brent, sign_changes};
use crate::wave::{reduced_end_eigen, SlowEnd};

const FOLD_GUARD: f64 = 1e-10;

/// Linearized reduced flow (P', V') = ((λ − R')V/D, P − cV/D) in ζ.
pub fn slow_linear_rhs(model: &Model, p: C64, v: C64, ubar: f64, lambda: C64, c0: f64) -> Result<(C64, C64)> {
    let d = model.d(ubar);
    if d.abs() < FOLD_GUARD {
        return Err(Error::FoldProximity { u: ubar, d });
    }
    Ok(((lambda - model.r_prime(ubar)) * v / d, p - v * (c0 / d)))
}

/// Projective chart of the (P, V) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlowChart {
    /// S = P/V.
    S,
    /// T = V/P.
    T,
}

/// Riccati form of [`slow_linear_rhs`] on a chart, in ζ.
pub fn slow_projective_rhs(model: &Model, chart: SlowChart, x: C64, ubar: f64, lambda: C64, c0: f64) -> C64 {
    let d = model.d(ubar);
    let a = (lambda - model.r_prime(ubar)) / d;
    let b = c0 / d;
    match chart {
        SlowChart::S => a - x * x + x * b,
        SlowChart::T => C64::new(1.0, 0.0) - x * b - x * x * a,
    }
}

/// Base point of the jump: both slow segments share P̄ across the shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpBase {
    pub u_minus: f64,
    pub u_plus: f64,
    pub pbar: f64,
    pub c0: f64,
}

/// Linear map (P, V)|_{u_plus} ↦ (P, V)|_{u_minus}, upper triangular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMapData {
    pub lambda: C64,
    pub entries: [[C64; 2]; 2],
    pub base: JumpBase,
}

impl JumpMapData {
    pub fn apply(&self, p: C64, v: C64) -> (C64, C64) {
        let m = &self.entries;
        (m[0][0] * p + m[0][1] * v, m[1][0] * p + m[1][1] * v)
    }

    pub fn apply_inverse(&self, p: C64, v: C64) -> (C64, C64) {
        let m = &self.entries;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        ((m[1][1] * p - m[0][1] * v) / det, (m[0][0] * v - m[1][0] * p) / det)
    }

    /// The induced Möbius map on a chart coordinate; returns the chart the
    /// image is best represented on.
    pub fn apply_projective(&self, chart: SlowChart, x: C64) -> (SlowChart, C64) {
        let one = C64::new(1.0, 0.0);
        let (p, v) = match chart {
            SlowChart::S => (x, one),
            SlowChart::T => (one, x),
        };
        let (p, v) = self.apply(p, v);
        if v.norm() >= p.norm() {
            (SlowChart::S, p / v)
        } else {
            (SlowChart::T, v / p)
        }
    }
}

/// Jump map for a given base. Linearizing the jump conditions
/// q(u_plus) = q(u_minus) + c(u_plus − u_minus), i.e. continuity of P̄, and
/// the equal-area condition along a perturbed base gives
/// P⁻ = P⁺ + (R(u₊) − R(u₋) − λ(u₊ − u₋))/(P̄ − c u₊)·V⁺,
/// V⁻ = (P̄ − c u₋)/(P̄ − c u₊)·V⁺.
pub fn jump_map_with_base(model: &Model, lambda: C64, base: JumpBase) -> Result<JumpMapData> {
    let ap = base.pbar - base.c0 * base.u_plus;
    let am = base.pbar - base.c0 * base.u_minus;
    if ap.abs() < 1e-14 {
        return Err(Error::DegenerateJump { u: base.u_plus });
    }
    let du = base.u_plus - base.u_minus;
    let j12 = (C64::new(model.r(base.u_plus) - model.r(base.u_minus), 0.0) - lambda * du) / ap;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    Ok(JumpMapData {
        lambda,
        entries: [[one, j12], [zero, C64::new(am / ap, 0.0)]],
        base,
    })
}

/// Jump map at the end of the right slow segment for speed `c0`.
pub fn jump_map(model: &Model, lambda: C64, c0: f64) -> Result<JumpMapData> {
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let seg = crate::wave::slow_segment(model, c0, SlowEnd::Right)?;
    let pbar = *seg.p.last().ok_or_else(|| Error::InvalidInput("empty slow segment".into()))?;
    jump_map_with_base(model, lambda, JumpBase { u_minus, u_plus, pbar, c0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Distance from the end state at which shooting starts.
    pub start_offset: f64,
    /// Ū of the matching section; either slow segment may carry it.
    pub section: f64,
}

impl Default for SlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            start_offset: 1e-7,
            section: 0.4,
        }
    }
}

/// Linear state at the section, unnormalized but continuous in λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowShootingState {
    pub ubar: f64,
    pub pbar: f64,
    pub pv: [C64; 2],
}

impl SlowShootingState {
    pub fn coord(&self, chart: SlowChart) -> C64 {
        match chart {
            SlowChart::S => self.pv[0] / self.pv[1],
            SlowChart::T => self.pv[1] / self.pv[0],
        }
    }
}

/// Samples along one shooting run, the jump showing up as a repeated-free
/// discontinuity in Ū.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SlowPath {
    pub ubar: Vec<f64>,
    pub pbar: Vec<f64>,
    /// (P, V) normalized to unit length.
    pub pv: Vec<[C64; 2]>,
}

impl SlowPath {
    fn push(&mut self, u: f64, y: &[C64], c0: f64) {
        let n = (y[1].norm_sqr() + y[2].norm_sqr()).sqrt();
        self.ubar.push(u);
        self.pbar.push(y[0].re + c0 * u);
        self.pv.push([y[1] / n, y[2] / n]);
    }
}

/// Base flow and linear flow with Ū as the independent variable:
/// y = (q, P, V).
struct SlowFlow<'a> {
    model: &'a Model,
    lambda: C64,
    c0: f64,
}

impl OdeSystem<C64> for SlowFlow<'_> {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, u: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.model.d(u);
        let q = y[0];
        let dzeta = d / q;
        dy[0] = -dzeta * self.model.r(u) - self.c0;
        let a = (self.lambda - self.model.r_prime(u)) / d;
        dy[1] = a * y[2] * dzeta;
        dy[2] = (y[1] - y[2] * (self.c0 / d)) * dzeta;
    }
}

fn leg(
    flow: &SlowFlow,
    u0: f64,
    y0: &[C64],
    u1: f64,
    opts: &SlowOptions,
    path: &mut Option<&mut SlowPath>,
) -> Result<Vec<C64>> {
    let ctl = StepControl::tol(opts.rtol, opts.atol);
    let mut fold = None;
    let out = dopri5(flow, u0, y0, u1, &ctl, |u, y: &[C64]| {
        if flow.model.d(u).abs() < FOLD_GUARD {
            fold = Some(u);
            return Control::Stop;
        }
        if let Some(p) = path.as_deref_mut() {
            p.push(u, y, flow.c0);
        }
        Control::Continue
    })?;
    if let Some(u) = fold {
        return Err(Error::FoldProximity { u, d: flow.model.d(u) });
    }
    Ok(out.y)
}

/// Starting data on the slow eigenline of the end state, corrected to first
/// order in the offset along the base eigendirection.
fn start_state(model: &Model, lambda: C64, c0: f64, end: SlowEnd, delta: f64) -> Result<(f64, [C64; 3])> {
    let (ue, x0) = match end {
        SlowEnd::Right => (1.0, -delta),
        SlowEnd::Left => (0.0, delta),
    };
    let (mu, _) = reduced_end_eigen(model, end, c0);
    let d = model.d(ue);
    let a = (lambda - model.r_prime(ue)) / d;
    let b = c0 / d;
    // Eigenvalues of [[0, a], [1, -b]]: ν² + bν − a = 0.
    let disc = (b * b + a * 4.0).sqrt();
    let (n1, n2) = ((-b + disc) * 0.5, (-b - disc) * 0.5);
    let nu = match end {
        SlowEnd::Right => if n1.re >= n2.re { n1 } else { n2 },
        SlowEnd::Left => if n1.re <= n2.re { n1 } else { n2 },
    };
    if (n1 - n2).norm() < 1e-12 {
        return Err(Error::NoSplitting { lambda, unstable: 1 });
    }
    let s_star = nu + b;
    // S(x) ≈ S* + σx with σμ = g_S σ + g_x, g the S-chart field.
    let g_s = -s_star * 2.0 + b;
    let h = 1e-6;
    let g = |u: f64| slow_projective_rhs(model, SlowChart::S, s_star, u, lambda, c0);
    let g_x = (g(ue + h) - g(ue - h)) / (2.0 * h);
    let sigma = g_x / (C64::new(mu, 0.0) - g_s);
    let q0 = match end {
        SlowEnd::Right => -mu * d * delta,
        SlowEnd::Left => mu * d * delta,
    };
    let s0 = s_star + sigma * x0;
    Ok((ue + x0, [C64::new(q0, 0.0), s0, C64::new(1.0, 0.0)]))
}

/// Shoots from one end state to the section Ū = `opts.section`, crossing the
/// shock with the jump map (or its inverse) when the section lies on the
/// other segment.
pub fn slow_shoot(
    model: &Model,
    lambda: C64,
    c0: f64,
    end: SlowEnd,
    opts: &SlowOptions,
    mut path: Option<&mut SlowPath>,
) -> Result<SlowShootingState> {
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let sec = opts.section;
    let on_left = sec > 0.0 && sec < u_minus;
    let on_right = sec > u_plus && sec < 1.0;
    if !(on_left || on_right) {
        return Err(Error::InvalidInput(format!(
            "section {sec} must lie on a slow segment, (0, {u_minus}) or ({u_plus}, 1)"
        )));
    }
    let flow = SlowFlow { model, lambda, c0 };
    let (u0, y0) = start_state(model, lambda, c0, end, opts.start_offset)?;
    let crosses = match end {
        SlowEnd::Right => on_left,
        SlowEnd::Left => on_right,
    };
    let finish = |u: f64, y: &[C64]| SlowShootingState {
        ubar: u,
        pbar: y[0].re + c0 * u,
        pv: [y[1], y[2]],
    };
    if !crosses {
        let y = leg(&flow, u0, &y0, sec, opts, &mut path)?;
        return Ok(finish(sec, &y));
    }
    let (u_from, u_to) = match end {
        SlowEnd::Right => (u_plus, u_minus),
        SlowEnd::Left => (u_minus, u_plus),
    };
    let y = leg(&flow, u0, &y0, u_from, opts, &mut path)?;
    let pbar = y[0].re + c0 * u_from;
    let jump = jump_map_with_base(model, lambda, JumpBase { u_minus, u_plus, pbar, c0 })?;
    let (p, v) = match end {
        SlowEnd::Right => jump.apply(y[1], y[2]),
        SlowEnd::Left => jump.apply_inverse(y[1], y[2]),
    };
    let y1 = [C64::new(pbar - c0 * u_to, 0.0), p, v];
    let y = leg(&flow, u_to, &y1, sec, opts, &mut path)?;
    Ok(finish(sec, &y))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlowEvans {
    pub lambda: C64,
    /// S⁺ − S⁻ at the section (S = P/V).
    pub e_s: C64,
    /// Chart-free normalized determinant of the two lines.
    pub det: C64,
    pub unstable: SlowShootingState,
    pub stable: SlowShootingState,
}

pub fn slow_evans(model: &Model, lambda: C64, c0: f64, opts: &SlowOptions) -> Result<SlowEvans> {
    let u = slow_shoot(model, lambda, c0, SlowEnd::Right, opts, None)?;
    let s = slow_shoot(model, lambda, c0, SlowEnd::Left, opts, None)?;
    let [pu, vu] = u.pv;
    let [ps, vs] = s.pv;
    let nu = (pu.norm_sqr() + vu.norm_sqr()).sqrt();
    let ns = (ps.norm_sqr() + vs.norm_sqr()).sqrt();
    Ok(SlowEvans {
        lambda,
        e_s: pu / vu - ps / vs,
        det: (pu * vs - ps * vu) / (nu * ns),
        unstable: u,
        stable: s,
    })
}

/// S⁺ − S⁻ at the section Ū = `section_u`.
pub fn slow_evans_eval(model: &Model, lambda: C64, c0: f64, section_u: f64) -> Result<C64> {
    let opts = SlowOptions {
        section: section_u,
        ..SlowOptions::default()
    };
    Ok(slow_evans(model, lambda, c0, &opts)?.e_s)
}

/// Real slow eigenvalues in `interval` from a sign-change scan of the
/// normalized determinant.
///
/// The scan is clipped to λ > max R'(end): below that an end state of the
/// reduced problem is no longer a saddle and the shooting data lose meaning.
pub fn find_slow_eigenvalues(
    model: &Model,
    interval: (f64, f64),
    n: usize,
    c0: f64,
    opts: &SlowOptions,
) -> Result<Vec<f64>> {
    let floor = model.r_prime(0.0).max(model.r_prime(1.0));
    let a = interval.0.max(floor + 1e-6);
    let b = interval.1;
    if n < 2 || !(b > a) {
        return Err(Error::InvalidInput(format!("empty slow scan interval ({a}, {b})")));
    }
    let det = |l: f64| slow_evans(model, C64::new(l, 0.0), c0, opts).map(|e| e.det.re);
    let lams: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
    let vals = lams.iter().map(|&l| det(l)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in sign_changes(&vals) {
        let r = brent(det, lams[i], lams[i + 1], 1e-12, "slow Evans function")?;
        if det(r)?.abs() < 1e-6 {
            roots.push(r);
        }
    }
    Ok(roots)
}

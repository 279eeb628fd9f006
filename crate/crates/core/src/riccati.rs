//! Riccati–Evans function: the unstable and stable 2-plane bundles of the
//! linearized wave system, carried in one chart of Gr(2, 4) by a 2×2 matrix
//! Riccati equation and compared at the section ζ = 0.

use nalgebra::{Matrix2, Matrix4x2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen4, CMat4, C64, I};
use crate::model::Model;
use crate::ode::{rosenbrock, Control, OdeSystem, StepControl};
use crate::wave::{linear_matrix, WaveProfile};

pub type CMat2 = Matrix2<C64>;

/// Change of coordinates fixing the chart: Z_T = T Z.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartTransform {
    pub t: CMat4,
    pub t_inv: CMat4,
}

impl Default for ChartTransform {
    fn default() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let t = CMat4::new(
            -I, z, o, z,
            z, I, z, o,
            z, z, o, z,
            z, z, z, o,
        );
        Self::new(t).expect("default chart is invertible")
    }
}

impl ChartTransform {
    pub fn new(t: CMat4) -> Result<Self> {
        let t_inv = t
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("chart transform is singular".into()))?;
        Ok(Self { t, t_inv })
    }

    pub fn identity() -> Self {
        Self::new(CMat4::identity()).expect("identity")
    }

    pub fn conjugate(&self, m: &CMat4) -> CMat4 {
        self.t * m * self.t_inv
    }

    /// Chart coordinate of the plane spanned by `frame` (original variables).
    pub fn chart_of(&self, frame: &Matrix4x2<C64>) -> Result<CMat2> {
        let ft = self.t * frame;
        let x = ft.fixed_view::<2, 2>(0, 0).into_owned();
        let y = ft.fixed_view::<2, 2>(2, 0).into_owned();
        let sv = x.singular_values();
        let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        if !(cond < 1e12) {
            return Err(Error::ChartFailure { cond });
        }
        Ok(y * x.try_inverse().ok_or(Error::ChartFailure { cond })?)
    }

    /// Frame [I; W] mapped back to the original variables.
    pub fn frame_of(&self, w: &CMat2) -> Matrix4x2<C64> {
        let mut f = Matrix4x2::<C64>::zeros();
        f[(0, 0)] = C64::new(1.0, 0.0);
        f[(1, 1)] = C64::new(1.0, 0.0);
        f.fixed_view_mut::<2, 2>(2, 0).copy_from(w);
        self.t_inv * f
    }
}

/// Which end a bundle is initialized at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Unstable bundle, from ζ = −L (Ū = 1) forward to the section.
    UnstableForward,
    /// Stable bundle, from ζ = +L (Ū = 0) backward to the section.
    StableBackward,
}

/// Eigen-frame of the asymptotic matrix spanning the unstable (Ū = 1 end) or
/// stable (Ū = 0 end) subspace.
pub fn end_frame(model: &Model, direction: Direction, lambda: C64, eps: f64, c: f64) -> Result<Matrix4x2<C64>> {
    let ubar = match direction {
        Direction::UnstableForward => 1.0,
        Direction::StableBackward => 0.0,
    };
    let e = eigen4(&linear_matrix(model, ubar, lambda, eps, c))?;
    let unstable = e.unstable_count();
    let border = e.values.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    if unstable != 2 || border < 1e-12 {
        return Err(Error::NoSplitting { lambda, unstable });
    }
    let cols = match direction {
        Direction::UnstableForward => [2, 3],
        Direction::StableBackward => [0, 1],
    };
    Ok(Matrix4x2::from_columns(&[e.vector(cols[0]), e.vector(cols[1])]))
}

pub fn init_eigenplane(
    model: &Model,
    direction: Direction,
    lambda: C64,
    eps: f64,
    c: f64,
    chart: &ChartTransform,
) -> Result<CMat2> {
    chart.chart_of(&end_frame(model, direction, lambda, eps, c)?)
}

/// The chart-transformed coefficient matrix along the wave, split in blocks
/// [[A, B], [C, D]].
///
/// The matrix is affine in D(ū) and R'(ū), so T·M·T⁻¹ is assembled from
/// three precomputed pieces.
pub struct BlockSystem<'a> {
    pub wave: &'a WaveProfile,
    pub lambda: C64,
    pieces: [CMat4; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct Blocks {
    pub a: CMat2,
    pub b: CMat2,
    pub c: CMat2,
    pub d: CMat2,
}

impl<'a> BlockSystem<'a> {
    pub fn new(wave: &'a WaveProfile, lambda: C64, chart: &ChartTransform) -> Self {
        let model = wave.model();
        let (eps, c) = (wave.eps, wave.c);
        // M(ū) = M(ū0) + (D(ū) - D(ū0))/eps E21 - (R'(ū) - R'(ū0)) E31 at ū0 = 0.
        let base = linear_matrix(model, 0.0, lambda, eps, c);
        let mut e21 = CMat4::zeros();
        e21[(1, 0)] = C64::new(1.0 / eps, 0.0);
        let mut e31 = CMat4::zeros();
        e31[(2, 0)] = C64::new(-1.0, 0.0);
        Self {
            wave,
            lambda,
            pieces: [chart.conjugate(&base), chart.conjugate(&e21), chart.conjugate(&e31)],
        }
    }

    pub fn matrix_t(&self, zeta: f64) -> CMat4 {
        let model = self.wave.model();
        let ubar = self.wave.u_at(zeta);
        let dd = model.d(ubar) - model.d(0.0);
        let dr = model.r_prime(ubar) - model.r_prime(0.0);
        self.pieces[0] + self.pieces[1] * C64::new(dd, 0.0) + self.pieces[2] * C64::new(dr, 0.0)
    }

    pub fn blocks(&self, zeta: f64) -> Blocks {
        let m = self.matrix_t(zeta);
        Blocks {
            a: m.fixed_view::<2, 2>(0, 0).into_owned(),
            b: m.fixed_view::<2, 2>(0, 2).into_owned(),
            c: m.fixed_view::<2, 2>(2, 0).into_owned(),
            d: m.fixed_view::<2, 2>(2, 2).into_owned(),
        }
    }
}

/// W' = C + D W − W A − W B W.
pub fn riccati_rhs(bl: &Blocks, w: &CMat2) -> CMat2 {
    bl.c + bl.d * w - w * bl.a - w * bl.b * w
}

fn to_mat(y: &[C64]) -> CMat2 {
    CMat2::new(y[0], y[1], y[2], y[3])
}

impl OdeSystem<C64> for BlockSystem<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let w = to_mat(y);
        let r = riccati_rhs(&self.blocks(t), &w);
        dy.copy_from_slice(&[r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]]);
    }

    fn jacobian(&self, t: f64, y: &[C64], jac: &mut [C64]) {
        let bl = self.blocks(t);
        let w = to_mat(y);
        let bw = bl.b * w;
        let wb = w * bl.b;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut v = C64::new(0.0, 0.0);
                        if j == l {
                            v += bl.d[(i, k)] - wb[(i, k)];
                        }
                        if i == k {
                            v -= bl.a[(l, j)] + bw[(l, j)];
                        }
                        jac[(2 * i + j) * 4 + 2 * k + l] = v;
                    }
                }
            }
        }
    }
}

/// Integration settings for the Riccati flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiccatiOptions {
    pub rtol: f64,
    pub atol: f64,
    /// ‖W‖ beyond which the chart is declared to have blown up.
    pub blowup: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            blowup: 1e8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    pub zeta: Vec<f64>,
    pub w: Vec<CMat2>,
    pub direction: Direction,
    pub blowup: Option<f64>,
    pub steps: usize,
}

impl RiccatiTrajectory {
    pub fn last(&self) -> &CMat2 {
        self.w.last().expect("trajectory has its initial point")
    }
}

/// Integrates the chart Riccati equation from the appropriate end of the
/// wave to `zeta_end`. With `record = false` only the end points are kept.
pub fn integrate_riccati_to(
    wave: &WaveProfile,
    lambda: C64,
    direction: Direction,
    chart: &ChartTransform,
    zeta_end: f64,
    opts: &RiccatiOptions,
    record: bool,
) -> Result<RiccatiTrajectory> {
    let model = wave.model();
    let w0 = init_eigenplane(model, direction, lambda, wave.eps, wave.c, chart)?;
    let z0 = match direction {
        Direction::UnstableForward => wave.left(),
        Direction::StableBackward => wave.right(),
    };
    let sys = BlockSystem::new(wave, lambda, chart);
    let y0 = [w0[(0, 0)], w0[(0, 1)], w0[(1, 0)], w0[(1, 1)]];
    let mut traj = RiccatiTrajectory {
        zeta: Vec::new(),
        w: Vec::new(),
        direction,
        blowup: None,
        steps: 0,
    };
    let ctl = StepControl {
        h_min: 1e-13,
        ..StepControl::tol(opts.rtol, opts.atol)
    };
    let out = rosenbrock(&sys, z0, &y0, zeta_end, &ctl, |t, y: &[C64]| {
        let w = to_mat(y);
        if record {
            traj.zeta.push(t);
            traj.w.push(w);
        }
        if w.norm() > opts.blowup {
            traj.blowup = Some(t);
            return Control::Stop;
        }
        Control::Continue
    })?;
    traj.steps = out.accepted;
    if let Some(z) = traj.blowup {
        return Err(Error::Blowup {
            zeta: z,
            norm: to_mat(&out.y).norm(),
        });
    }
    if !record {
        traj.zeta = vec![z0, out.t];
        traj.w = vec![w0, to_mat(&out.y)];
    }
    Ok(traj)
}

pub fn integrate_riccati(
    wave: &WaveProfile,
    lambda: C64,
    direction: Direction,
    chart: &ChartTransform,
    opts: &RiccatiOptions,
) -> Result<RiccatiTrajectory> {
    integrate_riccati_to(wave, lambda, direction, chart, 0.0, opts, true)
}

/// Chart matrices of both bundles at the section ζ = 0.
pub fn section_charts(
    wave: &WaveProfile,
    lambda: C64,
    chart: &ChartTransform,
    opts: &RiccatiOptions,
) -> Result<(CMat2, CMat2)> {
    let wu = integrate_riccati_to(wave, lambda, Direction::UnstableForward, chart, 0.0, opts, false)?;
    let ws = integrate_riccati_to(wave, lambda, Direction::StableBackward, chart, 0.0, opts, false)?;
    Ok((*wu.last(), *ws.last()))
}

/// E_T(λ) = det(W_s(0) − W_u(0)).
pub fn riccati_evans_eval(wave: &WaveProfile, lambda: C64, chart: &ChartTransform, opts: &RiccatiOptions) -> Result<C64> {
    let (wu, ws) = section_charts(wave, lambda, chart, opts)?;
    Ok((ws - wu).determinant())
}

/// An E_T evaluator bound to a wave, for contour work.
#[derive(Clone)]
pub struct RiccatiEvans<'a> {
    pub wave: &'a WaveProfile,
    pub chart: ChartTransform,
    pub opts: RiccatiOptions,
}

impl<'a> RiccatiEvans<'a> {
    pub fn new(wave: &'a WaveProfile) -> Self {
        Self {
            wave,
            chart: ChartTransform::default(),
            opts: RiccatiOptions::default(),
        }
    }

    pub fn eval(&self, lambda: C64) -> Result<C64> {
        riccati_evans_eval(self.wave, lambda, &self.chart, &self.opts)
    }
}

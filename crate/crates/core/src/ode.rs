//! Adaptive one-step integrators over real or complex state vectors.
//!
//! `dopri5` is the explicit Dormand–Prince 5(4) pair for the non-stiff
//! reduced flows. `rosenbrock` is the L-stable ROS34PW2 W-method 3(2),
//! used wherever the fast 1/eps scale makes explicit stepping hopeless.

use crate::error::{Error, Result};
use crate::linalg::{Scalar, SmallLu};

pub trait OdeSystem<T: Scalar> {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[T], dy: &mut [T]);

    /// Row-major Jacobian. The default uses forward differences with a
    /// real perturbation, which is exact enough for holomorphic fields.
    fn jacobian(&self, t: f64, y: &[T], jac: &mut [T]) {
        let n = self.dim();
        let mut f0 = vec![T::zero(); n];
        let mut f1 = vec![T::zero(); n];
        let mut yp = y.to_vec();
        self.rhs(t, y, &mut f0);
        for j in 0..n {
            let h = 1e-7 * y[j].modulus().max(1.0);
            yp[j] = y[j] + T::from_f64(h);
            self.rhs(t, &yp, &mut f1);
            for i in 0..n {
                jac[i * n + j] = (f1[i] - f0[i]) * (1.0 / h);
            }
            yp[j] = y[j];
        }
    }
}

/// Closure adaptor: `FnSystem::new(n, |t, y, dy| ...)`.
pub struct FnSystem<F> {
    n: usize,
    f: F,
}

impl<F> FnSystem<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<T: Scalar, F: Fn(f64, &[T], &mut [T])> OdeSystem<T> for FnSystem<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn rhs(&self, t: f64, y: &[T], dy: &mut [T]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step magnitude; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl StepControl {
    pub fn tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

/// Returned by observers after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Integration<T> {
    pub t: f64,
    pub y: Vec<T>,
    pub accepted: usize,
    pub rejected: usize,
    /// True when the observer requested an early stop.
    pub stopped: bool,
}

fn error_norm<T: Scalar>(err: &[T], y0: &[T], y1: &[T], ctl: &StepControl) -> f64 {
    let n = err.len().max(1);
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = ctl.atol + ctl.rtol * a.modulus().max(b.modulus());
            let r = e.modulus() / sc;
            r * r
        })
        .sum();
    (s / n as f64).sqrt()
}

fn initial_step<T: Scalar>(y0: &[T], f0: &[T], span: f64, ctl: &StepControl, order: i32) -> f64 {
    if let Some(h) = ctl.h_init {
        return h.min(span);
    }
    let scale = |v: &T, y: &T| v.modulus() / (ctl.atol + ctl.rtol * y.modulus());
    let d0 = y0.iter().map(|v| scale(v, v).powi(2)).sum::<f64>().sqrt();
    let d1 = f0.iter().zip(y0).map(|(f, y)| scale(f, y).powi(2)).sum::<f64>().sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h = h * 10f64.powf(-1.0 / order as f64).min(1.0);
    h.min(span).min(ctl.h_max).max(ctl.h_min)
}

fn check_finite<T: Scalar>(t: f64, y: &[T]) -> Result<()> {
    if y.iter().all(|v| v.finite()) {
        Ok(())
    } else {
        Err(Error::Blowup {
            zeta: t,
            norm: f64::INFINITY,
        })
    }
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) from `t0` to `t1` (either direction).
///
/// `observer` sees every accepted (t, y), including the initial point.
pub fn dopri5<T, S, O>(
    sys: &S,
    t0: f64,
    y0: &[T],
    t1: f64,
    ctl: &StepControl,
    mut observer: O,
) -> Result<Integration<T>>
where
    T: Scalar,
    S: OdeSystem<T> + ?Sized,
    O: FnMut(f64, &[T]) -> Control,
{
    let n = sys.dim();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![T::zero(); n]; 7];
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    let mut err = vec![T::zero(); n];
    sys.rhs(t, &y, &mut k[0]);
    let mut out = Integration {
        t,
        y: y.clone(),
        accepted: 0,
        rejected: 0,
        stopped: false,
    };
    if observer(t, &y) == Control::Stop {
        out.stopped = true;
        return Ok(out);
    }
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(out);
    }
    let mut h = initial_step(&y, &k[0], span, ctl, 5);
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::NonConvergence {
                what: "dopri5 step budget",
                iterations: steps,
                residual: (t1 - t).abs(),
            });
        }
        let last = h >= (t1 - t).abs();
        let hs = if last { (t1 - t).abs() } else { h };
        let hd = dir * hs;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, &a) in DP_A[s][..s].iter().enumerate() {
                    if a != 0.0 {
                        acc += k[j][i] * (a * hd);
                    }
                }
                ytmp[i] = acc;
            }
            sys.rhs(t + DP_C[s] * hd, &ytmp, &mut k[s]);
            if s == 6 {
                ynew.copy_from_slice(&ytmp);
            }
        }
        for i in 0..n {
            let mut e = T::zero();
            for (s, &c) in DP_E.iter().enumerate() {
                if c != 0.0 {
                    e += k[s][i] * (c * hd);
                }
            }
            err[i] = e;
        }
        let en = error_norm(&err, &y, &ynew, ctl);
        if en <= 1.0 && ynew.iter().all(|v| v.finite()) {
            t = if last { t1 } else { t + hd };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            out.accepted += 1;
            if observer(t, &y) == Control::Stop {
                out.stopped = true;
                break;
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hs * fac).min(ctl.h_max);
        } else {
            out.rejected += 1;
            let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h = hs * fac;
            if h < ctl.h_min {
                return Err(Error::StepUnderflow { t });
            }
        }
    }
    check_finite(t, &y)?;
    out.t = t;
    out.y = y;
    Ok(out)
}

mod ros {
    pub const GAMMA: f64 = 0.435866521508459;
    pub const ALPHA: [[f64; 3]; 4] = [
        [0.0, 0.0, 0.0],
        [0.87173304301691801, 0.0, 0.0],
        [0.84457060015369423, -0.11299064236484185, 0.0],
        [0.0, 0.0, 1.0],
    ];
    pub const G: [[f64; 3]; 4] = [
        [0.0, 0.0, 0.0],
        [-0.87173304301691801, 0.0, 0.0],
        [-0.90338057013044082, 0.054180672388095326, 0.0],
        [0.24212380706095346, -1.2232505839045147, 0.54526025533510214],
    ];
    pub const B: [f64; 4] = [
        0.24212380706095346,
        -1.2232505839045147,
        1.5452602553351020,
        0.435866521508459,
    ];
    pub const BHAT: [f64; 4] = [
        0.37810903145819369,
        -0.096042292212423178,
        0.5,
        0.2179332607542295,
    ];
}

/// Buffers reused across Rosenbrock steps.
struct RosWork<T: Scalar> {
    lu: SmallLu<T>,
    k: [Vec<T>; 4],
    ys: Vec<T>,
    gk: Vec<T>,
    ynew: Vec<T>,
    err: Vec<T>,
}

impl<T: Scalar> RosWork<T> {
    fn new(n: usize) -> Self {
        let z = || vec![T::zero(); n];
        Self {
            lu: SmallLu::with_size(n),
            k: [z(), z(), z(), z()],
            ys: z(),
            gk: z(),
            ynew: z(),
            err: z(),
        }
    }
}

/// One ROS34PW2 step of signed size `h`; leaves y_new and the error
/// estimate in the workspace.
fn rosenbrock_step<T: Scalar, S: OdeSystem<T> + ?Sized>(
    sys: &S,
    t: f64,
    y: &[T],
    h: f64,
    jac: &[T],
    wk: &mut RosWork<T>,
) -> Result<()> {
    let n = y.len();
    {
        let m = wk.lu.matrix_mut();
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = -(jac[i * n + j] * (h * ros::GAMMA));
            }
            m[i * n + i] += T::one();
        }
    }
    wk.lu.refactor()?;
    for s in 0..4 {
        let mut alpha_sum = 0.0;
        for j in 0..s {
            alpha_sum += ros::ALPHA[s][j];
        }
        for i in 0..n {
            let mut acc = y[i];
            let mut g = T::zero();
            for j in 0..s {
                acc += wk.k[j][i] * ros::ALPHA[s][j];
                g += wk.k[j][i] * ros::G[s][j];
            }
            wk.ys[i] = acc;
            wk.gk[i] = g;
        }
        let (done, rest) = wk.k.split_at_mut(s);
        let _ = done;
        let ks = &mut rest[0];
        sys.rhs(t + alpha_sum * h, &wk.ys, ks);
        for i in 0..n {
            let mut jg = T::zero();
            if s > 0 {
                for j in 0..n {
                    jg += jac[i * n + j] * wk.gk[j];
                }
            }
            ks[i] = (ks[i] + jg) * h;
        }
        wk.lu.solve_in_place(ks);
    }
    for i in 0..n {
        let mut yn = y[i];
        let mut e = T::zero();
        for s in 0..4 {
            yn += wk.k[s][i] * ros::B[s];
            e += wk.k[s][i] * (ros::B[s] - ros::BHAT[s]);
        }
        wk.ynew[i] = yn;
        wk.err[i] = e;
    }
    Ok(())
}

/// Adaptive ROS34PW2 from `t0` to `t1` (either direction), with the
/// Jacobian re-evaluated every step.
pub fn rosenbrock<T, S, O>(
    sys: &S,
    t0: f64,
    y0: &[T],
    t1: f64,
    ctl: &StepControl,
    mut observer: O,
) -> Result<Integration<T>>
where
    T: Scalar,
    S: OdeSystem<T> + ?Sized,
    O: FnMut(f64, &[T]) -> Control,
{
    let n = sys.dim();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Integration {
        t,
        y: y.clone(),
        accepted: 0,
        rejected: 0,
        stopped: false,
    };
    if observer(t, &y) == Control::Stop {
        out.stopped = true;
        return Ok(out);
    }
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(out);
    }
    let mut f0 = vec![T::zero(); n];
    sys.rhs(t, &y, &mut f0);
    let mut h = initial_step(&y, &f0, span, ctl, 3);
    let mut jac = vec![T::zero(); n * n];
    let mut wk = RosWork::new(n);
    let mut steps = 0;
    let mut fresh_jac = false;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > ctl.max_steps {
            return Err(Error::NonConvergence {
                what: "rosenbrock step budget",
                iterations: steps,
                residual: (t1 - t).abs(),
            });
        }
        if !fresh_jac {
            sys.jacobian(t, &y, &mut jac);
            fresh_jac = true;
        }
        let last = h >= (t1 - t).abs();
        let hs = if last { (t1 - t).abs() } else { h };
        if rosenbrock_step(sys, t, &y, dir * hs, &jac, &mut wk).is_err() {
            {
                out.rejected += 1;
                h = hs * 0.25;
                if h < ctl.h_min {
                    return Err(Error::StepUnderflow { t });
                }
                continue;
            }
        };
        let en = error_norm(&wk.err, &y, &wk.ynew, ctl);
        if en <= 1.0 && wk.ynew.iter().all(|v| v.finite()) {
            t = if last { t1 } else { t + dir * hs };
            y.copy_from_slice(&wk.ynew);
            fresh_jac = false;
            out.accepted += 1;
            if observer(t, &y) == Control::Stop {
                out.stopped = true;
                break;
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
            h = (hs * fac).min(ctl.h_max);
        } else {
            out.rejected += 1;
            let fac = if en.is_finite() { (0.9 * en.powf(-1.0 / 3.0)).clamp(0.1, 0.9) } else { 0.1 };
            h = hs * fac;
            if h < ctl.h_min {
                return Err(Error::StepUnderflow { t });
            }
        }
    }
    check_finite(t, &y)?;
    out.t = t;
    out.y = y;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn no_obs<T>(_: f64, _: &[T]) -> Control {
        Control::Continue
    }

    #[test]
    fn dopri5_exponential_and_backwards() {
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0]);
        let ctl = StepControl::tol(1e-11, 1e-13);
        let r = dopri5(&sys, 0.0, &[1.0], 3.0, &ctl, no_obs).unwrap();
        assert!((r.y[0] - (-6.0f64).exp()).abs() < 1e-11);
        let b = dopri5(&sys, 3.0, &r.y, 0.0, &ctl, no_obs).unwrap();
        assert!((b.y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dopri5_complex_rotation() {
        let sys = FnSystem::new(1, |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = y[0] * C64::new(0.0, 1.0)
        });
        let ctl = StepControl::tol(1e-12, 1e-14);
        let r = dopri5(&sys, 0.0, &[C64::new(1.0, 0.0)], std::f64::consts::PI, &ctl, no_obs).unwrap();
        assert!((r.y[0] + 1.0).norm() < 1e-10);
    }

    #[test]
    fn observer_can_stop() {
        let sys = FnSystem::new(1, |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0);
        let r = dopri5(&sys, 0.0, &[0.0], 10.0, &StepControl::default(), |_, y: &[f64]| {
            if y[0] > 1.0 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        assert!(r.stopped && r.t < 10.0 && r.y[0] > 1.0);
    }

    #[test]
    fn ros34pw2_is_third_order() {
        // y' = -y^2 + cos(t) * 0 term free; exact solution 1/(1+t).
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] * y[0]);
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = vec![1.0];
            let mut jac = vec![0.0];
            let mut wk = RosWork::new(1);
            for i in 0..n {
                sys.jacobian(i as f64 * h, &y, &mut jac);
                rosenbrock_step(&sys, i as f64 * h, &y, h, &jac, &mut wk).unwrap();
                y.copy_from_slice(&wk.ynew);
            }
            (y[0] - 0.5f64).abs()
        };
        let (e1, e2) = (run(20), run(40));
        let order = (e1 / e2).log2();
        assert!((order - 3.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn ros34pw2_nonautonomous_order() {
        // Stiff Prothero–Robinson problem: y' = -50 (y - sin t) + cos t.
        let sys = FnSystem::new(1, |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -50.0 * (y[0] - t.sin()) + t.cos()
        });
        let run = |n: usize| {
            let h = 2.0 / n as f64;
            let mut y = vec![0.0];
            let mut jac = vec![0.0];
            let mut wk = RosWork::new(1);
            for i in 0..n {
                sys.jacobian(i as f64 * h, &y, &mut jac);
                rosenbrock_step(&sys, i as f64 * h, &y, h, &jac, &mut wk).unwrap();
                y.copy_from_slice(&wk.ynew);
            }
            (y[0] - 2f64.sin()).abs()
        };
        assert!(run(400) < 1e-7);
        assert!(run(400) < run(100));
    }

    #[test]
    fn rosenbrock_handles_stiff_linear_system() {
        let sys = FnSystem::new(2, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -1e4 * y[0] + y[1];
            dy[1] = -y[1];
        });
        let ctl = StepControl::tol(1e-8, 1e-10);
        let r = rosenbrock(&sys, 0.0, &[1.0, 1.0], 5.0, &ctl, no_obs).unwrap();
        let exact1 = (-5.0f64).exp();
        assert!((r.y[1] - exact1).abs() < 1e-7);
        assert!((r.y[0] - exact1 / (1e4 - 1.0)).abs() < 1e-9);
        // An explicit method would need ~2.5e4 steps for stability alone.
        assert!(r.accepted < 3000, "took {} steps", r.accepted);
    }
}

//! Heteroclinic boundary-value problem for the ε > 0 wave.
//!
//! Hermite–Simpson collocation (the 3-stage Lobatto IIIA scheme, fourth
//! order) in compressed form, with the wavespeed carried as a fifth,
//! constant, component at every node so the Newton matrix stays banded.
//! Boundary conditions project the end deviations onto the correct
//! eigenspaces using left eigenvectors; a phase condition pins Ū(0) to the
//! inflection value.

use serde::{Deserialize, Serialize};

use super::linear::{end_states, real_left_split};
use super::profile::{wave_field, WaveProfile, WaveResiduals};
use super::singular::{layer_profile_xi, singular_orbit, SingularOrbit};
use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::Model;

type M4 = [[f64; 4]; 4];
type V4 = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BvpOptions {
    /// Domain is [−L, L].
    pub half_length: f64,
    /// Intervals of the initial stretched mesh (before `h_max` splitting).
    pub intervals: usize,
    /// Largest interval allowed anywhere.
    pub h_max: f64,
    /// Local error tolerance driving mesh refinement.
    pub tol: f64,
    pub max_intervals: usize,
    pub max_refinements: usize,
    pub max_newton: usize,
    /// First ε of the continuation sequence.
    pub eps_start: f64,
    /// Geometric ratio between consecutive continuation steps.
    pub eps_ratio: f64,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            half_length: 50.0,
            intervals: 3000,
            h_max: 0.05,
            tol: 1e-8,
            max_intervals: 400_000,
            max_refinements: 10,
            max_newton: 40,
            eps_start: 1e-2,
            eps_ratio: 0.1,
        }
    }
}

fn field(model: &Model, eps: f64, c: f64, y: &V4) -> V4 {
    wave_field(model, eps, c, y)
}

fn jac(model: &Model, eps: f64, c: f64, y: &V4) -> M4 {
    let ie = 1.0 / eps;
    [
        [0.0, ie, 0.0, 0.0],
        [model.d(y[0]) * ie, 0.0, 0.0, -ie],
        [-model.r_prime(y[0]), 0.0, 0.0, 0.0],
        [-c, 0.0, 1.0, 0.0],
    ]
}

fn mm(a: &M4, b: &M4) -> M4 {
    let mut o = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            o[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

fn mv(a: &M4, v: &V4) -> V4 {
    let mut o = [0.0; 4];
    for i in 0..4 {
        o[i] = (0..4).map(|k| a[i][k] * v[k]).sum();
    }
    o
}

/// Symmetric mesh on [−L, L] containing 0: ζ = a·sinh(s) with a ∝ ε, so the
/// layer is resolved on its own scale; intervals longer than `h_max` are
/// split evenly.
pub fn initial_mesh(eps: f64, opts: &BvpOptions) -> Vec<f64> {
    let l = opts.half_length;
    let a = 5.0 * eps;
    let k = (opts.intervals / 2).max(4);
    let s_max = (l / a).asinh();
    let mut half = vec![0.0];
    let mut prev = 0.0;
    for j in 1..=k {
        let z = if j == k { l } else { a * (s_max * j as f64 / k as f64).sinh() };
        let pieces = ((z - prev) / opts.h_max).ceil().max(1.0) as usize;
        for p in 1..=pieces {
            half.push(prev + (z - prev) * p as f64 / pieces as f64);
        }
        prev = z;
    }
    let mut mesh: Vec<f64> = half.iter().rev().map(|z| -z).collect();
    mesh.pop();
    mesh.extend(half);
    mesh
}

/// Additive composite of the slow segments and the layer profile: a
/// uniformly O(ε) approximation of the wave used as the first Newton guess.
pub fn composite_guess(model: &Model, orbit: &SingularOrbit, eps: f64, zeta: f64) -> Result<V4> {
    let c = orbit.c0;
    let (u_minus, u_plus) = model.equal_area_jumps()?;
    let (seg, u_jump) = if zeta < 0.0 { (&orbit.right, u_plus) } else { (&orbit.left, u_minus) };
    let (u_out, p_out) = seg.state_at(model, c, zeta);
    let (u_in, du_in) = layer_profile_xi(model, zeta / eps)?;
    let d = model.d(u_out);
    let du_out = if d.abs() > 1e-8 { (p_out - c * u_out) / d } else { 0.0 };
    Ok([
        u_in + u_out - u_jump,
        du_in + eps * du_out,
        p_out,
        model.f(u_out),
    ])
}

struct Collocation<'a> {
    model: &'a Model,
    eps: f64,
    mesh: Vec<f64>,
    phase_node: usize,
    phase_value: f64,
}

const KL: usize = 7;
const KU: usize = 7;

impl<'a> Collocation<'a> {
    fn new(model: &'a Model, eps: f64, mesh: Vec<f64>) -> Result<Self> {
        let phase_node = mesh
            .iter()
            .position(|&z| z == 0.0)
            .ok_or_else(|| Error::InvalidInput("mesh must contain zeta = 0".into()))?;
        Ok(Self {
            model,
            eps,
            mesh,
            phase_node,
            phase_value: model.inflection(),
        })
    }

    fn intervals(&self) -> usize {
        self.mesh.len() - 1
    }

    fn unknowns(&self) -> usize {
        5 * self.mesh.len()
    }

    fn row_of_interval(&self, i: usize) -> usize {
        2 + 5 * i + usize::from(i >= self.phase_node)
    }

    fn y(z: &[f64], i: usize) -> V4 {
        [z[5 * i], z[5 * i + 1], z[5 * i + 2], z[5 * i + 3]]
    }

    fn midpoint(&self, z: &[f64], i: usize) -> V4 {
        let h = self.mesh[i + 1] - self.mesh[i];
        let c = z[5 * i + 4];
        let (ya, yb) = (Self::y(z, i), Self::y(z, i + 1));
        let (fa, fb) = (field(self.model, self.eps, c, &ya), field(self.model, self.eps, c, &yb));
        let mut ym = [0.0; 4];
        for k in 0..4 {
            ym[k] = 0.5 * (ya[k] + yb[k]) + h / 8.0 * (fa[k] - fb[k]);
        }
        ym
    }

    fn boundary_vectors(&self, c: f64) -> Result<([[f64; 4]; 2], [[f64; 4]; 2])> {
        let (stable_plus, _) = real_left_split(self.model, 1.0, self.eps, c)?;
        let (_, unstable_minus) = real_left_split(self.model, 0.0, self.eps, c)?;
        Ok((stable_plus, unstable_minus))
    }

    fn assemble(&self, z: &[f64], with_jac: bool) -> Result<(Vec<f64>, Option<BandMatrix>)> {
        let n = self.unknowns();
        let last = self.mesh.len() - 1;
        let mut res = vec![0.0; n];
        let mut jm = with_jac.then(|| BandMatrix::zeros(n, KL, KU));
        let (model, eps) = (self.model, self.eps);

        let c0 = z[4];
        let (ls_plus, lu_minus) = self.boundary_vectors(c0)?;
        let (q_minus, q_plus) = end_states(model, c0);
        let y0 = Self::y(z, 0);
        for (r, l) in ls_plus.iter().enumerate() {
            res[r] = (0..4).map(|k| l[k] * (y0[k] - q_plus[k])).sum();
            if let Some(j) = jm.as_mut() {
                for k in 0..4 {
                    j.set(r, k, l[k]);
                }
                j.set(r, 4, -l[2]);
            }
        }
        let yn = Self::y(z, last);
        for (r, l) in lu_minus.iter().enumerate() {
            let row = n - 2 + r;
            res[row] = (0..4).map(|k| l[k] * (yn[k] - q_minus[k])).sum();
            if let Some(j) = jm.as_mut() {
                for k in 0..4 {
                    j.set(row, 5 * last + k, l[k]);
                }
            }
        }
        let prow = 2 + 5 * self.phase_node;
        res[prow] = z[5 * self.phase_node] - self.phase_value;
        if let Some(j) = jm.as_mut() {
            j.set(prow, 5 * self.phase_node, 1.0);
        }

        for i in 0..self.intervals() {
            let h = self.mesh[i + 1] - self.mesh[i];
            let c = z[5 * i + 4];
            let (ya, yb) = (Self::y(z, i), Self::y(z, i + 1));
            let (fa, fb) = (field(model, eps, c, &ya), field(model, eps, c, &yb));
            let mut ym = [0.0; 4];
            for k in 0..4 {
                ym[k] = 0.5 * (ya[k] + yb[k]) + h / 8.0 * (fa[k] - fb[k]);
            }
            let fm = field(model, eps, c, &ym);
            let row = self.row_of_interval(i);
            for k in 0..4 {
                res[row + k] = yb[k] - ya[k] - h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]);
            }
            res[row + 4] = z[5 * (i + 1) + 4] - c;
            let Some(j) = jm.as_mut() else { continue };
            let (ja, jb, jmid) = (jac(model, eps, c, &ya), jac(model, eps, c, &yb), jac(model, eps, c, &ym));
            let mut dm_a = [[0.0; 4]; 4];
            let mut dm_b = [[0.0; 4]; 4];
            for r in 0..4 {
                for s in 0..4 {
                    let id = if r == s { 0.5 } else { 0.0 };
                    dm_a[r][s] = id + h / 8.0 * ja[r][s];
                    dm_b[r][s] = id - h / 8.0 * jb[r][s];
                }
            }
            let jc = |y: &V4| [0.0, 0.0, 0.0, -y[0]];
            let (jca, jcb, jcm) = (jc(&ya), jc(&yb), jc(&ym));
            let mut dm_c = [0.0; 4];
            for k in 0..4 {
                dm_c[k] = h / 8.0 * (jca[k] - jcb[k]);
            }
            let (jm_a, jm_b) = (mm(&jmid, &dm_a), mm(&jmid, &dm_b));
            let jm_c = mv(&jmid, &dm_c);
            for r in 0..4 {
                for s in 0..4 {
                    let id = if r == s { 1.0 } else { 0.0 };
                    j.set(row + r, 5 * i + s, -id - h / 6.0 * (ja[r][s] + 4.0 * jm_a[r][s]));
                    j.set(row + r, 5 * (i + 1) + s, id - h / 6.0 * (4.0 * jm_b[r][s] + jb[r][s]));
                }
                j.set(row + r, 5 * i + 4, -h / 6.0 * (jca[r] + 4.0 * (jcm[r] + jm_c[r]) + jcb[r]));
            }
            j.set(row + 4, 5 * i + 4, -1.0);
            j.set(row + 4, 5 * (i + 1) + 4, 1.0);
        }
        Ok((res, jm))
    }

    fn newton(&self, z: &mut [f64], max_iter: usize) -> Result<usize> {
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (mut res, _) = self.assemble(z, false)?;
        let mut rn = norm(&res);
        for it in 0..max_iter {
            let (r, jm) = self.assemble(z, true)?;
            res = r;
            let lu = jm.expect("jacobian requested").factor()?;
            let mut dz: Vec<f64> = res.iter().map(|x| -x).collect();
            lu.solve_in_place(&mut dz);
            let dn = norm(&dz);
            let mut alpha = 1.0;
            let mut trial = z.to_vec();
            let mut accepted = false;
            for _ in 0..12 {
                for k in 0..z.len() {
                    trial[k] = z[k] + alpha * dz[k];
                }
                let (rt, _) = self.assemble(&trial, false)?;
                let rtn = norm(&rt);
                if rtn.is_finite() && (rtn <= (1.0 - 0.25 * alpha) * rn || rtn < 1e-12) {
                    z.copy_from_slice(&trial);
                    rn = rtn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Stagnation at rounding level counts as convergence.
                if rn < 1e-9 {
                    return Ok(it + 1);
                }
                return Err(Error::NonConvergence {
                    what: "wave BVP Newton (line search)",
                    iterations: it + 1,
                    residual: rn,
                });
            }
            if alpha == 1.0 && (dn < 1e-11 || rn < 1e-13) {
                return Ok(it + 1);
            }
        }
        Err(Error::NonConvergence {
            what: "wave BVP Newton",
            iterations: max_iter,
            residual: rn,
        })
    }

    /// h·max|defect| of the collocation cubic at the quarter points.
    fn error_estimates(&self, z: &[f64]) -> Vec<f64> {
        (0..self.intervals())
            .map(|i| {
                let h = self.mesh[i + 1] - self.mesh[i];
                let c = z[5 * i + 4];
                let (ya, yb) = (Self::y(z, i), Self::y(z, i + 1));
                let (fa, fb) = (field(self.model, self.eps, c, &ya), field(self.model, self.eps, c, &yb));
                let mut worst = 0.0f64;
                for &t in &[0.25, 0.75] {
                    let (t2, t3) = (t * t, t * t * t);
                    let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2);
                    let (d00, d10, d01, d11) = (6.0 * t2 - 6.0 * t, 3.0 * t2 - 4.0 * t + 1.0, -6.0 * t2 + 6.0 * t, 3.0 * t2 - 2.0 * t);
                    let mut p = [0.0; 4];
                    let mut dp = [0.0; 4];
                    for k in 0..4 {
                        p[k] = h00 * ya[k] + h10 * h * fa[k] + h01 * yb[k] + h11 * h * fb[k];
                        dp[k] = (d00 * ya[k] + d01 * yb[k]) / h + d10 * fa[k] + d11 * fb[k];
                    }
                    let fp = field(self.model, self.eps, c, &p);
                    for k in 0..4 {
                        worst = worst.max(h * (dp[k] - fp[k]).abs() / (1.0 + p[k].abs()));
                    }
                }
                worst
            })
            .collect()
    }

    /// Halve every interval whose estimate exceeds `tol`; returns the new
    /// collocation and the interpolated unknowns.
    fn refine(&self, z: &[f64], est: &[f64], tol: f64) -> (Vec<f64>, Vec<f64>) {
        let mut mesh = Vec::with_capacity(self.mesh.len() * 2);
        let mut zn = Vec::with_capacity(z.len() * 2);
        for i in 0..self.intervals() {
            mesh.push(self.mesh[i]);
            zn.extend_from_slice(&z[5 * i..5 * i + 5]);
            if est[i] > tol {
                let ym = self.midpoint(z, i);
                mesh.push(0.5 * (self.mesh[i] + self.mesh[i + 1]));
                zn.extend_from_slice(&ym);
                zn.push(z[5 * i + 4]);
            }
        }
        let last = self.intervals();
        mesh.push(self.mesh[last]);
        zn.extend_from_slice(&z[5 * last..5 * last + 5]);
        (mesh, zn)
    }

    fn to_profile(&self, z: &[f64], newton_iterations: usize, max_est: f64) -> Result<WaveProfile> {
        let c = z[4];
        let mut zeta = Vec::with_capacity(2 * self.mesh.len());
        let mut states = Vec::with_capacity(2 * self.mesh.len());
        for i in 0..self.intervals() {
            zeta.push(self.mesh[i]);
            states.push(Self::y(z, i));
            zeta.push(0.5 * (self.mesh[i] + self.mesh[i + 1]));
            states.push(self.midpoint(z, i));
        }
        let last = self.intervals();
        zeta.push(self.mesh[last]);
        states.push(Self::y(z, last));
        let (res, _) = self.assemble(z, false)?;
        let n = res.len();
        let boundary = [res[0], res[1], res[n - 2], res[n - 1]]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let fl = field(self.model, self.eps, c, &states[0]);
        let fr = field(self.model, self.eps, c, &states[states.len() - 1]);
        let inf = |v: &V4| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let residuals = WaveResiduals {
            boundary,
            field_left: inf(&fl),
            field_right: inf(&fr),
            max_error_estimate: max_est,
            intervals: self.intervals(),
            newton_iterations,
        };
        WaveProfile::new(self.model, self.eps, c, zeta, states, residuals)
    }
}

fn solve_on_mesh(
    model: &Model,
    eps: f64,
    mesh: Vec<f64>,
    mut z: Vec<f64>,
    opts: &BvpOptions,
) -> Result<WaveProfile> {
    let mut coll = Collocation::new(model, eps, mesh)?;
    let mut iterations = coll.newton(&mut z, opts.max_newton)?;
    for _ in 0..opts.max_refinements {
        let est = coll.error_estimates(&z);
        let worst = est.iter().fold(0.0f64, |m, &x| m.max(x));
        if worst <= opts.tol {
            return coll.to_profile(&z, iterations, worst);
        }
        let (mesh, zn) = coll.refine(&z, &est, opts.tol);
        if mesh.len() - 1 > opts.max_intervals {
            return Err(Error::RefinementBudget {
                budget: opts.max_intervals,
            });
        }
        coll = Collocation::new(model, eps, mesh)?;
        z = zn;
        iterations += coll.newton(&mut z, opts.max_newton)?;
    }
    let est = coll.error_estimates(&z);
    let worst = est.iter().fold(0.0f64, |m, &x| m.max(x));
    if worst > opts.tol {
        return Err(Error::NonConvergence {
            what: "wave BVP mesh refinement",
            iterations: opts.max_refinements,
            residual: worst,
        });
    }
    coll.to_profile(&z, iterations, worst)
}

/// Continuation schedule from `eps_start` down to `eps`.
pub fn eps_schedule(eps: f64, opts: &BvpOptions) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = opts.eps_start;
    while e > eps * (1.0 + 1e-9) {
        out.push(e);
        e *= opts.eps_ratio;
    }
    out.push(eps);
    out
}

/// Solves for the wave at `eps` by continuation in ε from the singular
/// orbit at speed `c_guess`.
pub fn solve_wave_bvp_with(model: &Model, eps: f64, c_guess: f64, opts: &BvpOptions) -> Result<WaveProfile> {
    if !(eps > 0.0 && eps <= opts.eps_start.max(1e-2)) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1e-2], got {eps}")));
    }
    let orbit = singular_orbit(model, c_guess)?;
    let mut opts = opts.clone();
    let mut last_err = None;
    // Half-length doubling on boundary failure.
    for _ in 0..3 {
        match continuation(model, eps, &orbit, &opts) {
            Ok(w) if w.residuals.field_left < 1e-6 && w.residuals.field_right < 1e-6 => return Ok(w),
            Ok(w) => {
                last_err = Some(Error::NonConvergence {
                    what: "wave BVP boundary residual",
                    iterations: 0,
                    residual: w.residuals.field_left.max(w.residuals.field_right),
                })
            }
            Err(e) => return Err(e),
        }
        opts.half_length *= 2.0;
    }
    Err(last_err.expect("loop ran"))
}

fn continuation(model: &Model, eps: f64, orbit: &SingularOrbit, opts: &BvpOptions) -> Result<WaveProfile> {
    let mut prev: Option<(WaveProfile, f64)> = None;
    let mut result = None;
    for e in eps_schedule(eps, opts) {
        let mesh = initial_mesh(e, opts);
        let mut z = Vec::with_capacity(5 * mesh.len());
        let c = prev.as_ref().map(|(w, _)| w.c).unwrap_or(orbit.c0);
        for &zeta in &mesh {
            let mut y = composite_guess(model, orbit, e, zeta)?;
            if let Some((w, e_prev)) = &prev {
                // Carry over the previous step's correction to the composite.
                let old = w.state_at(zeta);
                let base = composite_guess(model, orbit, *e_prev, zeta)?;
                for k in 0..4 {
                    y[k] += old[k] - base[k];
                }
            }
            z.extend_from_slice(&y);
            z.push(c);
        }
        let w = solve_on_mesh(model, e, mesh, z, opts)?;
        prev = Some((w.clone(), e));
        result = Some(w);
    }
    result.ok_or_else(|| Error::InvalidInput("empty continuation schedule".into()))
}

/// Wave at `eps` on [−L, L] from an initial mesh of about `n` intervals.
pub fn solve_wave_bvp(model: &Model, eps: f64, l: f64, n: usize, c_guess: f64) -> Result<WaveProfile> {
    let opts = BvpOptions {
        half_length: l,
        intervals: n,
        ..BvpOptions::default()
    };
    solve_wave_bvp_with(model, eps, c_guess, &opts)
}

/// Largest deviation of (U, P) from the singular slow segments over
/// |ζ| ≥ `zeta_min`.
pub fn slow_segment_deviation(model: &Model, wave: &WaveProfile, orbit: &SingularOrbit, zeta_min: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, &z) in wave.zeta.iter().enumerate() {
        if z.abs() < zeta_min {
            continue;
        }
        let seg = if z < 0.0 { &orbit.right } else { &orbit.left };
        let (u, p) = seg.state_at(model, orbit.c0, z);
        worst = worst.max((wave.u[i] - u).abs()).max((wave.p[i] - p).abs());
    }
    worst
}

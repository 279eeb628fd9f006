//! The cubic potential F, diffusivity D = F', reaction R and the geometry of
//! the critical manifold they induce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Model parameters as read from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Regularization strength.
    pub eps: f64,
    /// Wavespeed. Overwritten by BVP solves; used by spectral stages.
    pub c: f64,
    /// Cubic potential, ascending degree.
    #[serde(rename = "F_coeffs")]
    pub f_coeffs: [f64; 4],
    /// Expanded cubic reaction, ascending degree.
    #[serde(rename = "R_coeffs")]
    pub r_coeffs: [f64; 4],
    /// Replace D = F' by the factored form 6(u - 7/12)(u - 5/6).
    #[serde(rename = "factored_diffusion")]
    pub use_factored_diffusion: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            c: 0.19686,
            // F(u) = 2u^3 - 4u^2 + (21/8)u
            f_coeffs: [0.0, 21.0 / 8.0, -4.0, 2.0],
            // R(u) = 5u(1 - u)(u - 1/5) = -u + 6u^2 - 5u^3
            r_coeffs: [0.0, -1.0, 6.0, -5.0],
            use_factored_diffusion: false,
        }
    }
}

/// Pointwise evaluation of the model polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelEval {
    pub f: f64,
    pub d: f64,
    pub d_prime: f64,
    pub r: f64,
    pub r_prime: f64,
}

/// Closed-form and root-found constants of the singular geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularGeometry {
    pub u_minus: f64,
    pub u_plus: f64,
    pub u_fold_left: f64,
    pub u_fold_right: f64,
    pub u_inflection: f64,
    pub v_star: f64,
}

/// A validated model with its polynomial derivatives precomputed.
#[derive(Debug, Clone)]
pub struct Model {
    params: ModelParams,
    f: Poly,
    g: Poly,
    d: Poly,
    d_prime: Poly,
    r: Poly,
    r_prime: Poly,
}

impl Model {
    pub fn new(params: ModelParams) -> Result<Self> {
        if !(params.eps >= 0.0) || !params.eps.is_finite() {
            return Err(Error::InvalidInput(format!("eps must be >= 0, got {}", params.eps)));
        }
        let f = Poly::new(params.f_coeffs.to_vec());
        let d = if params.use_factored_diffusion {
            &Poly::new(vec![-7.0 / 12.0, 1.0]) * &Poly::new(vec![-5.0, 6.0])
        } else {
            f.derivative()
        };
        let r = Poly::new(params.r_coeffs.to_vec());
        let model = Self {
            g: f.antiderivative(),
            d_prime: d.derivative(),
            r_prime: r.derivative(),
            f,
            d,
            r,
            params,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.fold_points()?;
        if !(a > 0.0 && b < 1.0) {
            return Err(Error::InvalidInput(format!(
                "folds ({a}, {b}) must lie in (0, 1)"
            )));
        }
        let (r, rp) = (&self.r, &self.r_prime);
        if r.eval(0.0).abs() > 1e-14 || r.eval(1.0).abs() > 1e-14 {
            return Err(Error::InvalidInput("R must vanish at 0 and 1".into()));
        }
        if !(rp.eval(0.0) < 0.0 && rp.eval(1.0) < 0.0) {
            return Err(Error::InvalidInput("R must be bistable (R' < 0 at 0 and 1)".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    /// Same polynomials, different (eps, c).
    pub fn with_eps_c(&self, eps: f64, c: f64) -> Self {
        let mut m = self.clone();
        m.params.eps = eps;
        m.params.c = c;
        m
    }

    pub fn eval(&self, u: f64) -> ModelEval {
        ModelEval {
            f: self.f.eval(u),
            d: self.d.eval(u),
            d_prime: self.d_prime.eval(u),
            r: self.r.eval(u),
            r_prime: self.r_prime.eval(u),
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        self.f.eval(u)
    }

    /// Quartic antiderivative of F with zero constant term.
    #[inline]
    pub fn g(&self, u: f64) -> f64 {
        self.g.eval(u)
    }

    #[inline]
    pub fn d(&self, u: f64) -> f64 {
        self.d.eval(u)
    }

    #[inline]
    pub fn d_prime(&self, u: f64) -> f64 {
        self.d_prime.eval(u)
    }

    #[inline]
    pub fn r(&self, u: f64) -> f64 {
        self.r.eval(u)
    }

    #[inline]
    pub fn r_prime(&self, u: f64) -> f64 {
        self.r_prime.eval(u)
    }

    pub fn potential(&self) -> &Poly {
        &self.f
    }

    pub fn diffusion(&self) -> &Poly {
        &self.d
    }

    pub fn reaction(&self) -> &Poly {
        &self.r
    }

    /// Ascending roots of D.
    pub fn fold_points(&self) -> Result<(f64, f64)> {
        self.d.quadratic_roots().ok_or_else(|| {
            Error::InvalidInput("D has no two distinct real roots; F is monotone".into())
        })
    }

    /// Inflection point of F (root of F'').
    pub fn inflection(&self) -> f64 {
        let c = self.f.coeffs();
        let a3 = c.get(3).copied().unwrap_or(0.0);
        let a2 = c.get(2).copied().unwrap_or(0.0);
        -a2 / (3.0 * a3)
    }

    /// Equal-area pair (u_minus, u_plus) with F(u_minus) = F(u_plus).
    ///
    /// Solves F(m + s) = F(m - s) for s > 0 about the inflection m by
    /// bracketed root finding on s; the pair then satisfies the equal-area
    /// condition because a cubic is odd about its inflection.
    pub fn equal_area_jumps(&self) -> Result<(f64, f64)> {
        let m = self.inflection();
        let (fl, fr) = self.fold_points()?;
        let fold_half_width = 0.5 * (fr - fl);
        // F(m+s) - F(m-s) = 2s (F'(m) + a3 s^2) changes sign exactly once for
        // s > fold half-width; divide out the trivial root s = 0.
        let h = |s: f64| (self.f(m + s) - self.f(m - s)) / s;
        let mut lo = fold_half_width;
        let mut hi = 2.0 * fold_half_width;
        let sign_lo = h(lo).signum();
        let mut grow = 0;
        while h(hi).signum() == sign_lo {
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::NonConvergence {
                    what: "equal-area bracket",
                    iterations: grow,
                    residual: h(hi).abs(),
                });
            }
        }
        let mut iterations = 0;
        while hi - lo > 1e-12 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if h(mid).signum() == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 200 {
                return Err(Error::NonConvergence {
                    what: "equal-area bisection",
                    iterations,
                    residual: h(mid).abs(),
                });
            }
        }
        // Newton polish to machine precision.
        let mut s = 0.5 * (lo + hi);
        for _ in 0..3 {
            let hp = (self.d(m + s) + self.d(m - s)) / s - h(s) / s;
            if hp != 0.0 {
                let step = h(s) / hp;
                if (s - step) > lo.min(hi) * 0.5 {
                    s -= step;
                }
            }
        }
        Ok((m - s, m + s))
    }

    /// Signed residual of the equal-area integral, by two-point
    /// Gauss-Legendre quadrature (exact for the cubic integrand).
    pub fn equal_area_residual(&self, u_minus: f64, u_plus: f64) -> f64 {
        let v = 0.5 * (self.f(u_minus) + self.f(u_plus));
        let half = 0.5 * (u_plus - u_minus);
        let mid = 0.5 * (u_plus + u_minus);
        let node = half / 3f64.sqrt();
        half * ((v - self.f(mid - node)) + (v - self.f(mid + node)))
    }

    pub fn singular_geometry(&self) -> Result<SingularGeometry> {
        let (u_minus, u_plus) = self.equal_area_jumps()?;
        let (u_fold_left, u_fold_right) = self.fold_points()?;
        Ok(SingularGeometry {
            u_minus,
            u_plus,
            u_fold_left,
            u_fold_right,
            u_inflection: self.inflection(),
            v_star: 0.5 * (self.f(u_minus) + self.f(u_plus)),
        })
    }
}

impl Default for Model {
    fn default() -> Self {
        Self::new(ModelParams::default()).expect("default model is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_at_reference_points() {
        let m = Model::default();
        let e0 = m.eval(0.0);
        assert_eq!(e0.f, 0.0);
        assert_eq!(e0.r, 0.0);
        assert_eq!(e0.r_prime, -1.0);
        let e1 = m.eval(1.0);
        assert!(e1.r.abs() < 1e-15);
        assert!((e1.r_prime + 4.0).abs() < 1e-14);
        assert!((e1.d - 5.0 / 8.0).abs() < 1e-15);
        let e = m.eval(2.0 / 3.0);
        assert!((e.d + 1.0 / 24.0).abs() < 1e-15);
        assert!((e.f - 61.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn folds_are_roots_of_d() {
        let m = Model::default();
        let (a, b) = m.fold_points().unwrap();
        assert!((a - 7.0 / 12.0).abs() < 1e-15);
        assert!((b - 0.75).abs() < 1e-15);
        assert!(m.d(a).abs() < 1e-14);
        // D changes sign exactly at the folds on (0, 1).
        let mut changes = Vec::new();
        let n = 10_000;
        for i in 0..n {
            let (x0, x1) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            if m.d(x0).signum() != m.d(x1).signum() {
                changes.push(0.5 * (x0 + x1));
            }
        }
        assert_eq!(changes.len(), 2);
        assert!((changes[0] - a).abs() < 1e-4 && (changes[1] - b).abs() < 1e-4);
    }

    #[test]
    fn equal_area_default_closed_form() {
        let m = Model::default();
        let (um, up) = m.equal_area_jumps().unwrap();
        let r3 = 3f64.sqrt();
        assert!((um - (8.0 - r3) / 12.0).abs() < 1e-15);
        assert!((up - (8.0 + r3) / 12.0).abs() < 1e-15);
        assert!((m.f(um) - m.f(up)).abs() < 1e-15);
        assert!((um + up - 4.0 / 3.0).abs() < 1e-15);
        assert!(m.equal_area_residual(um, up).abs() < 1e-15);
        let g = m.singular_geometry().unwrap();
        assert!(g.u_minus < g.u_fold_left && g.u_fold_left < g.u_inflection);
        assert!(g.u_inflection < g.u_fold_right && g.u_fold_right < g.u_plus);
        assert!((g.v_star - 61.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn equal_area_non_default_cubic() {
        // F(u) = 3u^3 - 4.5u^2 + 1.9u: inflection 1/2, folds symmetric.
        let params = ModelParams {
            f_coeffs: [0.0, 1.9, -4.5, 3.0],
            ..ModelParams::default()
        };
        let m = Model::new(params).unwrap();
        let (um, up) = m.equal_area_jumps().unwrap();
        assert!((m.f(um) - m.f(up)).abs() < 1e-13);
        assert!(m.equal_area_residual(um, up).abs() < 1e-13);
        let (a, b) = m.fold_points().unwrap();
        assert!(um < a && up > b);
    }

    #[test]
    fn factored_diffusion_option() {
        let params = ModelParams {
            use_factored_diffusion: true,
            ..ModelParams::default()
        };
        let m = Model::new(params).unwrap();
        let (a, b) = m.fold_points().unwrap();
        assert!((a - 7.0 / 12.0).abs() < 1e-12 && (b - 5.0 / 6.0).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn rejects_monotone_potential() {
        let params = ModelParams {
            f_coeffs: [0.0, 1.0, 0.0, 1.0],
            ..ModelParams::default()
        };
        assert!(Model::new(params).is_err());
    }

    #[test]
    fn rejects_monostable_reaction() {
        let params = ModelParams {
            r_coeffs: [0.0, 1.0, -1.0, 0.0],
            ..ModelParams::default()
        };
        assert!(Model::new(params).is_err());
    }

    #[test]
    fn params_roundtrip_through_toml_with_spelled_keys() {
        let text = "eps = 0.01\nc = 0.2\nF_coeffs = [0.0, 2.625, -4.0, 2.0]\nR_coeffs = [0.0, -1.0, 6.0, -5.0]\nfactored_diffusion = false\n";
        let p: ModelParams = toml::from_str(text).unwrap();
        assert_eq!(p.eps, 0.01);
        assert!(toml::from_str::<ModelParams>("eps = 1.0\nbogus = 2\n").is_err());
    }
}

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("reduced flow is singular near a fold: |D(U)| = {d:.3e} at U = {u}")]
    FoldProximity { u: f64, d: f64 },

    #[error("no sign change of {what} on [{a}, {b}]")]
    NoSignChange { what: &'static str, a: f64, b: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("integration step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("chart blowup at zeta = {zeta} (norm {norm:.3e})")]
    Blowup { zeta: f64, norm: f64 },

    #[error("frame leaves the chart: condition number {cond:.3e}")]
    ChartFailure { cond: f64 },

    #[error("lambda = {lambda} lies within {tol:e} of a Fredholm border")]
    OnBorder { lambda: Complex64, tol: f64 },

    #[error("end state at lambda = {lambda} is not hyperbolic with a 2/2 splitting (unstable count {unstable})")]
    NoSplitting { lambda: Complex64, unstable: usize },

    #[error("function vanishes on the contour at lambda = {lambda} (|f| = {modulus:.3e})")]
    ZeroOnContour { lambda: Complex64, modulus: f64 },

    #[error("contour refinement budget of {budget} samples exceeded")]
    RefinementBudget { budget: usize },

    #[error("winding sum {raw} is not within tolerance of an integer")]
    NonIntegerWinding { raw: f64 },

    #[error("winding not additive: box index {parent}, sub-box indices sum to {children}")]
    Additivity { parent: i32, children: i32 },

    #[error("degenerate jump: c*U - P vanishes at U = {u}")]
    DegenerateJump { u: f64 },

    #[error("eigenvalue collision: gap {gap:.3e}")]
    DegenerateSplitting { gap: f64 },

    #[error("simulation blew up at step {step}")]
    SimulationBlowup { step: usize },

    #[error("perturbation residual grew to {ratio:.2}x its initial value")]
    Instability { ratio: f64 },

    #[error("unexpected signature pattern: A- {minus:?}, A+ {plus:?}")]
    UnexpectedSignature { minus: [i8; 4], plus: [i8; 4] },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

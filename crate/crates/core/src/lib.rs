//! Shock-fronted travelling waves of a reaction–nonlinear-diffusion equation
//! with a small fourth-order regularization, and their spectral stability.
//!
//! The crate builds the wave (singular limit and collocation BVP), computes
//! the essential spectrum, evaluates a Riccati–Evans function for the point
//! spectrum, and cross-checks the result against reduced slow/fast problems
//! and direct simulation.

pub mod banded;
pub mod error;
pub mod essential;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod pde;
pub mod poly;
pub mod reduced;
pub mod riccati;
pub mod roots;
pub mod wave;
pub mod winding;

pub use error::{Error, Result};
pub use model::{Model, ModelParams};

// The guide's snippets run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/wave.md")]
    mod wave {}
    #[doc = include_str!("../../../book/src/essential.md")]
    mod essential {}
    #[doc = include_str!("../../../book/src/evans.md")]
    mod evans {}
    #[doc = include_str!("../../../book/src/reduced.md")]
    mod reduced {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

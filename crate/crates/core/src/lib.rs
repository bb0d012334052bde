//! Inexact proximal Newton-type solver for composite convex problems
//! `min F(x) = f(x) + g(x)`.
//!
//! Each outer iteration builds the model
//! `q_k(x) = f(x_k) + <grad f(x_k), x - x_k> + (x - x_k)^T H_k (x - x_k) / 2 + g(x)`
//! with `H_k = hess f(x_k) + alpha_k I`, solves it inexactly, and either takes
//! the full step (when the prox-gradient residual has dropped enough) or
//! backtracks along the step direction.
//!
//! Module map:
//!
//! - [`linalg`]: vectors, dense/sparse matrices, Hessian operators, power iteration
//! - [`losses`] and [`regularizers`]: the two halves of `F`
//! - [`residuals`]: `F`, the prox-gradient mapping `G`, the model `q_k` and its residual
//! - [`subsolver`]: coordinate descent / proximal gradient on `q_k`
//! - [`solver`]: the outer proximal Newton-type loop
//! - [`baselines`]: proximal gradient method
//! - [`diagnostics`]: rate fitting and bound scans
//! - [`data`]: LIBSVM parsing and synthetic data
//! - [`problems`]: bundled test instances

// `!(x > 0.0)` style tests are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod problem;
pub mod problems;
pub mod regularizers;
pub mod residuals;
pub mod solver;
pub mod subsolver;
pub mod trace;

pub use error::{Error, Result};
pub use problem::CompositeProblem;

// Book chapters are compiled as doc-tests so their listings stay in sync
// with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/composite-problems.md")]
    mod composite_problems {}
    #[doc = include_str!("../../../book/src/inner-solver.md")]
    mod inner_solver {}
    #[doc = include_str!("../../../book/src/outer-loop.md")]
    mod outer_loop {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

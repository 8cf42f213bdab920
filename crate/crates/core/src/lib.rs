//! Girsanov transforms of backward equations on a binary Wiener tree, and the
//! nonlinear Cameron-Martin fixed point that represents solutions of
//! quasi-linear parabolic systems
//! `u_t + f(u, grad u) . grad u = (1/2) Laplacian u + g(u, grad u)`, `u(., 0) = u0`.
//!
//! Everything on the tree is computed by exact enumeration over all `2^N`
//! paths, so martingale and change-of-measure identities hold to rounding.
//! The [`pde`] module supplies independent reference solutions and
//! [`fbsde_mc`] checks the forward-backward form by simulation.
//!
//! ```
//! use girsanov_bsde::cameron_martin::{solve_point, PicardOptions};
//! use girsanov_bsde::coefficients::CoefficientSet;
//! use girsanov_bsde::tree::PathTree;
//!
//! let burgers = CoefficientSet::from_catalog("burgers").unwrap();
//! let tree = PathTree::new(10, 0.05).unwrap();
//! let sol = solve_point(&burgers, 0.3, tree, &PicardOptions::default()).unwrap();
//! // -tanh is a steady state of viscous Burgers
//! assert!((sol.value[0] + 0.3f64.tanh()).abs() < 1e-2);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bsde;
pub mod cameron_martin;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod estimates;
pub mod fbsde_mc;
pub mod flow;
pub mod girsanov;
pub mod instances;
pub mod pde;
pub mod tree;

pub use coefficients::CoefficientSet;
pub use error::{Error, Result};
pub use tree::{AdaptedProcess, PathTree, TerminalVariable};

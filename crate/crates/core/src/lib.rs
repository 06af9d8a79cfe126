//! Inexact dual first-order methods for strongly convex QPs with linear
//! inequality constraints and box sets.
//!
//! The outer loop runs a dual (fast) gradient method on the Lagrangian dual;
//! each dual gradient comes from an approximate inner solve over the box.
//! [`certify`] turns accuracy targets into inner accuracy and iteration
//! bounds, and [`mpc`] wires everything into a receding-horizon controller.

pub mod bench;
pub mod certify;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mpc;
pub mod outer;
pub mod inner;
pub mod problem;
mod serde_ext;

pub use error::{Error, Result};
pub use linalg::{Bounds, DenseMatrix};
pub use problem::{constants, normalize, NormalizedQp, ProblemConstants, QpProblem};

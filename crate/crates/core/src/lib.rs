//! Simulator and property harness for the simplified 3D primitive equations
//! with physical boundary conditions on a box.
//!
//! The state is the horizontal velocity `v = (u1, u2)` on a node-centred
//! grid; the vertical velocity is diagnosed from `v`. The crate provides the
//! discrete operators, the projection onto the constrained space, an
//! IMEX time stepper, a priori diagnostics, and a kick-forced Markov chain
//! with empirical invariant-measure estimates.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod io;
pub mod kick;
pub mod linalg;
pub mod manufactured;
pub mod measure;
pub mod norms;
pub mod operators;
pub mod projection;

pub use error::{Error, Result};
pub use field::{HorizontalField, Scalar2D, Scalar3D};
pub use grid::{BoundaryClass, GridSpec};

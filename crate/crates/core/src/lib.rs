//! Numerical machinery for minimal sets of planar autonomous ODEs.
//!
//! Given a vector field `f`, the crate integrates `dx/dt = f(x)`, runs the
//! shrinking-ball Jordan-curve construction along a trajectory, detects
//! periodic returns and equilibria, and checks the boundary-integral
//! identities behind the classification of planar minimal sets.

// `!(a < b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod construct;
pub mod field;
pub mod flow;
pub mod geom;

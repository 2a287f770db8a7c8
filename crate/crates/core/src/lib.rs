//! Exact preimage computation for piecewise-linear feedforward networks.
//!
//! Given a network built from affine layers with identity, linear, ReLU or
//! PReLU activations and a target output, [`preimage::compute_preimage`]
//! returns every input that maps to the target as a finite union of
//! branches. Each branch is an affine map over free and slack variables
//! together with the linear inequalities those variables must satisfy. All
//! arithmetic is exact over arbitrary-precision rationals.

pub mod bench;
pub mod expr;
pub mod linsys;
pub mod network;
pub mod polyhedra;
pub mod preimage;
pub mod random;
pub mod rational;
pub mod report;
pub mod verify;

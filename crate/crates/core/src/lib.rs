//! Dimension-agnostic RBF-FD for the Poisson equation.
//!
//! The pipeline runs geometry → node positioning → stencil weights →
//! assembly → sparse solve:
//!
//! - [`geometry`]: domains built from unions and differences of balls.
//! - [`nodegen`]: boundary and interior node placement and nearest-neighbour search.
//! - [`approx`]: polyharmonic spline weights with monomial augmentation.
//! - [`discretize`]: ghost nodes, stencils and the global sparse system.
//! - [`linsolve`]: direct and preconditioned iterative solvers.
//! - [`problems`]: the manufactured benchmark, error norms and order selection.

pub mod approx;
pub mod discretize;
pub mod geometry;
pub mod linsolve;
pub mod nodegen;
pub mod problems;
pub mod sparse;

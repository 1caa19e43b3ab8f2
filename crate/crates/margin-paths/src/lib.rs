//! Gradient-descent and l2 regularization paths of linear classifiers.
//!
//! The crate computes the two canonical trajectories of a linear classifier
//! trained on a convex, strictly decreasing loss: the gradient-descent
//! iterate sequence and the constrained-minimizer curve `B -> argmin R over
//! the l2 ball of radius B`. On top of the solvers it provides the analysis
//! layer used to compare the two paths directionally, check margin bounds,
//! decompose datasets into their separable and strongly-convex parts, and
//! construct the piecewise losses (splices, oscillating tails) whose
//! regularization paths refuse to settle on a single direction.

pub mod analysis;
pub mod data;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod regpath;
pub mod risk;

pub use error::{Error, Result};

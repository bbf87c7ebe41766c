//! Low-rank representation clustering of subspaces on the Grassmann manifold.
//!
//! Image sets or video clips are summarized by orthonormal bases (points on
//! `G(p, d)`), related to each other through Grassmann Log maps, and
//! expressed as affine combinations of each other in every tangent space
//! under a nuclear-norm penalty. The learned coefficient matrix feeds a
//! normalized spectral clustering step.
//!
//! Modules:
//! - [`manifold`]: points, tangent vectors, Log/Exp maps, principal angles
//! - [`gram`]: the per-point tangent Gram tensor and its linearization constant
//! - [`solver`]: linearized augmented-Lagrangian iteration with SVT
//! - [`clustering`]: affinity, spectral clustering, k-means, matched accuracy
//! - [`pipeline`]: data formats, synthetic data, configuration and orchestration

pub mod clustering;
pub mod error;
pub mod gram;
pub mod linalg;
pub mod manifold;
pub mod parallel;
pub mod pipeline;
pub mod solver;

pub use error::{GlrrError, Result};
pub use gram::{build_gram, GramTensor};
pub use manifold::{GrassmannPoint, TangentVector};
pub use solver::{solve, CoefficientMatrix, SolveStatus, Solution, SolverConfig};

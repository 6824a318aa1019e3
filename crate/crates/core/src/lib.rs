//! First-order (Hermite) interpolation of curves on the compact Stiefel
//! manifold `St(n, r)` under the canonical metric.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: dense kernels with fixed conventions (sign-normalized QR,
//!   principal matrix logarithm, orthogonal completion).
//! * [`stiefel`]: tangent structure, canonical metric, geodesic exponential,
//!   iterative logarithm and distance.
//! * [`calculus`]: differentials of QR/SVD, of the Stiefel exponential, and
//!   finite-difference transport of velocities between tangent spaces.
//! * [`interpolate`]: quasi-cubic Hermite arcs, composite curves and the
//!   piecewise-geodesic / tangent-space RBF baselines.
//! * [`experiments`]: synthetic data, error studies and CSV reports used by
//!   the command line harness.

// `!(a < b)` is used on purpose so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod error;
pub mod experiments;
pub mod interpolate;
pub mod linalg;
pub mod stiefel;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use stiefel::{StiefelPoint, TangentVector};

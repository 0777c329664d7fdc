//! slicelab: a numerical laboratory for Riemannian metric families of the
//! form `beta dt^2 + g_t` on `I x F`.
//!
//! The crate provides:
//!
//! - [`metric`]: metric families, Lie-derivative tensors, monotonicity
//!   classification and the constant-curvature / warped model library;
//! - [`geometry`]: Christoffel symbols, geodesic shooting, two-point
//!   distances and radial growth probes;
//! - [`immersion`]: discrete immersed curves and grid patches with their
//!   induced geometry (tau, theta, mean curvature, slice-Laplacian
//!   formulas, eta and div Y, conformal checks);
//! - [`graph`]: the minimal-graph operator on periodic and Dirichlet
//!   grids with a damped Newton solver and closed-form specializations;
//! - [`flow`]: discrete length-descent flow for closed curves plus the
//!   geodesic-ball threshold experiments;
//! - [`scenario`]: config-driven experiment runner and verification suites.

pub mod error;
pub mod flow;
pub mod funcspec;
pub mod geometry;
pub mod graph;
pub mod immersion;
pub mod linalg;
pub mod metric;
pub mod report;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};

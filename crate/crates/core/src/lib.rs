//! Numerical gluing construction of an approximately Ricci-flat Kähler metric
//! on the Kummer K3 surface.
//!
//! - [`exterior`]: forms on charts, wedge, `d`, pullback, complex structures.
//! - [`eguchi_hanson`] and [`gibbons_hawking`]: the two local models and their
//!   identities, plus the isometry between them.
//! - [`curvature`]: finite-difference Christoffel symbols and Ricci tensor.
//! - [`kummer`]: the orbifold `T⁴/±1`, blow-up charts, the glued Kähler form
//!   on a periodic grid and its volume error.
//! - [`solver`]: discrete Laplacian, weighted norms, the Monge-Ampère fixed
//!   point iteration and the spectral checks.
//! - [`cli`]: the `kummer-k3` command line.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod curvature;
pub mod eguchi_hanson;
pub mod error;
pub mod exterior;
pub mod gibbons_hawking;
pub mod kummer;
pub mod solver;

pub use error::{Error, Result};

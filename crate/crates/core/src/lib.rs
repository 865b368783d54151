//! Numerical tools for one-phase and obstacle free boundary problems driven
//! by nonlocal operators `Lu = 2 pv int (u(x) - u(x+h)) K(h) dh` with kernels
//! trapped between two multiples of `|h|^{-n-2s}`.

// `!(x > 0.0)` is deliberate: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense matrix sweeps read better indexed.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod dirichlet;
pub mod error;
pub mod halfspace;
pub mod kernels;
pub mod mesh;
pub mod nonlocal_op;
pub mod obstacle;
pub mod onephase;
pub mod quadrature;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use kernels::{fractional_constant, KernelFamily, KernelSpec};

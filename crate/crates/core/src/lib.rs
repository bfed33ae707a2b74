//! Invariance pressure of control systems on R^d.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature pulls in
//! `std` and rayon to spread coverage rows and control-set samples over
//! threads; results are identical with and without it.
#![no_std]
// `!(x > 0.0)` also rejects NaN; index loops follow the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod controlset;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod norm;
pub mod pressure;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use norm::PNorm;

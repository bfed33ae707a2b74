//! Domain types: systems, controls, potentials and compact sets on R^d.

mod control;
mod potential;
mod range;
mod set;
mod system;

pub use control::{eval_control, QuantizedControl};
pub use potential::{eval_potential, Potential};
pub use range::ControlRange;
pub use set::{membership, CompactSet, Shape};
pub use system::{GeneralSystem, JacobianFn, LinearSystem, ScalarFieldFn, System, VectorFieldFn};

/// Default membership tolerance for closed sets.
pub const DEFAULT_SET_TOL: f64 = 1e-9;

//! Channel-flow experiments on boundary-layer dissipation in the vanishing
//! viscosity limit.
//!
//! The crate is organised bottom-up:
//!
//! * [`foliation`] builds the exponent schedule, the wall-distance layers, the
//!   partition of unity and the near-wall cutoff.
//! * [`fields`] holds the staggered channel grid, discrete derivatives, norms,
//!   region masks and the snapshot file format.
//! * [`mollify`] implements single- and multi-scale mollification and the
//!   mollifier commutator.
//! * [`solver`] advances the 2D incompressible Navier-Stokes equations with an
//!   exact discrete energy ledger.
//! * [`diagnostics`] evaluates dissipation functionals, the resolved energy
//!   balance and convergence metrics on trajectories.
//! * [`harness`] runs viscosity ladders, persists results and checks them.

// `!(x > 0.0)` also rejects NaN; index loops mirror the stencil formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod foliation;
pub mod harness;
pub mod io;
pub mod mollify;
pub mod numerics;
pub mod solver;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};

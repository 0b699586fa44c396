//! Reduced Bogoliubov–Dirac–Fock model of the polarized Dirac vacuum with an
//! ultraviolet cutoff, discretized on a periodic momentum lattice.
//!
//! Units: `m = c = 1`. The coupling `α` multiplies the Coulomb kernel.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod cli;
pub mod config;
pub mod density;
pub mod energy;
pub mod error;
pub mod family;
pub mod lattice;
pub mod manifest;
pub mod operator;
pub mod output;
pub mod quadrature;
pub mod renorm;
pub mod scf;
pub mod series;
pub mod spinor;

pub use error::{Error, Result};

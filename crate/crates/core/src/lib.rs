//! Statistics of a quantum emitter coupled to Anderson-localized modes of a
//! one-dimensional disordered multilayer.
//!
//! The crate is organised bottom-up:
//!
//! - [`stack`]: disorder specifications and seeded generation of layer stacks.
//! - [`solver`]: transfer/scattering quantities, the 1D Green's function and LDOS.
//! - [`modes`]: detection of quasi-mode resonances and Lorentzian fitting.
//! - [`cqed`]: mode volume, Purcell factor, loss and the strong-coupling criterion.
//! - [`stats`]: log-normal fits, histograms and interval estimates.
//! - [`ensemble`]: run configuration, parallel ensembles, persistence and export.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod cqed;
pub mod ensemble;
pub mod error;
pub mod modes;
pub mod solver;
pub mod stack;
pub mod stats;

pub use error::{Error, Result};

//! Complex Fermi curves of two-dimensional periodic Schrödinger operators
//! `(i∇ + A)² + V` with small magnetic potential, computed in a finite
//! plane-wave basis.

// `!(x < bound)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops mirror the matrix formulas they implement
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod commands;
pub mod config;
pub mod error;
pub mod fourier;
pub mod freecurve;
pub mod handle;
pub mod lattice;
pub mod morse;
pub mod operator;
pub mod output;
pub mod poly;
pub mod presets;
pub mod reduction;
pub mod sheet;

pub use error::{Error, Result};
pub use fourier::{Model, ModelParams, ParamOverrides};
pub use lattice::{DualPoint, Lattice};

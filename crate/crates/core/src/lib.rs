//! Galerkin-Koornwinder approximation, spectral analysis and center-manifold
//! reduction for scalar delay differential equations, with tools for the
//! Suarez-Schopf ENSO oscillator.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod bifurcation;
pub mod dde;
pub mod error;
pub mod gk;
pub mod koornwinder;
pub mod manifold;
pub mod ode;
pub mod poly;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};

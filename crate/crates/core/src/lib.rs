//! Riesz transforms, Haar and smooth directional wavelet projections, and
//! the Littlewood-Paley pieces of those projections on the periodic grid,
//! together with empirical `L^p` operator-norm estimation.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dwt;
pub mod dyadic;
pub mod error;
pub mod estimates;
pub mod filters;
pub mod grid;
pub mod haar;
pub mod multipliers;
pub mod operator;
pub mod suite;
pub mod wavelet;

pub use error::{Error, Result};
pub use num_complex::Complex64;

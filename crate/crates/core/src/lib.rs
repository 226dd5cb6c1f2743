//! Bound states of `-Laplace - beta delta_curve` in the plane, their shifts
//! under removal of a small arc around a marked point, and independent
//! reference solutions to check them against.

pub mod bsop;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod oracles;
pub mod perturb;
pub mod quadrature;
pub mod roots;
pub mod specfun;
pub mod tails;

pub use error::{Error, Result};

//! Strong-order time-stepping for linear stochastic heat and wave equations
//! on `(0, 1)` driven by additive finite-dimensional noise.
//!
//! * [`heat`]: implicit Euler-Maruyama and modified Crank-Nicolson (order 3/2).
//! * [`wave`]: modified Crank-Nicolson in displacement-velocity form (order 2).
//! * [`noise`]: Wiener paths on a dyadic master grid and the micro-grid
//!   Riemann sums that feed the correction terms.
//! * [`harness`]: Monte Carlo error studies and statistical validation.

pub mod error;
pub mod grid;
pub mod harness;
pub mod heat;
pub mod noise;
pub mod wave;

pub use error::{Error, Result};

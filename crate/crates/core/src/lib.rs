//! Lyapunov exponents of matrix cocycles over measure-preserving systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`]: 2×2 and d×d kernels, QR, spectral norm, half-plane action.
//! - [`dynamics`]: rotations, Bernoulli shifts, toral maps, Birkhoff sums.
//! - [`cocycle`]: the cocycle families and renormalized products.
//! - [`exponents`]: top exponent, QR spectrum, periodic orbits, Furstenberg check.
//! - [`hyperbolicity`]: cone certificates, growth tests, rational band oracle.
//! - [`barycentric`]: random barycentric subdivision, geometric and cocycle sides.
//! - [`butterfly`]: (E, α) rasters, slice measures, PGM output.

pub mod barycentric;
pub mod butterfly;
pub mod cocycle;
pub mod dynamics;
pub mod error;
pub mod exponents;
pub mod hyperbolicity;
pub mod matrix;
pub mod parallel;

pub use error::{Error, Result};

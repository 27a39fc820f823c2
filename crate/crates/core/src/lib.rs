//! Forward spectral solver for the double-scale space-time fractional
//! diffusion equation on (-1, 1) and recovery of its exponents (β, α, γ)
//! from center observations by regularized trust-region least squares.

pub mod caputo;
pub mod config;
pub mod error;
pub mod format;
pub mod io;
pub mod mittag_leffler;
pub mod objective;
pub mod presets;
pub mod quadrature;
pub mod spectral;
pub mod special;
pub mod sweep;
pub mod trust_region;

pub use error::{Error, Result};

//! Weyl-Titchmarsh theory for CMV operators.
//!
//! The crate builds five-diagonal unitary CMV matrices from Verblunsky coefficients, propagates
//! the polynomial solution families with transfer matrices, computes spectral measures and
//! m-functions of half-lattice truncations, and evaluates Green's functions and Weyl disks.

pub mod caratheodory;
pub mod disks;
pub mod error;
pub mod greens;
pub mod laurent;
pub mod spectral;
pub mod transfer;
pub mod verblunsky;
pub mod weyl;

pub use error::{CmvError, Result};

pub type C64 = num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

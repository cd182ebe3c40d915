//! Spectral Galerkin simulation of the stochastic clamped beam
//! `dy_t + y_xxxx dt = f dt + g dB` and numerical checks of its energy
//! identity, weighted multiplier identity, Carleman-type estimates and
//! boundary observability inequality.

pub mod beam;
pub mod energy;
pub mod error;
pub mod estimates;
pub mod field;
pub mod identity;
pub mod jet;
pub mod manufactured;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};

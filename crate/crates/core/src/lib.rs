//! Two-species Vlasov–Poisson–Boltzmann laboratory in a Hermite velocity
//! basis on a periodic torus.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod collision;
pub mod config;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod kinetic;
pub mod spectral;
pub mod transport;
pub mod velocity;

pub use error::{Error, Result};

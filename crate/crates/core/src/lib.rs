//! Chameleon signcryption with public verifiability, and the first-impression
//! avatar and ciphertext authentication protocols built on it.

pub mod chameleon;
pub mod error;
pub mod attacks;
pub mod biometric;
pub mod group;
pub mod identity;
pub mod ledger;
pub mod metrics;
pub mod protocols;
pub mod signcryption;
mod wire;

pub use error::{Error, Result};

//! Goal-oriented semantic communication laboratory.
//!
//! Two augmented views of each image train a shared encoder whose
//! standardized outputs are pushed towards an identity cross-correlation
//! matrix. The frozen encoder's latents are then sent over a simulated
//! AWGN / Rayleigh link and classified by a small task head.

pub mod augment;
pub mod channel;
pub mod encoder;
pub mod error;
pub mod goai;
pub mod harness;
pub mod numeric;

pub use error::{Result, ScgirError};

//! Radio signal simulation and unrolled GAN learning of transmitter and
//! channel characteristics.

pub mod error;
pub mod eval;
pub mod rng;
pub mod sim;
pub mod train;
pub mod unrolled;

pub use error::{CoreError, Result};

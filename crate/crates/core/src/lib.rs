pub mod bath;
pub mod dynamics;
pub mod error;
pub mod generators;
pub mod hpz;
pub mod linalg;
pub mod ode;
pub mod oscillator;
pub mod quad;
pub mod special;

pub use error::{Error, Result};

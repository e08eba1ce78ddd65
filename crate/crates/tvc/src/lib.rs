//! Six degree of freedom launch vehicle flight dynamics, linear model
//! extraction, Riccati-based gain synthesis, complementary navigation
//! filters, and a multi-rate closed-loop simulator.

pub mod analysis;
pub mod control;
pub mod environment;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod linearize;
pub mod navigation;
pub mod riccati;
pub mod sim;
pub mod vehicle;

mod error;
#[cfg(test)]
mod test_support;
pub use error::{Error, Result};

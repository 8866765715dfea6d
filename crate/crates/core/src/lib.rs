//! Fee-timing strategies for a blockchain user competing for block space.

pub mod cli;
pub mod ctmc;
pub mod error;
pub mod model;
pub mod rng;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};

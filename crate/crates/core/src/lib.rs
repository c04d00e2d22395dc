pub mod adaptive;
pub mod augment;
pub mod cli;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

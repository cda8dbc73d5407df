//! Thermal photon statistics of cavity-QED systems in the ultrastrong coupling regime.

pub mod convergence;
pub mod correlations;
pub mod dressed;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod model;
pub mod operator;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};

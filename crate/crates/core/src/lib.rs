//! Adaptive pointwise bandwidth selection for density estimation in the
//! convolution structure model `p = (1 − α)f + α(f ⋆ g)`.

pub mod bandwidth_grid;
pub mod error;
pub mod estimator_bank;
pub mod kernel_lab;
pub mod model;
mod quad;
pub mod risk_lab;
pub mod selector;
pub mod util;

pub use error::{Error, Result};

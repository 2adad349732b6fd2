//! Randomized gradient boosting with tree stumps, plus the structured norms,
//! selection laws and cosine-angle geometry that govern its convergence.

pub mod boosting;
pub mod config;
pub mod data;
pub mod error;
pub mod geometry;
pub mod learners;
pub mod losses;
mod lp;
pub mod norms;
pub mod numeric;
pub mod sampling;

pub use error::{Error, Result};

//! Support vector machines solved as dense QPs, cross-validated grid
//! search, baseline regressors, and a two-stage scenario forecasting
//! pipeline for yearly carbon prices.

pub mod baselines;
pub mod error;
pub mod fixtures;
pub mod kernels;
pub mod model;
pub mod notation;
pub mod persist;
pub mod pipeline;
pub mod qp;
pub mod reference;
pub mod report;
pub mod rng;
pub mod selection;
pub mod series;
pub mod svm;

pub use error::{Error, Result};

//! PAC bounds on the out-of-sample error of a k-nearest-neighbor classifier
//! that uses all in-sample data, built from inclusion and exclusion over
//! several held-out validation subsets.

pub mod combination_validation;
pub mod concentration;
pub mod dataset;
pub mod dependent_bounds;
pub mod error;
pub mod exec;
pub mod harness;
pub mod independent_bounds;
pub mod index;
pub mod neighbors;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

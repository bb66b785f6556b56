//! Robust local Gaussian process regression.
//!
//! For each query point a Gaussian process with a squared-exponential
//! covariance is fitted to its nearest training neighbors. Neighbors that do
//! not belong to the query's regime are absorbed by a sparse mean-shift
//! vector `γ` with at most `q` non-zeros, estimated jointly with the location
//! and covariance parameters under a perspective-transformed loss that stays
//! bounded below as the covariance degenerates.
//!
//! ```no_run
//! use rlgp::{estimator::{fit, EstimatorConfig}, neighborhood::select_neighbors, predictor::predict};
//! # fn demo(train: &rlgp::neighborhood::Dataset) -> rlgp::Result<()> {
//! let nb = select_neighbors(train, &[0.1, -0.2], 50)?;
//! let model = fit(&nb, &EstimatorConfig::default())?;
//! let pred = predict(&model)?;
//! println!("{} ± {}", pred.mean, pred.variance.sqrt());
//! # Ok(()) }
//! ```

pub mod error;
pub mod estimator;
pub mod kernel;
pub mod neighborhood;
pub mod predictor;
pub mod stats;
pub mod synthbench;

pub use error::{Result, RlgpError};

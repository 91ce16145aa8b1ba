//! Ordering-free inference for locally dependent cross-sectional data.
//!
//! The test statistics are U-type quadratic forms over randomized
//! subsamples, so neither the statistic nor its critical value needs to know
//! how observations are ordered or which ones are dependent. The crate
//! provides:
//!
//! - [`meantest`]: tests and confidence sets for a population mean,
//! - [`momenttest`]: the same machinery for moment-restriction models,
//! - [`graph`] and [`dgp`]: the random graphs and data-generating processes
//!   used in the simulation study,
//! - [`lambda`]: exact and Monte Carlo lambda-coefficients for Gaussian designs,
//! - [`harness`]: the Monte Carlo coverage runner behind the CLI.

pub mod data;
pub mod dgp;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lambda;
pub mod linalg;
pub mod meantest;
pub mod momenttest;
pub mod normal;
pub mod permute;

pub use data::{CriticalValueMethod, InferenceConfig, Sample};
pub use error::{Error, Result};
pub use linalg::{invert_spd, SymmetricMatrix};
pub use normal::{normal_cdf, normal_quantile};
pub use permute::{draw_bundle, draw_prefix, PermutationBundle, PermutationPrefix, RngStream, StreamFamily};
pub use graph::{DistanceMatrix, Graph};
pub use harness::{CoverageMode, CoverageRow, Design, ExperimentSpec, PreparedDesign};
pub use lambda::{LambdaMethod, LambdaReport};
pub use meantest::{mean_test, MeanStatistic, MeanTestResult};
pub use momenttest::MomentModel;

//! Observation-specific explanations for black-box regression models.
//!
//! A black box is only seen through its predictions `f(x_1), …, f(x_n)`.
//! [`omp::fit`] builds a sparse kernel surrogate `f*` that reproduces those
//! predictions to a chosen tolerance by greedily selecting samples, and
//! [`explain::explain`] turns the surrogate's kernel-translate coefficients
//! into a normalized importance score per observation.
//!
//! ```
//! use obs_explain::{explain, KernelConfig, KernelFamily, OmpConfig, PointSet};
//!
//! let points = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
//! let preds = [1.0, 2.0, 2.0, 9.0];
//! let kernel = KernelConfig::new(KernelFamily::Gaussian, 1.0).unwrap();
//! let (_model, report) = explain::explain(&points, &preds, kernel, &OmpConfig::with_tolerance(1e-6)).unwrap();
//! assert!(report.achieved_tolerance <= 1e-6);
//! assert_eq!(report.gamma.iter().cloned().fold(0.0, f64::max), 1.0);
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod explain;
pub mod hyper;
pub mod kernels;
pub mod omp;
pub mod points;

pub use data::Dataset;
pub use error::{Error, Result};
pub use explain::{ExplanationReport, SurrogateModel};
pub use kernels::{KernelConfig, KernelFamily};
pub use omp::{NewtonFactorization, OmpConfig, StopReason};
pub use points::PointSet;

//! Sparse posterior-mode (MAP) estimation for regression under the horseshoe
//! prior.
//!
//! The regression coefficients are treated as the latent variables of an EM
//! scheme: the E-step computes Gaussian conditional moments of the
//! coefficients, and the M-step updates the local shrinkage parameters in
//! closed form, the noise variance by plug-in, and the global shrinkage by a
//! bounded one-dimensional minimisation. After convergence the conditional
//! posterior mode is hard-thresholded at `threshold_scale / sqrt(n)`.
//!
//! Three data models are supported: Gaussian linear regression
//! ([`models::linear_fit`]), the normal-means model
//! ([`models::normal_means_fit`]) and logistic regression through Pólya-gamma
//! weights ([`models::logistic_fit`]). The [`sim`] module reproduces the
//! synthetic benchmark designs and scores fits.

pub mod data;
pub mod em;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod moments;
pub mod mstep;
pub mod optimize;
pub mod parallel;
pub mod sim;

pub use data::{Dataset, DesignSystem, Standardization, WeightedDataset};
pub use em::{fit, sparsify, EmConfig, FitResult, IterationRecord};
pub use error::{Error, Result};
pub use moments::{EstepMode, PosteriorMoments, ShrinkageState};
pub use mstep::Floors;

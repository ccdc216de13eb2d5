//! Restricted Boltzmann machines trained on datasets with missing entries.
//!
//! Gradients of the marginal log-likelihood need clamped expectations (given
//! each datum's observed entries) and free expectations. Both are estimated
//! from Gibbs samples; the proposed method seeds clamped chains from a
//! mean-field solution, keeps free chains persistent, and averages
//! conditional expectations instead of raw samples. A plain-sampling
//! baseline, an exact enumeration oracle and AIS evaluation are included.

pub mod ais;
pub mod bench;
pub mod brute;
pub mod check;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod format;
pub mod math;
pub mod meanfield;
pub mod oracle;
pub mod rbm;
pub mod rng;
pub mod run;
pub mod sampler;
pub mod trainer;

pub use dataset::{IncompleteDataset, IncompleteObservation};
pub use error::{Error, Result};
pub use rbm::{Clamp, Gradient, RbmParams};
pub use rng::RngStream;

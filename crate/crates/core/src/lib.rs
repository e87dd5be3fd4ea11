//! Quantized preconditioning for Monte Carlo solves of elliptic PDEs with a
//! log-normal random coefficient.
//!
//! The random coefficient is written `κ = exp(G)` with `G` a Gaussian field
//! truncated to its dominant Karhunen-Loève modes ([`field`]). The latent
//! Gaussian coordinates are quantized into `P` centroids ([`quantizer`]); one
//! preconditioner is built from the coefficient of each centroid ([`solver`])
//! and every sampled system ([`fem`]) is solved by PCG with the preconditioner
//! of its nearest centroid. [`driver`] runs whole campaigns and reports
//! iteration statistics and load balance.

pub mod driver;
pub mod error;
pub mod fem;
pub mod field;
mod format;
pub mod quantizer;
pub mod rng;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

//! Communication-efficient differentially private mean estimation in L2
//! geometry.
//!
//! * [`accountant`]: Rényi-DP bounds for the Gaussian, coordinate-subsampled
//!   Gaussian (CSGM) and sparsified Gaussian matrix-factorization (SGMF)
//!   mechanisms, conversion to `(ε, δ)` and noise calibration.
//! * [`transform`]: randomized Hadamard rotation and clipping.
//! * [`csgm`]: the one-shot sparsified mean estimator.
//! * [`matfac`]: factorizations of lower-triangular workloads.
//! * [`streaming`]: the sparsified matrix mechanism over adaptive streams and
//!   a DP-FTRL toy trainer.
//! * [`simlab`]: seeded experiment sweeps emitting CSV.

pub mod accountant;
pub mod cli;
pub mod csgm;
pub mod error;
pub mod matfac;
pub mod rng;
pub mod simlab;
pub mod streaming;
pub mod transform;

pub use error::{Error, Result};

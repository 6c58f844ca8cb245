//! Narrowband interference mitigation with a learned recommender.
//!
//! The crate simulates a single-carrier or direct-sequence spread-spectrum
//! link hit by one of five interference types, runs four mitigation
//! algorithms on the received block, measures the bit-error rate of each,
//! and trains random-forest regressors that predict those BERs from a
//! handful of scenario descriptors. The predictions drive a recommendation
//! of which mitigation to apply.
//!
//! Module map:
//!
//! - [`sigsim`]: signal of interest, interference, noise and mixing
//! - [`mitigate`]: notch, fractional Fourier, filter-bank and transversal
//!   mitigation plus a dispatcher
//! - [`ber`]: demodulation, BER measurement and the per-trial driver
//! - [`dataset`]: dataset generation, preprocessing and CSV persistence
//! - [`forest`]: CART regression trees, forests, MDI importance and RMSE
//! - [`recommend`]: recommendation, heuristic baseline and system evaluation

pub mod ber;
pub mod dataset;
mod error;
pub mod forest;
pub mod mitigate;
pub mod recommend;
mod rng;
pub mod sigsim;

pub use error::{Error, Result};
pub use rng::derive_seed;

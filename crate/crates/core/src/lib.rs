//! Robust state space model for noisy, irregularly spaced 1-D series such as
//! array CGH log2 ratios.
//!
//! The crate fits a local-level model with Student-t observation and
//! evolution errors by Gibbs sampling ([`sampler`]), calls breakpoints and
//! outliers from the posterior draws by AUC-based backward selection
//! ([`calling`]), and calibrates the calling threshold against real or
//! bootstrap reference arrays. [`simulation`] reproduces the artificial
//! chromosome benchmarks and ROC metrics; [`io`] handles probe tables and
//! result files.

pub mod calling;
pub mod error;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod simulation;
pub mod stats;


pub use calling::{CallKind, CallResult, CalibrationResult, ScoreMatrix};
pub use error::{Error, Result};
pub use model::{LatentState, PosteriorDraws, Priors, ProbeSeries};
pub use sampler::ChainConfig;

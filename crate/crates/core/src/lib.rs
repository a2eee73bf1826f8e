//! Structural-prior value verifiers.
//!
//! Monte Carlo value estimates are modelled as Binomial counts over a fixed
//! categorical support. The crate builds posterior distributions for those
//! counts, scores them with a statistics-based Wasserstein distance, trains
//! small verifiers on a synthetic reasoning tree with an exact value oracle,
//! and evaluates them with Best-of-N reranking and beam search.

pub mod annotate;
pub mod cli;
pub mod distance;
pub mod distributions;
pub mod env;
mod error;
pub mod eval;
pub mod fmt;
pub mod rng;
pub mod verifier;

pub use error::{Error, Result};

//! Bayesian higher-order hidden Markov models with a conditional tensor
//! factorization of the transition probabilities.
//!
//! The transition law of the latent chain mixes core kernels over latent class
//! tuples, one class per lag, so that lags with a single class drop out:
//!
//! `p(c_t | c_{t-1}, .., c_{t-q}) = Σ_h λ_{h_1..h_q}(c_t) Π_j π^(j)_{h_j}(c_{t-j})`.
//!
//! [`sampler::run`] fits the model; [`predict`] and [`evaluate`] score fits and
//! [`simulate`] generates synthetic benchmarks.

// `!(x > 0.0)` rejects NaN on purpose; index loops walk several arrays in step.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod emissions;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod model;
pub mod predict;
pub mod random;
pub mod sampler;
pub mod simulate;
pub mod transition;

pub use error::{Error, Result};
pub use model::{ChainState, EmissionModel, Family, ModelConfig, PosteriorSamples, TensorFactorization};
pub use sampler::{run, RunConfig};

//! Rating prediction and top-N recommendation over MovieLens-style data.
//!
//! The crate provides five predictors sharing one sparse utility matrix:
//!
//! - user-user and item-item neighborhood collaborative filtering
//!   ([`neighborhood_cf`]) on top of centered-cosine similarity ([`similarity`]),
//! - content-based prediction from binary item features ([`content_based`]),
//! - a latent-factor model trained by stochastic gradient descent ([`factorization`]),
//! - a small feed-forward rating classifier ([`neural`]).
//!
//! Every predictor implements [`Predictor`], so the holdout harness in
//! [`evaluation`] and the recommender in [`neighborhood_cf::recommend_top_n`]
//! work with any of them.

pub mod content_based;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod neighborhood_cf;
pub mod neural;
pub mod predictor;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, Result};
pub use predictor::{Prediction, Predictor};

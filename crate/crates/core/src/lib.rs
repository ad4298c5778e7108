//! Image privacy prediction from deep visual features and tags.
//!
//! The crate covers the whole desk-scale pipeline: feature-file ingestion and the
//! train/test protocol ([`corpus`]), kernel SVMs ([`svm`]), Bag-of-Tags encoding and
//! fusion ([`tag_vectorize`]), a convolutional tag classifier ([`tag_cnn`]), tag
//! analytics ([`tag_stats`]), classical baselines ([`baselines`]) and evaluation
//! ([`eval`]).

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod svm;
pub mod synth;
pub mod tag_cnn;
pub mod tag_stats;
pub mod tag_vectorize;

pub use corpus::{ImageRecord, PrivacyLabel, TagPool};
pub use error::{Error, Result};

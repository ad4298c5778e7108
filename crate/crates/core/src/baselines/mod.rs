//! Classical baselines: GIST scene descriptors, bag-of-visual-words over precomputed local
//! descriptors and the person-tag rule.

mod gist;
mod io;
mod kmeans;
mod rule;

pub use gist::{gist_extract, GaborBank, GaborKernel, GIST_DIM, GRID};
pub use io::{load_descriptors, load_pgm, read_descriptors, read_pgm, GrayImage};
pub use kmeans::{bovw_encode, kmeans_fit, KMeansFit, VisualVocab};
pub use rule::{rule_tag_classify, RulePolicy};

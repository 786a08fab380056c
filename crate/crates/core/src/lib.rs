//! Grammatical error correction as token-level edit labeling, with
//! self-training on synthetic errors sampled from the labeler itself.

pub mod corpus;
pub mod eval;
pub mod inference;
pub mod model;
pub mod sampler;
pub mod trainer;
pub mod transform;

pub use corpus::{tokenize, Dataset, Example, SentencePair, TokenSequence, SENTINEL};
pub use model::{Labeler, ModelConfig, ModelParams};
pub use transform::{apply_labels, extract_labels, LabelSequence, TransformLabel};

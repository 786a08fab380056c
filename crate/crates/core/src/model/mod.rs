//! The sequence labeler: a small transformer encoder with a binary error
//! detection head and a multiclass edit-label head.
//!
//! All weights live in one flat buffer described by a [`Layout`], so
//! gradients, optimizer moments and checkpoints share the same shape. The
//! network is generic over [`Scalar`]: training runs in `f32`, gradient
//! checks use an `f64` copy of the same weights.

mod adam;
mod encoder;
pub(crate) mod ops;

use std::fmt::Debug;
use std::iter::Sum;
use std::sync::Arc;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelVocab, TokenSequence, TokenVocab};
use crate::transform::{DetectionTargets, LabelSequence};

pub use adam::{Adam, AdamConfig};
pub use encoder::{encode, forward, loss, LossValue};

/// Floating-point type the network can run in.
pub trait Scalar: Float + Sum + Send + Sync + Debug + Default + 'static {
    fn c(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn c(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn c(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("label id {id} outside vocabulary of {size}")]
    LabelOutOfRange { id: usize, size: usize },
    #[error("token id {id} outside vocabulary of {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty input: the sentinel is required")]
    EmptyInput,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
}

fn default_init_scale() -> f64 {
    0.1
}

fn default_loss_weight() -> f64 {
    1.0
}

/// Shape hyperparameters of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Filled in from the vocabularies when a [`Labeler`] is built.
    pub vocab_size: usize,
    pub num_labels: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub init_scale: f64,
    /// Weight of the labeler cross-entropy relative to the detector's.
    pub gel_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::new(0, 0)
    }
}

impl ModelConfig {
    /// d=128, 2 layers, 4 heads, feed-forward 4d, 128 positions.
    pub fn new(vocab_size: usize, num_labels: usize) -> Self {
        ModelConfig {
            vocab_size,
            num_labels,
            d_model: 128,
            n_layers: 2,
            n_heads: 4,
            d_ff: 512,
            max_len: 128,
            init_scale: default_init_scale(),
            gel_weight: default_loss_weight(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.num_labels < 1 {
            return bad("num_labels must be positive");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.d_ff == 0 || self.max_len == 0 {
            return bad("d_ff and max_len must be positive");
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad("init_scale must be finite and non-negative");
        }
        if !(self.gel_weight.is_finite() && self.gel_weight >= 0.0) {
            return bad("gel_weight must be finite and non-negative");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InitKind {
    Uniform,
    Zero,
    One,
}

/// A named tensor in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    init: InitKind,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

/// Declared order of every tensor; also the checkpoint order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub specs: Vec<TensorSpec>,
    pub total: usize,
    pub(crate) tok_emb: usize,
    pub(crate) pos_emb: usize,
    pub(crate) layers: Vec<LayerOffsets>,
    pub(crate) ged_w: usize,
    pub(crate) ged_b: usize,
    pub(crate) gel_w: usize,
    pub(crate) gel_b: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut specs = Vec::new();
        let mut total = 0;
        let mut push = |name: String, rows: usize, cols: usize, init: InitKind| {
            let offset = total;
            total += rows * cols;
            specs.push(TensorSpec {
                name,
                rows,
                cols,
                offset,
                init,
            });
            offset
        };
        let (d, f) = (cfg.d_model, cfg.d_ff);
        use InitKind::*;
        let tok_emb = push("tok_emb".into(), cfg.vocab_size, d, Uniform);
        let pos_emb = push("pos_emb".into(), cfg.max_len, d, Uniform);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let mut p = |n: &str, r, c, k| push(format!("layer{l}.{n}"), r, c, k);
            layers.push(LayerOffsets {
                ln1_g: p("ln1.gain", 1, d, One),
                ln1_b: p("ln1.bias", 1, d, Zero),
                wq: p("attn.wq", d, d, Uniform),
                bq: p("attn.bq", 1, d, Zero),
                wk: p("attn.wk", d, d, Uniform),
                bk: p("attn.bk", 1, d, Zero),
                wv: p("attn.wv", d, d, Uniform),
                bv: p("attn.bv", 1, d, Zero),
                wo: p("attn.wo", d, d, Uniform),
                bo: p("attn.bo", 1, d, Zero),
                ln2_g: p("ln2.gain", 1, d, One),
                ln2_b: p("ln2.bias", 1, d, Zero),
                w1: p("ffn.w1", d, f, Uniform),
                b1: p("ffn.b1", 1, f, Zero),
                w2: p("ffn.w2", f, d, Uniform),
                b2: p("ffn.b2", 1, d, Zero),
            });
        }
        let ged_w = push("ged.w".into(), d, 2, Uniform);
        let ged_b = push("ged.b".into(), 1, 2, Zero);
        let gel_w = push("gel.w".into(), d, cfg.num_labels, Uniform);
        let gel_b = push("gel.b".into(), 1, cfg.num_labels, Zero);
        Layout {
            specs,
            total,
            tok_emb,
            pos_emb,
            layers,
            ged_w,
            ged_b,
            gel_w,
            gel_b,
        }
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }
}

/// All trainable weights (and, with the same shape, their gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub config: ModelConfig,
    layout: Arc<Layout>,
    data: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Embeddings and affine weights uniform in `±init_scale`, layer-norm
    /// gains 1, every bias 0.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Arc::new(Layout::new(&config));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![T::zero(); layout.total];
        let scale = config.init_scale;
        for spec in &layout.specs {
            let dst = &mut data[spec.range()];
            match spec.init {
                InitKind::Zero => {}
                InitKind::One => dst.fill(T::one()),
                InitKind::Uniform => {
                    for v in dst {
                        *v = T::c(rng.gen_range(-1.0..1.0) * scale);
                    }
                }
            }
        }
        Ok(ModelParams {
            config,
            layout,
            data,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Arc::new(Layout::new(&config));
        let data = vec![T::zero(); layout.total];
        Ok(ModelParams {
            config,
            layout,
            data,
        })
    }

    /// Wraps an existing flat buffer, checking its length against the layout.
    pub fn from_flat(config: ModelConfig, data: Vec<T>) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Arc::new(Layout::new(&config));
        if data.len() != layout.total {
            return Err(ModelError::LengthMismatch {
                what: "parameter buffer",
                expected: layout.total,
                got: data.len(),
            });
        }
        Ok(ModelParams {
            config,
            layout,
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            config: self.config.clone(),
            layout: Arc::clone(&self.layout),
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.layout.spec(name).map(|s| &self.data[s.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let range = self.layout.spec(name)?.range();
        Some(&mut self.data[range])
    }

    pub(crate) fn at(&self, offset: usize, len: usize) -> &[T] {
        &self.data[offset..offset + len]
    }

    pub(crate) fn at_mut(&mut self, offset: usize, len: usize) -> &mut [T] {
        &mut self.data[offset..offset + len]
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            layout: Arc::clone(&self.layout),
            data: self.data.iter().map(|v| U::c(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += other * scale`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b * scale;
        }
    }
}

/// Encoder output, one row of `d_model` values per position.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates<T = f32> {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> HiddenStates<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-position detector (2 classes, index 1 = error) and labeler rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistributions<T = f32> {
    pub rows: usize,
    pub num_labels: usize,
    pub ged: Vec<T>,
    pub gel: Vec<T>,
}

impl<T: Scalar> TokenDistributions<T> {
    pub fn ged_row(&self, i: usize) -> &[T] {
        &self.ged[i * 2..i * 2 + 2]
    }

    pub fn gel_row(&self, i: usize) -> &[T] {
        &self.gel[i * self.num_labels..(i + 1) * self.num_labels]
    }

    /// Probability that position `i` holds an error.
    pub fn error_prob(&self, i: usize) -> T {
        self.ged[i * 2 + 1]
    }
}

/// Weights together with the vocabularies that give them meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeler {
    pub params: ModelParams<f32>,
    pub tokens: TokenVocab,
    pub labels: LabelVocab,
}

impl Labeler {
    pub fn new(
        mut config: ModelConfig,
        tokens: TokenVocab,
        labels: LabelVocab,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.vocab_size = tokens.len();
        config.num_labels = labels.len();
        Ok(Labeler {
            params: ModelParams::init(config, seed)?,
            tokens,
            labels,
        })
    }

    pub fn encode_ids(&self, seq: &TokenSequence) -> Vec<usize> {
        self.tokens.encode(seq)
    }

    /// Distributions for a sentence; positions past `max_len` are dropped.
    pub fn predict(&self, seq: &TokenSequence) -> Result<TokenDistributions<f32>, ModelError> {
        forward(&self.params, &self.encode_ids(seq))
    }

    /// Loss and gradients for one labeled sentence.
    pub fn loss(
        &self,
        seq: &TokenSequence,
        labels: &LabelSequence,
        targets: &DetectionTargets,
    ) -> Result<LossValue<f32>, ModelError> {
        loss(
            &self.params,
            &self.encode_ids(seq),
            &self.labels.encode(labels),
            &targets.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            max_len: 6,
            ..ModelConfig::new(10, 5)
        }
    }

    #[test]
    fn layout_is_dense_and_ordered() {
        let layout = Layout::new(&tiny());
        let mut expected = 0;
        for s in &layout.specs {
            assert_eq!(s.offset, expected, "{}", s.name);
            expected += s.len();
        }
        assert_eq!(layout.total, expected);
        assert_eq!(layout.specs.first().unwrap().name, "tok_emb");
        assert_eq!(layout.specs.last().unwrap().name, "gel.b");
    }

    #[test]
    fn init_respects_scheme() {
        let p = ModelParams::<f32>::init(tiny(), 7).unwrap();
        assert!(p.tensor("tok_emb").unwrap().iter().all(|v| v.abs() <= 0.1));
        assert!(p.tensor("layer0.ln1.gain").unwrap().iter().all(|&v| v == 1.0));
        assert!(p.tensor("layer0.attn.bq").unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(p, ModelParams::<f32>::init(tiny(), 7).unwrap());
        assert_ne!(p, ModelParams::<f32>::init(tiny(), 8).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut c = tiny();
        c.n_heads = 3;
        assert!(matches!(c.validate(), Err(ModelError::InvalidConfig(_))));
        let c = tiny();
        assert!(ModelParams::<f32>::from_flat(c, vec![0.0; 3]).is_err());
    }
}

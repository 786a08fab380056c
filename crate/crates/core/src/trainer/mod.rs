//! Staged self-training: each stage trains on the genuine data plus the
//! sentences synthesized at the end of the previous stage, then samples
//! fresh errorful sentences from the labeler's own distributions.

pub mod corrupt;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, LabelVocab, SentencePair, TokenSequence, TokenVocab};
use crate::eval::{score_corpus, EvalError, ScoreReport};
use crate::inference::{correct, sentence_error_score, InferenceConfig, InferenceError};
use crate::model::{Adam, AdamConfig, Labeler, ModelConfig, ModelError, ModelParams};
use crate::sampler::{sample_label, SamplerError, SamplingConfig};
use crate::transform::{apply_labels, binarize, extract_labels, measure_error_rate, ApplyError, LabelSequence, TransformLabel};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// How a synthesized sentence gets its supervision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Re-extract labels from the synthesized sentence to the gold target.
    Realign,
    /// Keep the genuine labels; sampling is restricted to labels that
    /// preserve length.
    Literal,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Realign => "realign",
            Pairing::Literal => "literal",
        })
    }
}

impl FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "realign" => Ok(Pairing::Realign),
            "literal" => Ok(Pairing::Literal),
            _ => Err(format!("unknown pairing {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub stages: usize,
    pub epochs_per_stage: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Minimum count for `$APP_*` / `$REP_*` labels and input tokens.
    pub min_freq: usize,
    pub model: ModelConfig,
    /// Used for held-out correction and, unless overridden, synthesis.
    pub inference: InferenceConfig,
    pub synthesis_gamma: Option<f64>,
    pub synthesis_beta: Option<f64>,
    pub sampling: SamplingConfig,
    pub pairing: Pairing,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            stages: 1,
            epochs_per_stage: 5,
            lr: 1e-3,
            batch_size: 8,
            seed: 0,
            min_freq: 1,
            model: ModelConfig::new(0, 0),
            inference: InferenceConfig::default(),
            synthesis_gamma: None,
            synthesis_beta: None,
            sampling: SamplingConfig::default(),
            pairing: Pairing::Realign,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.stages == 0 || self.epochs_per_stage == 0 {
            return bad("stages and epochs_per_stage must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        self.inference.validate()?;
        self.synthesis().validate()?;
        self.sampling.validate()?;
        let mut m = self.model.clone();
        m.vocab_size = m.vocab_size.max(2);
        m.num_labels = m.num_labels.max(1);
        m.validate()?;
        Ok(())
    }

    /// Gate and bias used while synthesizing.
    pub fn synthesis(&self) -> InferenceConfig {
        InferenceConfig {
            gamma: self.synthesis_gamma.unwrap_or(self.inference.gamma),
            beta: self.synthesis_beta.unwrap_or(self.inference.beta),
            ..self.inference
        }
    }
}

/// Mixes a base seed with two indices (splitmix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the raw bits of every weight.
pub fn params_digest(params: &ModelParams<f32>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in params.as_slice() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// A sentence ready for the loss: token ids, label ids and error bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    pub labels: Vec<usize>,
    pub bits: Vec<u8>,
}

pub fn encode_example(labeler: &Labeler, source: &TokenSequence, labels: &LabelSequence) -> Encoded {
    Encoded {
        ids: labeler.tokens.encode(source),
        labels: labeler.labels.encode(labels),
        bits: binarize(labels).0,
    }
}

/// One pass over `data` in a seeded shuffled order. Per-example gradients
/// are computed in parallel and summed in order, so results do not depend
/// on the thread count. Returns the mean per-example loss.
pub fn train_epoch(
    labeler: &mut Labeler,
    opt: &mut Adam,
    data: &[Encoded],
    batch_size: usize,
    shuffle_seed: u64,
) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let mut total = 0.0;
    for batch in order.chunks(batch_size.max(1)) {
        let params = &labeler.params;
        let results: Vec<_> = batch
            .par_iter()
            .map(|&k| crate::model::loss(params, &data[k].ids, &data[k].labels, &data[k].bits))
            .collect();
        let mut grads = params.zeros_like();
        for r in results {
            let r = r?;
            total += r.total as f64;
            grads.add_scaled(&r.grads, 1.0);
        }
        let scale = 1.0 / batch.len() as f32;
        grads.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
        opt.step(&mut labeler.params, &grads)?;
    }
    Ok(total / data.len() as f64)
}

/// `row` restricted to `mask` and renormalized, with `beta` moved onto
/// `$KEP`: the `$KEP` entry becomes `min(1, p + beta)` and every other
/// entry shrinks by the same factor. `beta = 0` leaves the row unchanged
/// and `beta >= 1` puts all mass on `$KEP`.
pub fn keep_shifted_row(row: &[f32], beta: f64, mask: &[bool]) -> Vec<f64> {
    let mut q: Vec<f64> = row
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(i, (&p, &m))| if m || i == LabelVocab::KEEP { (p as f64).max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = q.iter().sum();
    if total <= 0.0 {
        q.iter_mut().for_each(|v| *v = 0.0);
        q[LabelVocab::KEEP] = 1.0;
        return q;
    }
    q.iter_mut().for_each(|v| *v /= total);
    let keep = q[LabelVocab::KEEP];
    let shifted = (keep + beta).min(1.0);
    let rest = if keep < 1.0 { (1.0 - shifted) / (1.0 - keep) } else { 0.0 };
    for (i, v) in q.iter_mut().enumerate() {
        *v = if i == LabelVocab::KEEP { shifted } else { *v * rest };
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub source: TokenSequence,
    pub labels: LabelSequence,
    /// Labels drawn from the model, applied to the genuine source.
    pub sampled: LabelSequence,
    /// Index of the genuine pair this derives from.
    pub origin: usize,
    pub stage: usize,
}

/// Samples an errorful version of a genuine source. `None` when the
/// detector's error score is at or below the gate.
pub fn synthesize_example<R: rand::Rng + ?Sized>(
    labeler: &Labeler,
    pair: &SentencePair,
    genuine_labels: &LabelSequence,
    gate: &InferenceConfig,
    sampling: &SamplingConfig,
    pairing: Pairing,
    rng: &mut R,
) -> Result<Option<LabelSequence>, TrainError> {
    let dist = labeler.predict(&pair.source)?;
    let mut score = sentence_error_score(&dist);
    if gate.length_normalized && pair.source.len() > 1 {
        score /= (pair.source.len() - 1) as f64;
    }
    if score <= gate.gamma {
        return Ok(None);
    }
    let vocab = &labeler.labels;
    let (first, rest) = match pairing {
        Pairing::Realign => (vocab.sentinel_mask(), vocab.known_mask()),
        Pairing::Literal => {
            let mut keep_only = vec![false; vocab.len()];
            keep_only[LabelVocab::KEEP] = true;
            (keep_only, vocab.length_preserving_mask())
        }
    };
    let mut sampled = Vec::with_capacity(pair.source.len());
    for i in 0..pair.source.len() {
        if i >= dist.rows {
            sampled.push(TransformLabel::Keep);
            continue;
        }
        let mask = if i == 0 { &first } else { &rest };
        let q = keep_shifted_row(dist.gel_row(i), gate.beta, mask);
        let id = sample_label(&q, sampling, rng)?;
        sampled.push(vocab.label(id).cloned().unwrap_or(TransformLabel::Keep));
    }
    debug_assert_eq!(sampled.len(), genuine_labels.len());
    Ok(Some(LabelSequence::new(sampled)))
}

/// Builds the supervised pair for a sampled label sequence.
pub fn pair_synthetic(
    pair: &SentencePair,
    genuine_labels: &LabelSequence,
    sampled: LabelSequence,
    pairing: Pairing,
    origin: usize,
    stage: usize,
) -> Result<SyntheticExample, TrainError> {
    let source = apply_labels(&pair.source, &sampled)?.tokens;
    let labels = match pairing {
        Pairing::Realign => extract_labels(&SentencePair::new(source.clone(), pair.target.clone())),
        Pairing::Literal => genuine_labels.clone(),
    };
    Ok(SyntheticExample {
        source,
        labels,
        sampled,
        origin,
        stage,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutput {
    pub examples: Vec<SyntheticExample>,
    /// Mean error rate of the sampled labels over every genuine sentence,
    /// counting gated-out sentences as zero.
    pub mean_error_rate: f64,
}

/// Synthesizes over the whole genuine set. Example `k` draws from its own
/// stream seeded by `(seed, stage, k)`.
pub fn synthesize_dataset(
    labeler: &Labeler,
    genuine: &Dataset,
    gate: &InferenceConfig,
    sampling: &SamplingConfig,
    pairing: Pairing,
    stage: usize,
) -> Result<SynthesisOutput, TrainError> {
    let results: Vec<Result<Option<SyntheticExample>, TrainError>> = genuine
        .examples
        .par_iter()
        .enumerate()
        .map(|(k, ex)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sampling.seed, stage as u64, k as u64));
            let sampled = synthesize_example(labeler, &ex.pair, &ex.labels, gate, sampling, pairing, &mut rng)?;
            sampled
                .map(|s| pair_synthetic(&ex.pair, &ex.labels, s, pairing, k, stage))
                .transpose()
        })
        .collect();
    let mut examples = Vec::new();
    let mut rate_sum = 0.0;
    for r in results {
        if let Some(s) = r? {
            rate_sum += measure_error_rate(&s.sampled);
            examples.push(s);
        }
    }
    let mean_error_rate = if genuine.is_empty() {
        0.0
    } else {
        rate_sum / genuine.len() as f64
    };
    Ok(SynthesisOutput {
        examples,
        mean_error_rate,
    })
}

/// Corrects every held-out source and scores against its target.
pub fn evaluate_heldout(labeler: &Labeler, heldout: &Dataset, config: &InferenceConfig) -> Result<ScoreReport, TrainError> {
    let sources: Vec<TokenSequence> = heldout.pairs().map(|p| p.source.clone()).collect();
    let targets: Vec<TokenSequence> = heldout.pairs().map(|p| p.target.clone()).collect();
    let hyps: Vec<TokenSequence> = sources
        .par_iter()
        .map(|s| correct(labeler, s, config).map(|t| t.output))
        .collect::<Result<_, _>>()?;
    Ok(score_corpus(&sources, &hyps, &targets)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub stage: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout: Option<ScoreReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub genuine_examples: usize,
    pub synthetic_examples: usize,
    pub heldout: Option<ScoreReport>,
    /// Sampled error rate of the set synthesized after this stage.
    pub synthesized: Option<usize>,
    pub synthesis_error_rate: Option<f64>,
    pub start_digest: u64,
    pub end_digest: u64,
}

pub const EPOCH_CSV_HEADER: &str = "stage,epoch,train_loss,precision,recall,f0.5";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        let (p, r, f) = match &self.heldout {
            Some(s) => (
                format!("{:.4}", s.precision * 100.0),
                format!("{:.4}", s.recall * 100.0),
                format!("{:.4}", s.f_half * 100.0),
            ),
            None => Default::default(),
        };
        format!("{},{},{:.6},{p},{r},{f}", self.stage, self.epoch, self.train_loss)
    }
}

pub struct GstOutcome {
    pub labeler: Labeler,
    pub epochs: Vec<EpochRecord>,
    pub stages: Vec<StageRecord>,
    /// Synthetic set produced after the last stage that trained on one.
    pub last_synthetic: Vec<SyntheticExample>,
}

impl GstOutcome {
    pub fn epoch_csv(&self) -> String {
        let mut s = String::from(EPOCH_CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            s.push_str(&e.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn final_f_half(&self) -> Option<f64> {
        self.stages.last().and_then(|s| s.heldout).map(|r| r.f_half)
    }
}

/// Vocabularies and a freshly initialized labeler for `train`.
pub fn init_labeler(train: &Dataset, config: &TrainingConfig) -> Result<Labeler, TrainError> {
    let tokens = TokenVocab::build(train, config.min_freq);
    let labels = LabelVocab::build(train.examples.iter().map(|e| &e.labels), config.min_freq);
    Ok(Labeler::new(config.model.clone(), tokens, labels, config.seed)?)
}

/// Runs every stage. With one stage this is plain supervised training.
/// Held-out scores are computed after every epoch when `heldout` is
/// non-empty.
pub fn run_gst(train: &Dataset, heldout: &Dataset, config: &TrainingConfig) -> Result<GstOutcome, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut labeler = init_labeler(train, config)?;
    let mut opt = Adam::new(AdamConfig::new(config.lr), labeler.params.len());
    let genuine: Vec<Encoded> = train
        .examples
        .iter()
        .map(|e| encode_example(&labeler, &e.pair.source, &e.labels))
        .collect();
    let gate = config.synthesis();
    let mut synthetic: Vec<SyntheticExample> = Vec::new();
    let mut epochs = Vec::new();
    let mut stages = Vec::new();

    for stage in 1..=config.stages {
        let start_digest = params_digest(&labeler.params);
        let mut data = genuine.clone();
        data.extend(synthetic.iter().map(|s| encode_example(&labeler, &s.source, &s.labels)));
        let mut last_score = None;
        for epoch in 1..=config.epochs_per_stage {
            let shuffle = derive_seed(config.seed, stage as u64, epoch as u64);
            let train_loss = train_epoch(&mut labeler, &mut opt, &data, config.batch_size, shuffle)?;
            let heldout_score = if heldout.is_empty() {
                None
            } else {
                Some(evaluate_heldout(&labeler, heldout, &config.inference)?)
            };
            log::info!(
                "stage {stage} epoch {epoch}: loss {train_loss:.4}{}",
                heldout_score.map(|s| format!(", held-out {s}")).unwrap_or_default()
            );
            last_score = heldout_score;
            epochs.push(EpochRecord {
                stage,
                epoch,
                train_loss,
                heldout: heldout_score,
            });
        }
        let synthetic_used = synthetic.len();
        let (synthesized, rate) = if stage < config.stages {
            let out = synthesize_dataset(&labeler, train, &gate, &config.sampling, config.pairing, stage)?;
            log::info!(
                "stage {stage}: synthesized {} sentences, sampled error rate {:.4}",
                out.examples.len(),
                out.mean_error_rate
            );
            synthetic = out.examples;
            (Some(synthetic.len()), Some(out.mean_error_rate))
        } else {
            (None, None)
        };
        stages.push(StageRecord {
            stage,
            genuine_examples: genuine.len(),
            synthetic_examples: synthetic_used,
            heldout: last_score,
            synthesized,
            synthesis_error_rate: rate,
            start_digest,
            end_digest: params_digest(&labeler.params),
        });
    }
    Ok(GstOutcome {
        labeler,
        epochs,
        stages,
        last_synthetic: synthetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::sampler::SamplingMode;
    use crate::transform::apply_until_fixed;

    fn toy() -> Dataset {
        Dataset::from_pairs(vec![
            SentencePair::new(tokenize("he go home"), tokenize("he goes home")),
            SentencePair::new(tokenize("the the cat sat"), tokenize("the cat sat")),
            SentencePair::new(tokenize("cat sat"), tokenize("the cat sat")),
            SentencePair::new(tokenize("she walks"), tokenize("she walks")),
        ])
    }

    fn small_config() -> TrainingConfig {
        TrainingConfig {
            model: ModelConfig {
                d_model: 8,
                n_heads: 2,
                n_layers: 1,
                d_ff: 16,
                max_len: 16,
                ..ModelConfig::new(0, 0)
            },
            lr: 0.01,
            batch_size: 2,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn zero_lr_keeps_params() {
        let data = toy();
        let cfg = small_config();
        let mut l = init_labeler(&data, &cfg).unwrap();
        let before = l.params.clone();
        let enc = vec![encode_example(&l, &data.examples[0].pair.source, &data.examples[0].labels)];
        let mut opt = Adam::new(AdamConfig::new(0.0), l.params.len());
        train_epoch(&mut l, &mut opt, &enc, 1, 0).unwrap();
        assert_eq!(l.params, before);
        assert!(matches!(train_epoch(&mut l, &mut opt, &[], 1, 0), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn loss_decreases_and_is_deterministic() {
        let data = toy();
        let cfg = small_config();
        let run = || {
            let mut l = init_labeler(&data, &cfg).unwrap();
            let enc: Vec<_> = data
                .examples
                .iter()
                .map(|e| encode_example(&l, &e.pair.source, &e.labels))
                .collect();
            let mut opt = Adam::new(AdamConfig::new(0.01), l.params.len());
            let losses: Vec<f64> = (0..10)
                .map(|e| train_epoch(&mut l, &mut opt, &enc, 2, e).unwrap())
                .collect();
            (losses, l.params)
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert!(a[9] < a[0], "{a:?}");
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }

    #[test]
    fn shifted_rows() {
        let all = [true; 3];
        let q = keep_shifted_row(&[0.5, 0.3, 0.2], 0.0, &all);
        assert!((q[0] - 0.5).abs() < 1e-7 && (q[1] - 0.3).abs() < 1e-7);
        let q = keep_shifted_row(&[0.5, 0.3, 0.2], 0.25, &all);
        assert!((q[0] - 0.75).abs() < 1e-7);
        assert!((q[1] - 0.15).abs() < 1e-7 && (q[2] - 0.1).abs() < 1e-7);
        assert_eq!(keep_shifted_row(&[0.1, 0.9, 0.0], 1.0, &all), vec![1.0, 0.0, 0.0]);
        let q = keep_shifted_row(&[0.2, 0.4, 0.4], 0.0, &[true, false, true]);
        assert!((q[0] - 1.0 / 3.0).abs() < 1e-7 && q[1] == 0.0);
        let q = keep_shifted_row(&[0.0, 1.0, 0.0], 0.0, &[true, false, true]);
        assert_eq!(q, vec![1.0, 0.0, 0.0]);
    }

    fn trained(stages: usize) -> (Dataset, GstOutcome) {
        let data = toy();
        let cfg = TrainingConfig {
            stages,
            epochs_per_stage: 3,
            ..small_config()
        };
        let out = run_gst(&data, &data, &cfg).unwrap();
        (data, out)
    }

    #[test]
    fn beta_one_reproduces_genuine_sources() {
        let (data, out) = trained(1);
        let gate = InferenceConfig { gamma: 0.0, beta: 1.0, ..InferenceConfig::default() };
        for pairing in [Pairing::Realign, Pairing::Literal] {
            for mode in [SamplingMode::GumbelSoftmax, SamplingMode::Multinomial, SamplingMode::Random] {
                let s = SamplingConfig { mode, tau: 1.0, seed: 4 };
                let syn = synthesize_dataset(&out.labeler, &data, &gate, &s, pairing, 1).unwrap();
                assert_eq!(syn.examples.len(), data.len());
                assert_eq!(syn.mean_error_rate, 0.0);
                for e in &syn.examples {
                    assert_eq!(e.source, data.examples[e.origin].pair.source);
                    assert_eq!(e.labels, data.examples[e.origin].labels);
                }
            }
        }
        let closed = InferenceConfig { gamma: 100.0, ..gate };
        let syn = synthesize_dataset(&out.labeler, &data, &closed, &SamplingConfig::default(), Pairing::Realign, 1).unwrap();
        assert!(syn.examples.is_empty());
    }

    #[test]
    fn realigned_examples_reach_target() {
        let (data, out) = trained(1);
        let gate = InferenceConfig { gamma: 0.0, beta: 0.0, ..InferenceConfig::default() };
        for seed in 0..50 {
            let s = SamplingConfig { mode: SamplingMode::Random, tau: 1.0, seed };
            let syn = synthesize_dataset(&out.labeler, &data, &gate, &s, Pairing::Realign, 1).unwrap();
            for e in syn.examples {
                assert_eq!(e.labels.len(), e.source.len());
                let target = &data.examples[e.origin].pair.target;
                let d = crate::transform::levenshtein(e.source.words(), target.words());
                assert_eq!(&apply_until_fixed(&e.source, target, d.max(5)).0, target);
            }
            let lit = synthesize_dataset(&out.labeler, &data, &gate, &s, Pairing::Literal, 1).unwrap();
            for e in lit.examples {
                assert_eq!(e.source.len(), data.examples[e.origin].pair.source.len());
                assert!(e.sampled.iter().all(TransformLabel::preserves_length));
            }
        }
    }

    #[test]
    fn staged_bookkeeping() {
        let (_, one) = trained(1);
        assert_eq!(one.stages.len(), 1);
        assert_eq!(one.stages[0].synthetic_examples, 0);
        assert_eq!(one.epochs.len(), 3);

        let (_, three) = trained(3);
        assert_eq!(three.stages.len(), 3);
        for w in three.stages.windows(2) {
            assert_eq!(w[1].start_digest, w[0].end_digest);
        }
        assert!(three.stages.iter().all(|s| s.heldout.is_some()));
        assert!(three.stages[2].synthesized.is_none());
        assert!(three.epoch_csv().starts_with(EPOCH_CSV_HEADER));
        assert_eq!(three.epoch_csv().lines().count(), 10);
        // The first stage of a staged run matches single-stage training.
        assert_eq!(three.stages[0].end_digest, one.stages[0].end_digest);
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.stages = 0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.sampling.tau = 0.0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.inference.gamma = -1.0;
        assert!(c.validate().is_err());
        assert!(small_config().validate().is_ok());
    }
}

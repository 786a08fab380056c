//! Iterative correction with a `$KEP` bias and a sentence-level stop gate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabelVocab, TokenSequence};
use crate::model::{Labeler, ModelError, TokenDistributions};
use crate::transform::{apply_labels, ApplyError, LabelSequence, TransformLabel};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid inference config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Stop once the sentence error score is at most this.
    pub gamma: f64,
    /// Added to the `$KEP` probability before the argmax.
    pub beta: f64,
    pub max_iters: usize,
    /// Divide the score by the number of words before comparing to `gamma`.
    pub length_normalized: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            gamma: 0.5,
            beta: 0.2,
            max_iters: 5,
            length_normalized: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(InferenceError::InvalidConfig(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(InferenceError::InvalidConfig(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if self.max_iters == 0 {
            return Err(InferenceError::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sum of error probabilities over every position except the sentinel.
pub fn sentence_error_score(dist: &TokenDistributions<f32>) -> f64 {
    (1..dist.rows).map(|i| dist.error_prob(i) as f64).sum()
}

/// Argmax of `row` after adding `beta` to `$KEP`, over the allowed ids.
/// `$KEP` is always allowed; ties go to the lower id.
pub fn biased_argmax(row: &[f32], beta: f64, allowed: &[bool]) -> usize {
    let mut best = LabelVocab::KEEP;
    let mut best_v = row[LabelVocab::KEEP] as f64 + beta;
    for (i, &p) in row.iter().enumerate() {
        if i != LabelVocab::KEEP && allowed[i] && (p as f64) > best_v {
            best = i;
            best_v = p as f64;
        }
    }
    best
}

/// Biased labels for every position of `seq`. Positions the encoder did
/// not see (past `max_len`) keep their token.
pub fn predict_labels(labeler: &Labeler, dist: &TokenDistributions<f32>, seq_len: usize, beta: f64) -> LabelSequence {
    let sentinel = labeler.labels.sentinel_mask();
    let known = labeler.labels.known_mask();
    (0..seq_len)
        .map(|i| {
            if i >= dist.rows {
                return TransformLabel::Keep;
            }
            let mask = if i == 0 { &sentinel } else { &known };
            let id = biased_argmax(dist.gel_row(i), beta, mask);
            labeler.labels.label(id).cloned().unwrap_or(TransformLabel::Keep)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub input: TokenSequence,
    pub labels: LabelSequence,
    pub score: f64,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTrace {
    pub rounds: Vec<Round>,
    pub output: TokenSequence,
}

impl CorrectionTrace {
    pub fn applied_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.applied).count()
    }

    /// One line per round, then the final sentence.
    pub fn report(&self) -> String {
        let mut s = String::new();
        for (k, r) in self.rounds.iter().enumerate() {
            let _ = writeln!(
                s,
                "round {k}\tscore {:.4}\t{}\t{}\t{}",
                r.score,
                if r.applied { "applied" } else { "stop" },
                r.labels,
                r.input.detokenize()
            );
        }
        let _ = writeln!(s, "final\t{}", self.output.detokenize());
        s
    }
}

/// Corrects one sentence, predicting and applying labels until the score
/// falls to `gamma`, nothing would change, or `max_iters` rounds applied.
pub fn correct(labeler: &Labeler, sentence: &TokenSequence, config: &InferenceConfig) -> Result<CorrectionTrace, InferenceError> {
    config.validate()?;
    let mut cur = sentence.clone();
    let mut rounds = Vec::new();
    while rounds.len() < config.max_iters {
        let dist = labeler.predict(&cur)?;
        let mut score = sentence_error_score(&dist);
        if config.length_normalized && cur.len() > 1 {
            score /= (cur.len() - 1) as f64;
        }
        let labels = predict_labels(labeler, &dist, cur.len(), config.beta);
        if score <= config.gamma || labels.is_all_keep() {
            rounds.push(Round {
                input: cur.clone(),
                labels,
                score,
                applied: false,
            });
            break;
        }
        let next = apply_labels(&cur, &labels)?.tokens;
        let applied = next != cur;
        rounds.push(Round {
            input: cur,
            labels,
            score,
            applied,
        });
        cur = next;
        if !applied {
            break;
        }
    }
    Ok(CorrectionTrace { rounds, output: cur })
}

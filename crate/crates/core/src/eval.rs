//! Span-level precision, recall and F0.5 against a single reference.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenSequence;
use crate::transform::{align, EditOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{what} has {got} sentences, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Weighted F-measure on percentages. Zero when both inputs are zero.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

/// Replace source tokens `[start, end)` (full indices, sentinel at 0) with
/// the space-joined `replacement`, which is empty for deletions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EditSet {
    pub edits: BTreeSet<Edit>,
}

impl EditSet {
    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

/// Edits turning `source` into `corrected`; adjacent non-matching
/// operations collapse into one edit.
pub fn extract_edits(source: &TokenSequence, corrected: &TokenSequence) -> EditSet {
    let tgt = corrected.tokens();
    let mut edits = BTreeSet::new();
    let mut pos = 1;
    let mut open: Option<(usize, Vec<&str>)> = None;
    for op in align(source, corrected) {
        match op {
            EditOp::Match { .. } => {
                if let Some((start, words)) = open.take() {
                    edits.insert(Edit {
                        start,
                        end: pos,
                        replacement: words.join(" "),
                    });
                }
                pos += 1;
            }
            EditOp::Substitute { tgt: t, .. } => {
                open.get_or_insert((pos, Vec::new())).1.push(&tgt[t]);
                pos += 1;
            }
            EditOp::Delete { .. } => {
                open.get_or_insert((pos, Vec::new()));
                pos += 1;
            }
            EditOp::Insert { tgt: t } => {
                open.get_or_insert((pos, Vec::new())).1.push(&tgt[t]);
            }
        }
    }
    if let Some((start, words)) = open {
        edits.insert(Edit {
            start,
            end: pos,
            replacement: words.join(" "),
        });
    }
    EditSet { edits }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Fractions in `[0, 1]`.
    pub precision: f64,
    pub recall: f64,
    pub f_half: f64,
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |d: usize| if d == 0 { 1.0 } else { tp as f64 / d as f64 };
        let precision = ratio(tp + fp);
        let recall = ratio(tp + fn_);
        ScoreReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_half: f_beta(precision * 100.0, recall * 100.0, 0.5) / 100.0,
        }
    }

    pub const CSV_HEADER: &'static str = "tp,fp,fn,precision,recall,f0.5";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.4},{:.4}",
            self.tp,
            self.fp,
            self.fn_,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f_half * 100.0
        )
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P {:.1} / R {:.1} / F0.5 {:.1}",
            self.precision * 100.0,
            self.recall * 100.0,
            self.f_half * 100.0
        )
    }
}

/// Micro-averaged scores over a corpus.
pub fn score_corpus(
    sources: &[TokenSequence],
    hypotheses: &[TokenSequence],
    references: &[TokenSequence],
) -> Result<ScoreReport, EvalError> {
    for (what, got) in [("hypotheses", hypotheses.len()), ("references", references.len())] {
        if got != sources.len() {
            return Err(EvalError::LengthMismatch {
                what,
                expected: sources.len(),
                got,
            });
        }
    }
    let (tp, fp, fn_) = (0..sources.len())
        .into_par_iter()
        .map(|k| {
            let hyp = extract_edits(&sources[k], &hypotheses[k]).edits;
            let gold = extract_edits(&sources[k], &references[k]).edits;
            let tp = hyp.intersection(&gold).count();
            (tp, hyp.len() - tp, gold.len() - tp)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(ScoreReport::from_counts(tp, fp, fn_))
}

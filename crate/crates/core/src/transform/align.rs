//! Minimal token-level alignment and label extraction.

use super::rules;
use super::{CaseRule, LabelSequence, TransformLabel, VerbTag};
use crate::corpus::{SentencePair, TokenSequence};

/// One alignment step over full token indices (sentinel at 0 on both sides).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditOp {
    Match { src: usize, tgt: usize },
    Substitute { src: usize, tgt: usize },
    Delete { src: usize },
    Insert { tgt: usize },
}

impl EditOp {
    pub fn cost(&self) -> usize {
        match self {
            EditOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

/// Unit-cost token edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimal-cost alignment of the words of `source` and `target`.
///
/// Ties are broken left to right, preferring match, then substitution,
/// then deletion, then insertion: a suffix-cost table is filled first and
/// the path is then walked forward, taking the highest-priority step that
/// stays on an optimal path.
pub fn align(source: &TokenSequence, target: &TokenSequence) -> Vec<EditOp> {
    let s = source.tokens();
    let t = target.tokens();
    let (n, m) = (s.len(), t.len());
    // rest[i][j]: cost of aligning s[i..] with t[j..], for i in 1..=n, j in 1..=m.
    let w = m + 1;
    let mut rest = vec![0usize; (n + 1) * w];
    for i in (1..=n).rev() {
        for j in (1..=m).rev() {
            rest[i * w + j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag = rest[(i + 1) * w + j + 1] + usize::from(s[i] != t[j]);
                let del = rest[(i + 1) * w + j] + 1;
                let ins = rest[i * w + j + 1] + 1;
                diag.min(del).min(ins)
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (1, 1);
    while i < n || j < m {
        let here = rest[i * w + j];
        if i < n && j < m {
            if s[i] == t[j] && rest[(i + 1) * w + j + 1] == here {
                ops.push(EditOp::Match { src: i, tgt: j });
                i += 1;
                j += 1;
                continue;
            }
            if s[i] != t[j] && rest[(i + 1) * w + j + 1] + 1 == here {
                ops.push(EditOp::Substitute { src: i, tgt: j });
                i += 1;
                j += 1;
                continue;
            }
        }
        if i < n && rest[(i + 1) * w + j] + 1 == here {
            ops.push(EditOp::Delete { src: i });
            i += 1;
        } else {
            ops.push(EditOp::Insert { tgt: j });
            j += 1;
        }
    }
    ops
}

/// Labels plus bookkeeping about what one pass could not express.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub labels: LabelSequence,
    /// Insertions left for a later round: extra insertions at one anchor,
    /// or insertions whose anchor already carries another edit.
    pub deferred_insertions: usize,
}

fn g_transform(
    s: &[String],
    t: &[String],
    i: usize,
    j: usize,
    labels: &[TransformLabel],
    inserts: &[Vec<usize>],
) -> Option<(TransformLabel, usize)> {
    let (src, tgt) = (&s[i], &t[j]);
    if let Some(rule) = CaseRule::ALL
        .into_iter()
        .find(|&r| rules::apply_case(src, r) == *tgt)
    {
        return Some((TransformLabel::Case(rule), 0));
    }
    if i + 1 < s.len()
        && inserts[i].is_empty()
        && labels[i + 1] == TransformLabel::Delete
        && src.len() + s[i + 1].len() == tgt.len()
        && tgt.starts_with(src.as_str())
        && tgt.ends_with(s[i + 1].as_str())
    {
        return Some((TransformLabel::Merge, 0));
    }
    if let Some(parts) = rules::split_token(src) {
        let tail = &inserts[i];
        if parts[0] == *tgt
            && tail.len() >= parts.len() - 1
            && parts[1..]
                .iter()
                .zip(tail)
                .all(|(p, &k)| *p == t[k])
        {
            return Some((TransformLabel::Split, parts.len() - 1));
        }
    }
    if rules::toggle_number(src).as_deref() == Some(tgt.as_str()) {
        return Some((TransformLabel::NounNumber, 0));
    }
    VerbTag::ALL
        .into_iter()
        .find(|&tag| rules::inflect_verb(src, tag).as_deref() == Some(tgt.as_str()))
        .map(|tag| (TransformLabel::VerbForm(tag), 0))
}

/// Extracts the corrective labels for a pair, see [`extract_labels`].
pub fn extract_labels_detailed(pair: &SentencePair) -> Extraction {
    let s = pair.source.tokens();
    let t = pair.target.tokens();
    let ops = align(&pair.source, &pair.target);

    let mut labels = vec![TransformLabel::Keep; s.len()];
    let mut inserts: Vec<Vec<usize>> = vec![Vec::new(); s.len()];
    let mut subs = Vec::new();
    let mut anchor = 0;
    for op in &ops {
        match *op {
            EditOp::Match { src, .. } => anchor = src,
            EditOp::Substitute { src, tgt } => {
                labels[src] = TransformLabel::Replace(t[tgt].clone());
                subs.push((src, tgt));
                anchor = src;
            }
            EditOp::Delete { src } => {
                labels[src] = TransformLabel::Delete;
                anchor = src;
            }
            EditOp::Insert { tgt } => inserts[anchor].push(tgt),
        }
    }

    // Positions whose own label is ignored because the previous token merges.
    let mut absorbed = vec![false; s.len()];
    for (i, j) in subs {
        if let Some((label, consumed)) = g_transform(s, t, i, j, &labels, &inserts) {
            if label == TransformLabel::Merge {
                labels[i + 1] = TransformLabel::Keep;
                absorbed[i + 1] = true;
            }
            inserts[i].drain(..consumed);
            labels[i] = label;
        }
    }

    let mut deferred = 0;
    for (a, ins) in inserts.iter().enumerate() {
        let Some(&first) = ins.first() else { continue };
        if labels[a].is_keep() && !absorbed[a] {
            labels[a] = TransformLabel::Append(t[first].clone());
            deferred += ins.len() - 1;
        } else {
            deferred += ins.len();
        }
    }

    Extraction {
        labels: LabelSequence::new(labels),
        deferred_insertions: deferred,
    }
}

/// Corrective labels for a sentence pair.
///
/// Substitutions become g-transformations when a rule reproduces the target
/// token exactly (case first, then merge/split, then noun number, then verb
/// form) and stay `$REP` otherwise. Only the first insertion at each anchor
/// is kept as `$APP`; the rest are recovered by extracting again after the
/// labels have been applied.
pub fn extract_labels(pair: &SentencePair) -> LabelSequence {
    extract_labels_detailed(pair).labels
}

//! Token and label vocabularies.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{Dataset, TokenSequence, SENTINEL};
use crate::transform::{CaseRule, LabelSequence, TransformLabel, VerbTag};

pub const UNK_TOKEN: &str = "$UNK";
pub const UNK_LABEL: &str = "$UNK";

/// Sorts by descending count, then lexicographically, so vocab ids never
/// depend on hash iteration order.
fn ranked(counts: BTreeMap<String, usize>, min_freq: usize) -> Vec<String> {
    let mut items: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().map(|(s, _)| s).collect()
}

/// Encoder input vocabulary. Id 0 is the sentinel, id 1 is `$UNK`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TokenVocab {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for TokenVocab {
    fn from(entries: Vec<String>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        TokenVocab { entries, index }
    }
}

impl From<TokenVocab> for Vec<String> {
    fn from(v: TokenVocab) -> Self {
        v.entries
    }
}

impl TokenVocab {
    pub const UNK: usize = 1;

    /// Counts tokens on both sides of every pair; targets are included since
    /// synthesized sources can contain words only seen in corrections.
    pub fn build(data: &Dataset, min_freq: usize) -> Self {
        let mut counts = BTreeMap::new();
        for pair in data.pairs() {
            for t in pair.source.words().iter().chain(pair.target.words()) {
                *counts.entry(t.clone()).or_insert(0usize) += 1;
            }
        }
        let mut entries = vec![SENTINEL.to_string(), UNK_TOKEN.to_string()];
        entries.extend(
            ranked(counts, min_freq.max(1))
                .into_iter()
                .filter(|t| t != SENTINEL && t != UNK_TOKEN),
        );
        TokenVocab::from(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn encode(&self, seq: &TokenSequence) -> Vec<usize> {
        seq.tokens().iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }
}

/// Corrective label vocabulary. Id 0 is always `$KEP`, id 1 is `$UNK`.
///
/// Every token-free label (`$DEL`, `$MRG`, `$SPL`, `$NNUM`, each `$CAS_*`
/// and `$VFORM_*`) is always present; token-carrying `$APP_*` / `$REP_*`
/// labels are added when seen in training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocab {
    entries: Vec<String>,
    labels: Vec<Option<TransformLabel>>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for LabelVocab {
    type Error = String;

    fn try_from(entries: Vec<String>) -> Result<Self, String> {
        if entries.first().map(String::as_str) != Some("$KEP") {
            return Err("label vocabulary must start with $KEP".into());
        }
        let mut labels = Vec::with_capacity(entries.len());
        for e in &entries {
            if e == UNK_LABEL {
                labels.push(None);
            } else {
                labels.push(Some(e.parse::<TransformLabel>().map_err(|e| e.to_string())?));
            }
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(LabelVocab {
            entries,
            labels,
            index,
        })
    }
}

impl From<LabelVocab> for Vec<String> {
    fn from(v: LabelVocab) -> Self {
        v.entries
    }
}

impl LabelVocab {
    pub const KEEP: usize = 0;
    pub const UNK: usize = 1;

    pub fn build<'a>(
        sequences: impl IntoIterator<Item = &'a LabelSequence>,
        min_freq: usize,
    ) -> Self {
        let mut fixed: Vec<TransformLabel> = vec![
            TransformLabel::Delete,
            TransformLabel::Merge,
            TransformLabel::Split,
            TransformLabel::NounNumber,
        ];
        fixed.extend(CaseRule::ALL.iter().map(|&c| TransformLabel::Case(c)));
        fixed.extend(VerbTag::ALL.iter().map(|&t| TransformLabel::VerbForm(t)));

        let mut counts = BTreeMap::new();
        for seq in sequences {
            for l in seq.iter() {
                if matches!(l, TransformLabel::Append(_) | TransformLabel::Replace(_)) {
                    *counts.entry(l.to_string()).or_insert(0usize) += 1;
                }
            }
        }
        let mut entries = vec!["$KEP".to_string(), UNK_LABEL.to_string()];
        entries.extend(fixed.iter().map(ToString::to_string));
        entries.extend(ranked(counts, min_freq.max(1)));
        LabelVocab::try_from(entries).expect("built vocabulary is well-formed")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Id of a label, `$UNK` when unseen.
    pub fn id(&self, label: &TransformLabel) -> usize {
        self.index
            .get(&label.to_string())
            .copied()
            .unwrap_or(Self::UNK)
    }

    pub fn encode(&self, labels: &LabelSequence) -> Vec<usize> {
        labels.iter().map(|l| self.id(l)).collect()
    }

    /// Decoded label for an id; `None` for `$UNK` or out-of-range ids.
    pub fn label(&self, id: usize) -> Option<&TransformLabel> {
        self.labels.get(id).and_then(Option::as_ref)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    /// Every id except `$UNK`, which has no action to apply.
    pub fn known_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| i != Self::UNK).collect()
    }

    /// Ids whose label may sit on the sentinel (`$KEP` and `$APP_*`).
    pub fn sentinel_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|i| {
                i == Self::KEEP || matches!(self.label(i), Some(TransformLabel::Append(_)))
            })
            .collect()
    }

    /// Ids whose label never changes sentence length.
    pub fn length_preserving_mask(&self) -> Vec<bool> {
        (0..self.len())
            .map(|i| i == Self::KEEP || self.label(i).is_some_and(TransformLabel::preserves_length))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, SentencePair};

    #[test]
    fn label_vocab_layout() {
        let ds = Dataset::from_pairs([
            SentencePair::new(tokenize("a cat"), tokenize("a dog")),
            SentencePair::new(tokenize("cat sat"), tokenize("the cat sat")),
        ]);
        let v = LabelVocab::build(ds.examples.iter().map(|e| &e.labels), 1);
        assert_eq!(v.name(0), Some("$KEP"));
        assert_eq!(v.name(1), Some("$UNK"));
        assert!(v.label(LabelVocab::UNK).is_none());
        let rep = TransformLabel::Replace("dog".into());
        assert_eq!(v.label(v.id(&rep)), Some(&rep));
        assert_eq!(v.id(&TransformLabel::Replace("zebra".into())), LabelVocab::UNK);
        let mask = v.sentinel_mask();
        assert!(mask[0]);
        assert!(mask[v.id(&TransformLabel::Append("the".into()))]);
        assert!(!mask[v.id(&TransformLabel::Delete)]);
    }

    #[test]
    fn serde_round_trip() {
        let ds = Dataset::from_pairs([SentencePair::new(tokenize("a b"), tokenize("a c"))]);
        let v = LabelVocab::build(ds.examples.iter().map(|e| &e.labels), 1);
        let json = serde_json::to_string(&v).unwrap();
        let back: LabelVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        let t = TokenVocab::build(&ds, 1);
        let back: TokenVocab = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.id("$START"), 0);
        assert_eq!(t.id("never-seen"), TokenVocab::UNK);
    }

    #[test]
    fn token_vocab_min_freq() {
        let ds = Dataset::from_pairs([
            SentencePair::new(tokenize("a a b"), tokenize("a a b")),
        ]);
        let v = TokenVocab::build(&ds, 3);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("b"), TokenVocab::UNK);
    }
}

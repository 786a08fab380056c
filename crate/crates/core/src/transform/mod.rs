//! The corrective edit-label grammar.
//!
//! A sentence pair is reduced to one [`TransformLabel`] per source position
//! (sentinel included) by [`extract_labels`]; [`apply_labels`] runs the
//! labels forward. Basic edits are `$KEP`, `$DEL`, `$APP_<tok>` and
//! `$REP_<tok>`; the g-transformations `$CAS_*`, `$MRG`, `$SPL`, `$NNUM` and
//! `$VFORM_*` realize common replacements through rules instead of literal
//! tokens.

mod align;
mod apply;
pub mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align, extract_labels, extract_labels_detailed, levenshtein, EditOp, Extraction};
pub use apply::{apply_labels, apply_until_fixed, ApplyError, ApplyWarning, Applied};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseRule {
    UpFirst,
    LowFirst,
    AllUp,
    AllLow,
}

impl CaseRule {
    /// Also the order in which the aligner tries them.
    pub const ALL: [CaseRule; 4] = [
        CaseRule::UpFirst,
        CaseRule::LowFirst,
        CaseRule::AllUp,
        CaseRule::AllLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseRule::UpFirst => "UP_FIRST",
            CaseRule::LowFirst => "LOW_FIRST",
            CaseRule::AllUp => "ALL_UP",
            CaseRule::AllLow => "ALL_LOW",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerbTag {
    Base,
    ThirdSingular,
    Past,
    PastParticiple,
    Gerund,
}

impl VerbTag {
    pub const ALL: [VerbTag; 5] = [
        VerbTag::Base,
        VerbTag::ThirdSingular,
        VerbTag::Past,
        VerbTag::PastParticiple,
        VerbTag::Gerund,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerbTag::Base => "BASE",
            VerbTag::ThirdSingular => "3SG",
            VerbTag::Past => "PAST",
            VerbTag::PastParticiple => "PASTPART",
            VerbTag::Gerund => "GERUND",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// One corrective label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TransformLabel {
    Keep,
    Delete,
    /// Keep the token, then insert this one after it.
    Append(String),
    Replace(String),
    Case(CaseRule),
    /// Join with the next token; the next token's own label is ignored.
    Merge,
    /// Split on `-`.
    Split,
    NounNumber,
    VerbForm(VerbTag),
}

impl TransformLabel {
    pub fn is_keep(&self) -> bool {
        matches!(self, TransformLabel::Keep)
    }

    /// Labels that map one token to exactly one token.
    pub fn preserves_length(&self) -> bool {
        matches!(
            self,
            TransformLabel::Keep
                | TransformLabel::Replace(_)
                | TransformLabel::Case(_)
                | TransformLabel::NounNumber
                | TransformLabel::VerbForm(_)
        )
    }
}

impl fmt::Display for TransformLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformLabel::Keep => f.write_str("$KEP"),
            TransformLabel::Delete => f.write_str("$DEL"),
            TransformLabel::Append(t) => write!(f, "$APP_{t}"),
            TransformLabel::Replace(t) => write!(f, "$REP_{t}"),
            TransformLabel::Case(c) => write!(f, "$CAS_{}", c.as_str()),
            TransformLabel::Merge => f.write_str("$MRG"),
            TransformLabel::Split => f.write_str("$SPL"),
            TransformLabel::NounNumber => f.write_str("$NNUM"),
            TransformLabel::VerbForm(t) => write!(f, "$VFORM_{}", t.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid label {0:?}")]
pub struct LabelParseError(pub String);

impl FromStr for TransformLabel {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LabelParseError(s.to_string());
        let token = |t: &str| -> Result<String, LabelParseError> {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                Err(err())
            } else {
                Ok(t.to_string())
            }
        };
        match s {
            "$KEP" => return Ok(TransformLabel::Keep),
            "$DEL" => return Ok(TransformLabel::Delete),
            "$MRG" => return Ok(TransformLabel::Merge),
            "$SPL" => return Ok(TransformLabel::Split),
            "$NNUM" => return Ok(TransformLabel::NounNumber),
            _ => {}
        }
        if let Some(t) = s.strip_prefix("$APP_") {
            return Ok(TransformLabel::Append(token(t)?));
        }
        if let Some(t) = s.strip_prefix("$REP_") {
            return Ok(TransformLabel::Replace(token(t)?));
        }
        if let Some(c) = s.strip_prefix("$CAS_") {
            return CaseRule::ALL
                .into_iter()
                .find(|r| r.as_str() == c)
                .map(TransformLabel::Case)
                .ok_or_else(err);
        }
        if let Some(v) = s.strip_prefix("$VFORM_") {
            return VerbTag::ALL
                .into_iter()
                .find(|t| t.as_str() == v)
                .map(TransformLabel::VerbForm)
                .ok_or_else(err);
        }
        Err(err())
    }
}

/// One label per source position, sentinel included.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelSequence(Vec<TransformLabel>);

impl LabelSequence {
    pub fn new(labels: Vec<TransformLabel>) -> Self {
        LabelSequence(labels)
    }

    pub fn all_keep(len: usize) -> Self {
        LabelSequence(vec![TransformLabel::Keep; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TransformLabel> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[TransformLabel] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<TransformLabel> {
        self.0
    }

    pub fn is_all_keep(&self) -> bool {
        self.0.iter().all(TransformLabel::is_keep)
    }
}

impl std::ops::Index<usize> for LabelSequence {
    type Output = TransformLabel;

    fn index(&self, i: usize) -> &TransformLabel {
        &self.0[i]
    }
}

impl fmt::Display for LabelSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromIterator<TransformLabel> for LabelSequence {
    fn from_iter<I: IntoIterator<Item = TransformLabel>>(iter: I) -> Self {
        LabelSequence(iter.into_iter().collect())
    }
}

/// Per-position error bits: 1 wherever the label is not `$KEP`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectionTargets(pub Vec<u8>);

impl DetectionTargets {
    pub fn count_errors(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }
}

pub fn binarize(labels: &LabelSequence) -> DetectionTargets {
    DetectionTargets(labels.iter().map(|l| u8::from(!l.is_keep())).collect())
}

/// Fraction of non-`$KEP` labels. The sentinel only counts toward the
/// denominator when it carries an edit.
pub fn measure_error_rate(labels: &LabelSequence) -> f64 {
    let Some(first) = labels.0.first() else {
        return 0.0;
    };
    let errors = labels.iter().filter(|l| !l.is_keep()).count();
    let denom = if first.is_keep() {
        labels.len() - 1
    } else {
        labels.len()
    };
    if denom == 0 {
        0.0
    } else {
        errors as f64 / denom as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TransformLabel::*;

    #[test]
    fn label_grammar_round_trip() {
        let labels = [
            Keep,
            Delete,
            Append("the".into()),
            Replace("a_b".into()),
            Case(CaseRule::LowFirst),
            Merge,
            Split,
            NounNumber,
            VerbForm(VerbTag::ThirdSingular),
            VerbForm(VerbTag::PastParticiple),
        ];
        for l in labels {
            assert_eq!(l.to_string().parse::<TransformLabel>().unwrap(), l);
        }
        assert_eq!(VerbForm(VerbTag::ThirdSingular).to_string(), "$VFORM_3SG");
        assert_eq!(Case(CaseRule::AllUp).to_string(), "$CAS_ALL_UP");
        for bad in ["KEP", "$APP_", "$CAS_WEIRD", "$VFORM_FUTURE", "$FOO"] {
            assert!(bad.parse::<TransformLabel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn binarize_examples() {
        let b = |v: Vec<TransformLabel>| binarize(&LabelSequence::new(v)).0;
        assert_eq!(b(vec![Keep, Keep, Keep]), vec![0, 0, 0]);
        assert_eq!(b(vec![Keep, Delete, Replace("x".into())]), vec![0, 1, 1]);
        assert_eq!(b(vec![Append("w".into()), Keep]), vec![1, 0]);
    }

    #[test]
    fn error_rate_examples() {
        let r = |v: Vec<TransformLabel>| measure_error_rate(&LabelSequence::new(v));
        assert_eq!(r(vec![Keep, Keep, Keep]), 0.0);
        assert!((r(vec![Keep, Delete, Delete, Keep]) - 2.0 / 3.0).abs() < 1e-12);
        assert!((r(vec![Append("w".into()), Keep, Keep]) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r(vec![Keep]), 0.0);
        assert_eq!(r(vec![]), 0.0);
    }
}

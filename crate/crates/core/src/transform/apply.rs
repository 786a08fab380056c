//! Running label sequences forward.

use thiserror::Error;

use super::rules;
use super::{extract_labels, LabelSequence, TransformLabel};
use crate::corpus::{SentencePair, TokenSequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("{labels} labels for {tokens} tokens")]
    LengthMismatch { labels: usize, tokens: usize },
    #[error("label {0} is not allowed on the sentinel")]
    SentinelLabel(String),
    #[error("label produced an invalid token: {0}")]
    InvalidToken(String),
}

/// A label that could not act and was treated as `$KEP`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyWarning {
    SplitWithoutDash { position: usize },
    NoNounRule { position: usize },
    NoVerbRule { position: usize },
    MergeAtEnd { position: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub tokens: TokenSequence,
    pub warnings: Vec<ApplyWarning>,
}

/// Applies labels in a single left-to-right pass.
pub fn apply_labels(src: &TokenSequence, labels: &LabelSequence) -> Result<Applied, ApplyError> {
    let s = src.tokens();
    if labels.len() != s.len() {
        return Err(ApplyError::LengthMismatch {
            labels: labels.len(),
            tokens: s.len(),
        });
    }
    let mut out = Vec::with_capacity(s.len() + 2);
    let mut warnings = Vec::new();
    out.push(s[0].clone());
    match &labels[0] {
        TransformLabel::Keep => {}
        TransformLabel::Append(w) => out.push(w.clone()),
        other => return Err(ApplyError::SentinelLabel(other.to_string())),
    }

    let mut i = 1;
    while i < s.len() {
        let tok = &s[i];
        match &labels[i] {
            TransformLabel::Keep => out.push(tok.clone()),
            TransformLabel::Delete => {}
            TransformLabel::Append(w) => {
                out.push(tok.clone());
                out.push(w.clone());
            }
            TransformLabel::Replace(w) => out.push(w.clone()),
            TransformLabel::Case(rule) => out.push(rules::apply_case(tok, *rule)),
            TransformLabel::Merge => {
                if i + 1 < s.len() {
                    out.push(format!("{tok}{}", s[i + 1]));
                    i += 1;
                } else {
                    warnings.push(ApplyWarning::MergeAtEnd { position: i });
                    out.push(tok.clone());
                }
            }
            TransformLabel::Split => match rules::split_token(tok) {
                Some(parts) => out.extend(parts),
                None => {
                    warnings.push(ApplyWarning::SplitWithoutDash { position: i });
                    out.push(tok.clone());
                }
            },
            TransformLabel::NounNumber => match rules::toggle_number(tok) {
                Some(w) => out.push(w),
                None => {
                    warnings.push(ApplyWarning::NoNounRule { position: i });
                    out.push(tok.clone());
                }
            },
            TransformLabel::VerbForm(tag) => match rules::inflect_verb(tok, *tag) {
                Some(w) => out.push(w),
                None => {
                    warnings.push(ApplyWarning::NoVerbRule { position: i });
                    out.push(tok.clone());
                }
            },
        }
        i += 1;
    }
    let tokens =
        TokenSequence::from_tokens(out).map_err(|e| ApplyError::InvalidToken(e.to_string()))?;
    Ok(Applied { tokens, warnings })
}

/// Repeats extract-then-apply against a fixed target until the source
/// reaches it or `max_rounds` passes. Returns the final sentence and the
/// number of rounds that changed it.
pub fn apply_until_fixed(
    source: &TokenSequence,
    target: &TokenSequence,
    max_rounds: usize,
) -> (TokenSequence, usize) {
    let mut cur = source.clone();
    let mut rounds = 0;
    while rounds < max_rounds && cur != *target {
        let labels = extract_labels(&SentencePair::new(cur.clone(), target.clone()));
        let next = apply_labels(&cur, &labels)
            .expect("extracted labels are always applicable")
            .tokens;
        if next == cur {
            break;
        }
        cur = next;
        rounds += 1;
    }
    (cur, rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::transform::{extract_labels_detailed, levenshtein, CaseRule, VerbTag};
    use proptest::prelude::*;
    use TransformLabel::*;

    fn apply(s: &str, labels: Vec<TransformLabel>) -> Applied {
        apply_labels(&tokenize(s), &LabelSequence::new(labels)).unwrap()
    }

    #[test]
    fn apply_examples() {
        let src = tokenize("the the cat");
        assert_eq!(
            apply_labels(&src, &LabelSequence::all_keep(src.len())).unwrap().tokens,
            src
        );
        assert_eq!(apply("the the cat", vec![Keep, Keep, Delete, Keep]).tokens, tokenize("the cat"));
        assert_eq!(apply("over all", vec![Keep, Merge, Keep]).tokens, tokenize("overall"));
        assert_eq!(
            apply("cat sat", vec![Append("the".into()), Keep, Append("down".into())]).tokens,
            tokenize("the cat sat down")
        );
        assert_eq!(
            apply("he go well-known", vec![Keep, Case(CaseRule::UpFirst), VerbForm(VerbTag::ThirdSingular), Split]).tokens,
            tokenize("He goes well known")
        );
    }

    #[test]
    fn merge_ignores_next_label() {
        let a = apply("over all x", vec![Keep, Merge, Delete, Keep]);
        assert_eq!(a.tokens, tokenize("overall x"));
    }

    #[test]
    fn apply_warnings() {
        let a = apply("plain", vec![Keep, Split]);
        assert_eq!(a.tokens, tokenize("plain"));
        assert_eq!(a.warnings, vec![ApplyWarning::SplitWithoutDash { position: 1 }]);
        let a = apply("a b", vec![Keep, Keep, Merge]);
        assert_eq!(a.tokens, tokenize("a b"));
        assert_eq!(a.warnings, vec![ApplyWarning::MergeAtEnd { position: 2 }]);
        let a = apply("42", vec![Keep, NounNumber]);
        assert_eq!(a.warnings, vec![ApplyWarning::NoNounRule { position: 1 }]);
        let a = apply("42", vec![Keep, VerbForm(VerbTag::Past)]);
        assert_eq!(a.warnings, vec![ApplyWarning::NoVerbRule { position: 1 }]);
    }

    #[test]
    fn apply_errors() {
        let src = tokenize("a b");
        assert!(matches!(
            apply_labels(&src, &LabelSequence::all_keep(2)),
            Err(ApplyError::LengthMismatch { .. })
        ));
        assert!(matches!(
            apply_labels(&src, &LabelSequence::new(vec![Delete, Keep, Keep])),
            Err(ApplyError::SentinelLabel(_))
        ));
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "the", "a", "cat", "cats", "go", "goes", "went", "he", "He", "over", "all",
            "overall", "well-known", "well", "known", "box", "boxes", "child", "children", "x",
        ])
        .prop_map(String::from)
    }

    fn sentence() -> impl Strategy<Value = TokenSequence> {
        prop::collection::vec(word(), 0..8).prop_map(|w| TokenSequence::from_words(w).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn iterative_round_trip(src in sentence(), tgt in sentence()) {
            let d = levenshtein(src.words(), tgt.words());
            let (out, rounds) = apply_until_fixed(&src, &tgt, d.max(5));
            prop_assert_eq!(&out, &tgt);
            prop_assert!(rounds <= d.max(5));
        }

        #[test]
        fn single_pass_exact_without_deferred_insertions(src in sentence(), tgt in sentence()) {
            let e = extract_labels_detailed(&SentencePair::new(src.clone(), tgt.clone()));
            let out = apply_labels(&src, &e.labels).unwrap();
            if e.deferred_insertions == 0 {
                prop_assert_eq!(out.tokens, tgt);
            }
        }

        #[test]
        fn g_transforms_reproduce_their_target(src in sentence(), tgt in sentence()) {
            let e = extract_labels_detailed(&SentencePair::new(src.clone(), tgt.clone()));
            let out = apply_labels(&src, &e.labels).unwrap();
            prop_assert!(out.warnings.is_empty());
            // Every g-transformation's output appears in the target.
            for (i, l) in e.labels.iter().enumerate() {
                let produced = match l {
                    Case(r) => Some(rules::apply_case(&src.tokens()[i], *r)),
                    NounNumber => rules::toggle_number(&src.tokens()[i]),
                    VerbForm(t) => rules::inflect_verb(&src.tokens()[i], *t),
                    Merge => Some(format!("{}{}", src.tokens()[i], src.tokens()[i + 1])),
                    _ => None,
                };
                if let Some(p) = produced {
                    prop_assert!(tgt.tokens().contains(&p), "{} -> {:?} not in {:?}", l, p, tgt);
                }
            }
        }
    }
}

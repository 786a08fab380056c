//! Rule-based corruption of clean text, and a small template grammar that
//! produces clean sentences to corrupt.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, SentencePair, TokenSequence};
use crate::transform::rules::{inflect_verb, known_verb_tags, toggle_number};
use crate::transform::VerbTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionRule {
    /// Swap a known verb for another form of the same verb.
    VerbForm,
    /// Drop `a`, `an` or `the`.
    ArticleDeletion,
    /// Repeat a token.
    Duplication,
    /// Flip the case of the first letter.
    CaseFlip,
    /// Singular to plural or back.
    PluralToggle,
}

impl CorruptionRule {
    pub const ALL: [CorruptionRule; 5] = [
        CorruptionRule::VerbForm,
        CorruptionRule::ArticleDeletion,
        CorruptionRule::Duplication,
        CorruptionRule::CaseFlip,
        CorruptionRule::PluralToggle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionRule::VerbForm => "verb_form",
            CorruptionRule::ArticleDeletion => "article_deletion",
            CorruptionRule::Duplication => "duplication",
            CorruptionRule::CaseFlip => "case_flip",
            CorruptionRule::PluralToggle => "plural_toggle",
        }
    }
}

impl fmt::Display for CorruptionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CorruptionRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown corruption rule {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    /// Probability that any given token is corrupted.
    pub rate: f64,
    pub rules: Vec<CorruptionRule>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            rate: 0.15,
            rules: CorruptionRule::ALL.to_vec(),
        }
    }
}

const ARTICLES: &[&str] = &["a", "an", "the"];
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "this", "these", "my", "some", "every", "he", "she", "it", "they", "we", "i",
    "in", "at", "on", "with", "to", "will", "is", "are", "am", "has", "have", "was", "were", "day",
];

fn flip_first(token: &str) -> Option<String> {
    let mut chars = token.chars();
    let c = chars.next()?;
    if !c.is_alphabetic() {
        return None;
    }
    let flipped: String = if c.is_uppercase() {
        c.to_lowercase().collect()
    } else {
        c.to_uppercase().collect()
    };
    Some(flipped + chars.as_str())
}

fn other_verb_form<R: Rng + ?Sized>(token: &str, rng: &mut R) -> Option<String> {
    if known_verb_tags(token).is_empty() {
        return None;
    }
    let options: Vec<String> = VerbTag::ALL
        .iter()
        .filter_map(|&t| inflect_verb(token, t))
        .filter(|w| w != token)
        .collect();
    options.choose(rng).cloned()
}

fn plural_toggle(token: &str) -> Option<String> {
    let lower = token.to_lowercase();
    if lower.len() < 3 || FUNCTION_WORDS.contains(&lower.as_str()) || !known_verb_tags(token).is_empty() {
        return None;
    }
    toggle_number(token).filter(|w| w != token)
}

enum Action {
    Replace(String),
    Delete,
    Duplicate,
}

fn action_for<R: Rng + ?Sized>(rule: CorruptionRule, token: &str, rng: &mut R) -> Option<Action> {
    match rule {
        CorruptionRule::VerbForm => other_verb_form(token, rng).map(Action::Replace),
        CorruptionRule::ArticleDeletion => ARTICLES.contains(&token.to_lowercase().as_str()).then_some(Action::Delete),
        CorruptionRule::Duplication => Some(Action::Duplicate),
        CorruptionRule::CaseFlip => flip_first(token).map(Action::Replace),
        CorruptionRule::PluralToggle => plural_toggle(token).map(Action::Replace),
    }
}

/// Each token is corrupted with probability `rate` by one rule drawn
/// uniformly from those that apply to it.
pub fn corrupt_sentence<R: Rng + ?Sized>(clean: &TokenSequence, config: &CorruptionConfig, rng: &mut R) -> TokenSequence {
    let mut out: Vec<String> = Vec::with_capacity(clean.words().len() + 2);
    for w in clean.words() {
        if rng.gen::<f64>() >= config.rate {
            out.push(w.clone());
            continue;
        }
        let eligible: Vec<CorruptionRule> = config
            .rules
            .iter()
            .copied()
            .filter(|&r| match r {
                CorruptionRule::VerbForm => !known_verb_tags(w).is_empty(),
                CorruptionRule::ArticleDeletion => ARTICLES.contains(&w.to_lowercase().as_str()),
                CorruptionRule::Duplication => true,
                CorruptionRule::CaseFlip => flip_first(w).is_some(),
                CorruptionRule::PluralToggle => plural_toggle(w).is_some(),
            })
            .collect();
        let action = eligible.choose(rng).and_then(|&r| action_for(r, w, rng));
        match action {
            Some(Action::Replace(x)) => out.push(x),
            Some(Action::Delete) => {}
            Some(Action::Duplicate) => {
                out.push(w.clone());
                out.push(w.clone());
            }
            None => out.push(w.clone()),
        }
    }
    TokenSequence::from_words(out).expect("corrupted tokens come from valid tokens")
}

/// `(corrupted, clean)` pairs with extracted labels.
pub fn corrupt_corpus<R: Rng + ?Sized>(clean: &[TokenSequence], config: &CorruptionConfig, rng: &mut R) -> Dataset {
    Dataset::from_pairs(
        clean
            .iter()
            .map(|c| SentencePair::new(corrupt_sentence(c, config, rng), c.clone())),
    )
}

const AGENTS: &[&str] = &[
    "cat", "dog", "teacher", "student", "friend", "child", "man", "woman", "bird", "farmer", "doctor",
    "baby", "girl", "boy", "neighbor",
];
const THINGS: &[&str] = &[
    "book", "car", "letter", "song", "game", "house", "city", "story", "garden", "window", "table",
    "ball", "lesson", "picture", "box", "bus", "glass", "key", "apple", "cake",
];
const ADJECTIVES: &[&str] = &["big", "small", "old", "new", "red", "little", "good", "happy", "young", "green"];
const VERBS: &[&str] = &[
    "see", "take", "make", "find", "want", "like", "love", "watch", "bring", "read", "write", "open",
    "help", "follow", "hold", "need", "keep", "meet", "play", "use",
];
const PLACES: &[&str] = &["in the garden", "at home", "in the city", "at school", "with my friend", "on the table"];

fn verb_form(lemma: &str, tag: VerbTag) -> String {
    inflect_verb(lemma, tag).expect("template verbs are in the lexicon")
}

/// A noun phrase and whether it is plural.
fn noun_phrase<R: Rng + ?Sized>(nouns: &[&str], rng: &mut R) -> (Vec<String>, bool) {
    let plural = rng.gen_bool(0.35);
    let noun = nouns.choose(rng).unwrap();
    let noun = if plural { toggle_number(noun).unwrap() } else { noun.to_string() };
    let det = if plural {
        ["the", "these", "my", "some"].choose(rng).unwrap()
    } else {
        ["a", "the", "this", "my"].choose(rng).unwrap()
    };
    let mut words = vec![det.to_string()];
    if rng.gen_bool(0.4) {
        words.push(ADJECTIVES.choose(rng).unwrap().to_string());
    }
    words.push(noun);
    (words, plural)
}

/// One clean sentence from a subject-verb-object template with agreement
/// across five tenses.
pub fn toy_sentence<R: Rng + ?Sized>(rng: &mut R) -> TokenSequence {
    // Person: 1 = first singular, 3 = third singular, 0 = plural.
    let (mut words, person) = match rng.gen_range(0..6) {
        0 => (vec!["he".to_string()], 3),
        1 => (vec!["she".to_string()], 3),
        2 => (vec!["they".to_string()], 0),
        3 => (vec!["I".to_string()], 1),
        _ => {
            let (np, plural) = noun_phrase(AGENTS, rng);
            (np, if plural { 0 } else { 3 })
        }
    };
    let lemma = VERBS.choose(rng).unwrap();
    let present_simple = match rng.gen_range(0..5) {
        0 => {
            let tag = if person == 3 { VerbTag::ThirdSingular } else { VerbTag::Base };
            words.push(verb_form(lemma, tag));
            true
        }
        1 => {
            words.push(verb_form(lemma, VerbTag::Past));
            false
        }
        2 => {
            words.push(match person {
                1 => "am",
                3 => "is",
                _ => "are",
            }
            .to_string());
            words.push(verb_form(lemma, VerbTag::Gerund));
            false
        }
        3 => {
            words.push(if person == 3 { "has" } else { "have" }.to_string());
            words.push(verb_form(lemma, VerbTag::PastParticiple));
            false
        }
        _ => {
            words.push("will".to_string());
            words.push(verb_form(lemma, VerbTag::Base));
            false
        }
    };
    words.extend(noun_phrase(THINGS, rng).0);
    if rng.gen_bool(0.35) {
        let pp = if present_simple && rng.gen_bool(0.5) {
            "every day"
        } else {
            PLACES.choose(rng).unwrap()
        };
        words.extend(pp.split(' ').map(String::from));
    }
    words[0] = crate::transform::rules::apply_case(&words[0], crate::transform::CaseRule::UpFirst);
    words.push(".".to_string());
    TokenSequence::from_words(words).expect("template words are valid tokens")
}

pub fn toy_sentences<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<TokenSequence> {
    (0..count).map(|_| toy_sentence(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::transform::measure_error_rate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = toy_sentences(200, &mut rng);
        let cfg = CorruptionConfig { rate: 0.0, ..CorruptionConfig::default() };
        let data = corrupt_corpus(&clean, &cfg, &mut rng);
        for e in &data.examples {
            assert_eq!(e.pair.source, e.pair.target);
            assert!(e.labels.is_all_keep());
        }
    }

    #[test]
    fn case_flip_hits_every_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = CorruptionConfig {
            rate: 1.0,
            rules: vec![CorruptionRule::CaseFlip],
        };
        assert_eq!(corrupt_sentence(&tokenize("he ran"), &cfg, &mut rng), tokenize("He Ran"));
        assert_eq!(corrupt_sentence(&tokenize("He ran ."), &cfg, &mut rng), tokenize("he Ran ."));
    }

    #[test]
    fn individual_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let only = |r| CorruptionConfig { rate: 1.0, rules: vec![r] };
        let out = corrupt_sentence(&tokenize("the cat"), &only(CorruptionRule::ArticleDeletion), &mut rng);
        assert_eq!(out, tokenize("cat"));
        let out = corrupt_sentence(&tokenize("cat"), &only(CorruptionRule::Duplication), &mut rng);
        assert_eq!(out, tokenize("cat cat"));
        let out = corrupt_sentence(&tokenize("the cats"), &only(CorruptionRule::PluralToggle), &mut rng);
        assert_eq!(out, tokenize("the cat"));
        for _ in 0..50 {
            let out = corrupt_sentence(&tokenize("goes"), &only(CorruptionRule::VerbForm), &mut rng);
            assert!(["go", "went", "gone", "going"].contains(&out.words()[0].as_str()), "{out}");
        }
    }

    #[test]
    fn measured_rate_tracks_configured_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let clean = toy_sentences(10_000, &mut rng);
        for rate in [0.05, 0.15, 0.3] {
            let data = corrupt_corpus(&clean, &CorruptionConfig { rate, ..CorruptionConfig::default() }, &mut rng);
            let mean = data.examples.iter().map(|e| measure_error_rate(&e.labels)).sum::<f64>() / data.len() as f64;
            assert!((mean - rate).abs() < 0.05, "rate {rate}: measured {mean}");
        }
    }

    #[test]
    fn toy_sentences_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for s in toy_sentences(500, &mut rng) {
            let w = s.words();
            assert!(w[0].chars().next().unwrap().is_uppercase());
            assert_eq!(w.last().unwrap(), ".");
            if w[0] == "He" || w[0] == "She" {
                assert!(!["am", "are", "have"].contains(&w[1].as_str()), "{s}");
            }
        }
        let a = toy_sentences(20, &mut ChaCha8Rng::seed_from_u64(5));
        let b = toy_sentences(20, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}

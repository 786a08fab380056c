//! Tokenization, parallel-corpus files and the labeled-dataset cache.
//!
//! Everything that touches bytes on disk lives under this module: the TSV
//! readers and writers here, vocabularies in [`vocab`] and the binary model
//! checkpoint in [`checkpoint`].

pub mod checkpoint;
pub mod vocab;

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::transform::{self, DetectionTargets, LabelParseError, LabelSequence, TransformLabel};

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointConfig, CheckpointError};
pub use vocab::{LabelVocab, TokenVocab, UNK_LABEL, UNK_TOKEN};

/// Synthetic sentence-initial token. Carries the labels that insert before
/// the first real word.
pub const SENTINEL: &str = "$START";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid token {0:?}: tokens must be non-empty and whitespace-free")]
    InvalidToken(String),
    #[error("token sequence must start with {SENTINEL}")]
    MissingSentinel,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Whitespace-tokenized sentence. Position 0 is always [`SENTINEL`].
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence from words, prepending the sentinel.
    pub fn from_words<I, S>(words: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![SENTINEL.to_string()];
        for w in words {
            let w = w.into();
            validate_token(&w)?;
            tokens.push(w);
        }
        Ok(TokenSequence(tokens))
    }

    /// Wraps a full token list that already carries the sentinel.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.first().map(String::as_str) != Some(SENTINEL) {
            return Err(CorpusError::MissingSentinel);
        }
        for t in &tokens[1..] {
            validate_token(t)?;
        }
        Ok(TokenSequence(tokens))
    }

    /// Sentinel-only sequence.
    pub fn empty() -> Self {
        TokenSequence(vec![SENTINEL.to_string()])
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    /// Tokens after the sentinel.
    pub fn words(&self) -> &[String] {
        &self.0[1..]
    }

    /// Length including the sentinel.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when only the sentinel is present.
    pub fn is_empty(&self) -> bool {
        self.0.len() == 1
    }

    /// Single-space join of the words, sentinel dropped.
    pub fn detokenize(&self) -> String {
        self.words().join(" ")
    }
}

impl fmt::Debug for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

fn validate_token(t: &str) -> Result<(), CorpusError> {
    if t.is_empty() || t.chars().any(char::is_whitespace) {
        return Err(CorpusError::InvalidToken(t.to_string()));
    }
    Ok(())
}

/// Splits on runs of whitespace and prepends the sentinel.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::with_capacity(text.len() / 4 + 1);
    tokens.push(SENTINEL.to_string());
    tokens.extend(text.split_whitespace().map(str::to_string));
    TokenSequence(tokens)
}

/// An errorful source sentence and its correction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: TokenSequence,
    pub target: TokenSequence,
}

impl SentencePair {
    pub fn new(source: TokenSequence, target: TokenSequence) -> Self {
        SentencePair { source, target }
    }
}

/// One supervised training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub pair: SentencePair,
    pub labels: LabelSequence,
    pub targets: DetectionTargets,
}

impl Example {
    /// Extracts labels from the pair.
    pub fn from_pair(pair: SentencePair) -> Self {
        let labels = transform::extract_labels(&pair);
        let targets = transform::binarize(&labels);
        Example {
            pair,
            labels,
            targets,
        }
    }
}

/// Parallel data with extracted labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn from_pairs(pairs: impl IntoIterator<Item = SentencePair>) -> Self {
        Dataset {
            examples: pairs.into_iter().map(Example::from_pair).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &SentencePair> {
        self.examples.iter().map(|e| &e.pair)
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>, CorpusError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CorpusError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CorpusError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CorpusError::io(path, e))
}

/// Reads a `source<TAB>target` file. Blank lines are skipped.
pub fn read_parallel_tsv(path: impl AsRef<Path>) -> Result<Vec<SentencePair>, CorpusError> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(CorpusError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected exactly one tab, found {}", fields.len() - 1),
            });
        }
        pairs.push(SentencePair::new(tokenize(fields[0]), tokenize(fields[1])));
    }
    Ok(pairs)
}

pub fn write_parallel_tsv(
    path: impl AsRef<Path>,
    pairs: &[SentencePair],
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for p in pairs {
        writeln!(w, "{}\t{}", p.source.detokenize(), p.target.detokenize())
            .map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

/// Reads non-empty lines as plain sentences.
pub fn read_sentences(path: impl AsRef<Path>) -> Result<Vec<TokenSequence>, CorpusError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(tokenize(&line));
        }
    }
    Ok(out)
}

/// Formats one labeled-cache line: `source<TAB>label label ...`.
pub fn format_labeled_line(source: &TokenSequence, labels: &LabelSequence) -> String {
    format!("{}\t{}", source.detokenize(), labels)
}

pub fn write_labeled_tsv<'a>(
    path: impl AsRef<Path>,
    rows: impl IntoIterator<Item = (&'a TokenSequence, &'a LabelSequence)>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (src, labels) in rows {
        writeln!(w, "{}", format_labeled_line(src, labels)).map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

/// Reads the labeled cache back. Label count must equal source length
/// including the sentinel.
pub fn read_labeled_tsv(
    path: impl AsRef<Path>,
) -> Result<Vec<(TokenSequence, LabelSequence)>, CorpusError> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((src, labels)) = line.split_once('\t') else {
            return Err(parse_err(idx + 1, "missing tab".into()));
        };
        let source = tokenize(src);
        let labels = labels
            .split_whitespace()
            .map(str::parse::<TransformLabel>)
            .collect::<Result<Vec<_>, LabelParseError>>()
            .map_err(|e| parse_err(idx + 1, e.to_string()))?;
        if labels.len() != source.len() {
            return Err(parse_err(
                idx + 1,
                format!("{} labels for {} tokens", labels.len(), source.len()),
            ));
        }
        rows.push((source, LabelSequence::new(labels)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("He go home").tokens(), toks(&["$START", "He", "go", "home"]));
        assert_eq!(tokenize("").tokens(), toks(&["$START"]));
        assert_eq!(tokenize("a  b").tokens(), toks(&["$START", "a", "b"]));
        assert!(tokenize("  \t ").is_empty());
    }

    #[test]
    fn token_validation() {
        assert!(TokenSequence::from_words(["a", "b c"]).is_err());
        assert!(TokenSequence::from_words([""]).is_err());
        assert!(matches!(
            TokenSequence::from_tokens(toks(&["a"])),
            Err(CorpusError::MissingSentinel)
        ));
    }

    #[test]
    fn parallel_tsv_parse_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        fs::write(&p, "He go home\tHe goes home\n\nfine\tfine\n").unwrap();
        let pairs = read_parallel_tsv(&p).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].source, tokenize("He go home"));
        assert_eq!(pairs[0].target, tokenize("He goes home"));

        fs::write(&p, "ok\tok\na\tb\tc\n").unwrap();
        match read_parallel_tsv(&p) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&p, "").unwrap();
        assert!(read_parallel_tsv(&p).unwrap().is_empty());
    }

    #[test]
    fn labeled_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        let ds = Dataset::from_pairs([
            SentencePair::new(tokenize("the the cat"), tokenize("the cat")),
            SentencePair::new(tokenize("he go home"), tokenize("He goes home")),
        ]);
        write_labeled_tsv(&p, ds.examples.iter().map(|e| (&e.pair.source, &e.labels))).unwrap();
        let back = read_labeled_tsv(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (e, (src, labels)) in ds.examples.iter().zip(&back) {
            assert_eq!(&e.pair.source, src);
            assert_eq!(&e.labels, labels);
        }
    }

    #[test]
    fn labeled_tsv_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        fs::write(&p, "a b\t$KEP $KEP\n").unwrap();
        assert!(matches!(read_labeled_tsv(&p), Err(CorpusError::Parse { line: 1, .. })));
    }
}

//! Binary checkpoint: `GST1`, a little-endian `u32` length, that many bytes
//! of JSON config, then every tensor in layout order as a `u64` element
//! count followed by `f32` values.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LabelVocab, TokenVocab};
use crate::model::{Labeler, ModelConfig, ModelParams};

const MAGIC: &[u8; 4] = b"GST1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint truncated while reading {0}")]
    Truncated(String),
    #[error("tensor {name}: expected {expected} values, found {found}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Everything needed to rebuild a [`Labeler`] besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelConfig,
    pub tokens: TokenVocab,
    pub labels: LabelVocab,
    /// Free-form provenance such as the training stage.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

pub fn to_bytes(labeler: &Labeler, extra: &BTreeMap<String, String>) -> Vec<u8> {
    let cfg = CheckpointConfig {
        model: labeler.params.config.clone(),
        tokens: labeler.tokens.clone(),
        labels: labeler.labels.clone(),
        extra: extra.clone(),
    };
    let json = serde_json::to_vec(&cfg).expect("config always serializes");
    let mut out = Vec::with_capacity(8 + json.len() + labeler.params.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let data = labeler.params.as_slice();
    for spec in &labeler.params.layout().specs {
        out.extend_from_slice(&(spec.len() as u64).to_le_bytes());
        for v in &data[spec.range()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated(what.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<(Labeler, BTreeMap<String, String>), CheckpointError> {
    let mut r = Reader { buf, pos: 0 };
    if buf.len() < 4 {
        return Err(if MAGIC.starts_with(buf) {
            CheckpointError::Truncated("magic".into())
        } else {
            CheckpointError::BadMagic
        });
    }
    if r.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let len = u32::from_le_bytes(r.take(4, "config length")?.try_into().unwrap()) as usize;
    let cfg: CheckpointConfig =
        serde_json::from_slice(r.take(len, "config")?).map_err(|e| CheckpointError::Config(e.to_string()))?;
    if cfg.model.vocab_size != cfg.tokens.len() || cfg.model.num_labels != cfg.labels.len() {
        return Err(CheckpointError::Config(
            "vocabulary sizes disagree with the model config".into(),
        ));
    }
    let mut params = ModelParams::<f32>::zeros(cfg.model.clone()).map_err(|e| CheckpointError::Config(e.to_string()))?;
    let specs = params.layout().specs.clone();
    let data = params.as_mut_slice();
    for spec in &specs {
        let found = u64::from_le_bytes(r.take(8, &spec.name)?.try_into().unwrap()) as usize;
        if found != spec.len() {
            return Err(CheckpointError::ShapeMismatch {
                name: spec.name.clone(),
                expected: spec.len(),
                found,
            });
        }
        let raw = r.take(found * 4, &spec.name)?;
        for (dst, chunk) in data[spec.range()].iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::TrailingBytes(buf.len() - r.pos));
    }
    let labeler = Labeler {
        params,
        tokens: cfg.tokens,
        labels: cfg.labels,
    };
    Ok((labeler, cfg.extra))
}

pub fn save_checkpoint(path: &Path, labeler: &Labeler, extra: &BTreeMap<String, String>) -> Result<(), CheckpointError> {
    fs::write(path, to_bytes(labeler, extra)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(Labeler, BTreeMap<String, String>), CheckpointError> {
    let buf = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Dataset, SentencePair};
    use proptest::prelude::*;

    fn labeler(seed: u64, d: usize, layers: usize) -> Labeler {
        let data = Dataset::from_pairs(vec![
            SentencePair::new(tokenize("she go home"), tokenize("she goes home")),
            SentencePair::new(tokenize("a cat"), tokenize("the cat")),
        ]);
        let tokens = TokenVocab::build(&data, 1);
        let labels = LabelVocab::build(data.examples.iter().map(|e| &e.labels), 1);
        let cfg = ModelConfig {
            d_model: d,
            n_heads: 2,
            n_layers: layers,
            d_ff: 6,
            max_len: 5,
            ..ModelConfig::new(0, 0)
        };
        Labeler::new(cfg, tokens, labels, seed).unwrap()
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let l = labeler(3, 4, 1);
        let mut extra = BTreeMap::new();
        extra.insert("stage".to_string(), "2".to_string());
        save_checkpoint(&path, &l, &extra).unwrap();
        let (back, e) = load_checkpoint(&path).unwrap();
        assert_eq!(back, l);
        assert_eq!(e, extra);
        assert!(matches!(
            load_checkpoint(&dir.path().join("missing")),
            Err(CheckpointError::Io { .. })
        ));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let l = labeler(1, 4, 1);
        let bytes = to_bytes(&l, &BTreeMap::new());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(CheckpointError::BadMagic)));
        assert!(matches!(from_bytes(b"ab"), Err(CheckpointError::BadMagic)));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(from_bytes(&long), Err(CheckpointError::TrailingBytes(1))));

        // Rewrite the first tensor count.
        let json_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let at = 8 + json_len;
        let mut shape = bytes.clone();
        shape[at..at + 8].copy_from_slice(&7u64.to_le_bytes());
        assert!(matches!(
            from_bytes(&shape),
            Err(CheckpointError::ShapeMismatch { ref name, found: 7, .. }) if name == "tok_emb"
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip_is_bitwise(seed in any::<u64>(), d in prop::sample::select(vec![2usize, 4, 6]), layers in 0usize..3) {
            let mut l = labeler(seed, d, layers);
            // Include values that only survive a bitwise copy.
            l.params.as_mut_slice()[0] = -0.0;
            l.params.as_mut_slice()[1] = f32::MIN_POSITIVE / 2.0;
            let bytes = to_bytes(&l, &BTreeMap::new());
            let (back, _) = from_bytes(&bytes).unwrap();
            let a: Vec<u32> = l.params.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.params.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.tokens, l.tokens);
            prop_assert_eq!(back.labels, l.labels);
            prop_assert_eq!(back.params.config, l.params.config);
        }
    }
}

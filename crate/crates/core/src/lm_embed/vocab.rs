use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LmError;
use crate::corpus::Corpus;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Dense token indices: the four reserved symbols, then corpus tokens by
/// frequency (descending) and lexicographically within a frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_freq: usize,
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_tokens(r.tokens, r.min_freq)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            min_freq: v.min_freq,
            tokens: v.tokens,
        }
    }
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab {
            tokens,
            index,
            min_freq,
        }
    }

    pub fn from_sequences<'a, I, S>(sequences: I, min_freq: usize) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[String]> + 'a + ?Sized,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for seq in sequences {
            for t in seq.as_ref() {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_freq.max(1) && !RESERVED.contains(&t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Ok(Vocab::from_tokens(tokens, min_freq))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.index_of(t)).collect()
    }
}

pub fn build_vocab(corpus: &Corpus, min_freq: usize) -> Result<Vocab, LmError> {
    Vocab::from_sequences(corpus.tweets().map(|t| &t.tokens), min_freq)
}

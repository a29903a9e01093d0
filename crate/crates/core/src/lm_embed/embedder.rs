use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{
    fit_mixing, lm_train, load_static_embeddings, BiLm, LmConfig, LmError, Mixing, MixingMode, OovPolicy,
    StaticEmbeddingTable, TrainLog, Vocab,
};
use crate::corpus::Corpus;
use crate::par::{self, Parallelism};
use crate::rng;

/// Tweets used to fit learned mixing scalars.
const MIXING_SAMPLE: usize = 2000;

/// Frozen text encoder: vocabulary, language model, layer mixing and static table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetEmbedder {
    pub vocab: Vocab,
    pub lm: BiLm,
    pub mixing: Mixing,
    pub static_table: StaticEmbeddingTable,
}

impl TweetEmbedder {
    /// Builds the vocabulary from `corpus`, trains the language model, loads the
    /// static table (or derives it from the LM input embeddings when no file is
    /// given) and fits the layer mixing against the corpus bot labels.
    pub fn train(
        corpus: &Corpus,
        cfg: &LmConfig,
        static_vectors: Option<&Path>,
        mixing_mode: MixingMode,
        mode: Parallelism,
    ) -> Result<(Self, TrainLog), LmError> {
        let vocab = super::build_vocab(corpus, cfg.min_freq)?;
        let seqs: Vec<Vec<usize>> = corpus.tweets().map(|t| vocab.encode(&t.tokens)).collect();
        let (lm, log) = lm_train(vocab.len(), &seqs, cfg, mode)?;
        let static_table = match static_vectors {
            Some(p) => load_static_embeddings(p, Some(&vocab), OovPolicy::Zero)?,
            None => Self::static_from_lm(&vocab, &lm),
        };
        let mut emb = TweetEmbedder {
            vocab,
            mixing: Mixing::uniform(lm.layers() + 1),
            lm,
            static_table,
        };
        if mixing_mode == MixingMode::Learned {
            emb.mixing = emb.fit_mixing(corpus, cfg.seed, mode)?;
        }
        Ok((emb, log))
    }

    /// Static table made of the LM input embeddings of the non-reserved tokens.
    pub fn static_from_lm(vocab: &Vocab, lm: &BiLm) -> StaticEmbeddingTable {
        let vectors = (4..vocab.len())
            .map(|i| (vocab.token(i).to_string(), lm.emb.row(i).to_vec()))
            .collect();
        StaticEmbeddingTable::new(lm.embedding_dim(), vectors, OovPolicy::Zero)
    }

    fn fit_mixing(&self, corpus: &Corpus, seed: u64, mode: Parallelism) -> Result<Mixing, LmError> {
        let tweets: Vec<_> = corpus.tweets().filter(|t| !t.tokens.is_empty()).collect();
        if tweets.is_empty() {
            return Ok(Mixing::uniform(self.lm.layers() + 1));
        }
        let mut picked: Vec<usize> = if tweets.len() <= MIXING_SAMPLE {
            (0..tweets.len()).collect()
        } else {
            let mut r = rng::seeded(rng::derive_str(seed, "mixing-sample"));
            index::sample(&mut r, tweets.len(), MIXING_SAMPLE).into_vec()
        };
        picked.sort_unstable();
        let xs = par::try_map(mode, &picked, |&i| {
            self.layer_means(&tweets[i].tokens).map(|m| m.expect("non-empty"))
        })?;
        let ys: Vec<f64> = picked
            .iter()
            .map(|&i| f64::from(u8::from(corpus.is_bot_account(&tweets[i].account_id).unwrap_or(false))))
            .collect();
        fit_mixing(&xs, &ys, 150, 0.05)
    }

    pub fn static_dim(&self) -> usize {
        self.static_table.dim()
    }

    pub fn contextual_dim(&self) -> usize {
        2 * self.lm.hidden()
    }

    /// Length of every tweet vector.
    pub fn dim(&self) -> usize {
        self.static_dim() + self.contextual_dim()
    }

    /// Mixed contextual vector per token.
    pub fn contextualize(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, LmError> {
        let states = self.lm.layer_states(&self.vocab.encode(tokens))?;
        Ok((0..tokens.len())
            .map(|i| {
                let layers: Vec<&[f64]> = states.iter().map(|l| l[i].as_slice()).collect();
                self.mixing.mix(&layers)
            })
            .collect())
    }

    /// Mean over tokens of each layer's states; `None` for an empty tweet.
    pub fn layer_means(&self, tokens: &[String]) -> Result<Option<Vec<Vec<f64>>>, LmError> {
        if tokens.is_empty() {
            return Ok(None);
        }
        let states = self.lm.layer_states(&self.vocab.encode(tokens))?;
        let n = tokens.len() as f64;
        Ok(Some(
            states
                .into_iter()
                .map(|layer| {
                    let mut m = vec![0.0; layer[0].len()];
                    for v in &layer {
                        m.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                    }
                    m.iter_mut().for_each(|a| *a /= n);
                    m
                })
                .collect(),
        ))
    }

    /// Mean static vector followed by mean contextual vector; all zeros when empty.
    pub fn embed_tweet(&self, tokens: &[String]) -> Result<Vec<f64>, LmError> {
        let mut out = vec![0.0; self.dim()];
        let Some(means) = self.layer_means(tokens)? else {
            return Ok(out);
        };
        let d = self.static_dim();
        for t in tokens {
            out[..d].iter_mut().zip(self.static_table.lookup(t)).for_each(|(a, b)| *a += b);
        }
        let n = tokens.len() as f64;
        out[..d].iter_mut().for_each(|a| *a /= n);
        // Mixing is linear, so mixing the layer means equals the mean of mixed tokens.
        let refs: Vec<&[f64]> = means.iter().map(Vec::as_slice).collect();
        out[d..].copy_from_slice(&self.mixing.mix(&refs));
        Ok(out)
    }
}

/// Tweet vectors for a whole corpus, keyed by tweet id.
pub fn embed_corpus(
    embedder: &TweetEmbedder,
    corpus: &Corpus,
    mode: Parallelism,
) -> Result<BTreeMap<String, Vec<f64>>, LmError> {
    let tweets: Vec<_> = corpus.tweets().collect();
    let vecs = par::try_map(mode, &tweets, |t| embedder.embed_tweet(&t.tokens))?;
    Ok(tweets.into_iter().map(|t| t.tweet_id.clone()).zip(vecs).collect())
}

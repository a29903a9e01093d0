//! Seeded synthetic corpora with controllable bot/human structure.
//!
//! Humans write topic-mixture tweets sprinkled with "band tokens", words typical of
//! their own band of each profile attribute, and attach a link and a hashtag
//! independently (probability 0.3 each). With probability `separability` a bot
//! tweet is a signature tweet instead: a reused template, band tokens drawn from
//! the *opposite* band's pool (probability `band_conditioning`) or from a generic
//! bot pool, and a link together with the account's promoted hashtag (probability
//! 0.3, otherwise neither). The link and hashtag rates match the human ones; only
//! their co-occurrence differs. All other bot tweets are written exactly like human
//! tweets. At full band conditioning the words of a bot look like those of a human
//! in the other band, so that part of the signature can only be read off the text
//! together with the profile.

use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AccountMetadata, AccountRecord, BotClass, Corpus, CorpusError, TweetRecord};
use crate::lm_embed::write_glove;
use crate::par::{self, Parallelism};
use crate::profiler::ProfileVector;
use crate::rng::{self, Rng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("cannot write vectors: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_accounts: usize,
    pub tweets_min: usize,
    pub tweets_max: usize,
    pub bot_fraction: f64,
    /// Probability that a bot tweet carries the bot signature.
    pub separability: f64,
    /// Probability that a signature band token comes from the opposite band.
    pub band_conditioning: f64,
    /// Probability of the first-listed band, per attribute.
    pub band_priors: [f64; 4],
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_accounts: 200,
            tweets_min: 3,
            tweets_max: 6,
            bot_fraction: 0.5,
            separability: 0.6,
            band_conditioning: 1.0,
            band_priors: [0.5; 4],
            vocab_size: 400,
            seed: 0,
        }
    }
}

/// Smallest vocabulary that leaves every pool non-trivial.
pub const MIN_VOCAB: usize = 160;

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_accounts < 2 {
            return bad(format!("n_accounts must be at least 2, got {}", self.n_accounts));
        }
        if self.tweets_min == 0 || self.tweets_min > self.tweets_max {
            return bad(format!("tweet range {}..={} is empty", self.tweets_min, self.tweets_max));
        }
        let probs = [
            ("bot_fraction", self.bot_fraction),
            ("separability", self.separability),
            ("band_conditioning", self.band_conditioning),
        ];
        for (name, p) in probs.into_iter().chain(self.band_priors.iter().map(|&p| ("band_prior", p))) {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.vocab_size < MIN_VOCAB {
            return bad(format!("vocab_size must be at least {MIN_VOCAB}"));
        }
        Ok(())
    }

    /// Bot count: floor(n * fraction), moved by one if needed so that both
    /// classes are present whenever the fraction is strictly between 0 and 1.
    pub fn n_bots(&self) -> usize {
        let n = self.n_accounts;
        let mut k = (n as f64 * self.bot_fraction).floor() as usize;
        if self.bot_fraction > 0.0 && k == 0 {
            k = 1;
        }
        if self.bot_fraction < 1.0 && k == n {
            k = n - 1;
        }
        k
    }
}

const TOPICS: usize = 8;
const HASHTAGS: usize = 24;
const HANDLES: usize = 30;
const TEMPLATES_PER_BOT: usize = 3;
/// Per-tweet probability of a link, and separately of a hashtag.
const ATTACH_RATE: f64 = 0.3;

/// Word pools shared by every account of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    /// `band[attribute][band]`.
    pub band: [[Vec<String>; 2]; 4],
    pub bot: Vec<String>,
    pub topics: Vec<Vec<String>>,
    pub hashtags: Vec<String>,
    pub handles: Vec<String>,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

/// Distinct pronounceable words: the digits of `i` in base 96 pick syllables.
fn pseudo_word(mut i: usize) -> String {
    let base = ONSETS.len() * NUCLEI.len();
    let mut w = String::new();
    for _ in 0..2 {
        let s = i % base;
        i /= base;
        w.push_str(ONSETS[s / NUCLEI.len()]);
        w.push_str(NUCLEI[s % NUCLEI.len()]);
    }
    while i > 0 {
        let s = i % base;
        i /= base;
        w.push_str(ONSETS[s / NUCLEI.len()]);
        w.push_str(NUCLEI[s % NUCLEI.len()]);
    }
    w
}

impl Lexicon {
    pub fn build(cfg: &GenConfig) -> Lexicon {
        let mut r = rng::seeded(rng::derive_str(cfg.seed, "lexicon"));
        let mut words: Vec<String> = (0..cfg.vocab_size).map(pseudo_word).collect();
        words.shuffle(&mut r);
        let m = (cfg.vocab_size / 40).max(4);
        let per_topic = (cfg.vocab_size - 10 * m) / TOPICS;
        let mut take = |k: usize| words.drain(..k).collect::<Vec<_>>();
        let band = std::array::from_fn(|_| [take(m), take(m)]);
        let bot = take(2 * m);
        let topics = (0..TOPICS).map(|_| take(per_topic)).collect();
        let tag = |prefix: &str, n: usize, offset: usize| -> Vec<String> {
            (0..n).map(|i| format!("{prefix}{}", pseudo_word(offset + i))).collect()
        };
        Lexicon {
            band,
            bot,
            topics,
            hashtags: tag("#", HASHTAGS, 50_000),
            handles: tag("@", HANDLES, 70_000),
        }
    }

    /// Named word groups, each of which gets its own cluster in the vector file.
    fn groups(&self) -> Vec<&[String]> {
        let mut g: Vec<&[String]> = self.band.iter().flat_map(|b| b.iter().map(Vec::as_slice)).collect();
        g.push(&self.bot);
        g.extend(self.topics.iter().map(Vec::as_slice));
        g.push(&self.hashtags);
        g.push(&self.handles);
        g
    }
}

/// GloVe-format vectors for the lexicon: one random centre per word group plus
/// per-word noise of scale 0.3.
pub fn write_vectors(cfg: &GenConfig, dim: usize, path: &Path) -> Result<(), SynthError> {
    let lex = Lexicon::build(cfg);
    let mut r = rng::seeded(rng::derive_str(cfg.seed, "vectors"));
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let rt = ["rt".to_string()];
    for group in lex.groups().into_iter().chain([&rt[..]]) {
        let centre: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        for w in group {
            let v = centre.iter().map(|c| c + 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
            rows.push((w.to_lowercase(), v));
        }
    }
    write_glove(path, rows.iter().map(|(w, v)| (w.as_str(), v.as_slice())))?;
    Ok(())
}

struct Persona {
    bot: bool,
    bands: [u8; 4],
    topics: [usize; 2],
    templates: Vec<Vec<String>>,
    promoted: String,
}

fn pick<'a>(r: &mut Rng, pool: &'a [String]) -> &'a str {
    pool.choose(r).expect("non-empty pool")
}

/// 0, 1 or 2 band tokens with probabilities 0.2, 0.6, 0.2.
fn band_token_count(r: &mut Rng) -> usize {
    match r.random::<f64>() {
        u if u < 0.2 => 0,
        u if u < 0.8 => 1,
        _ => 2,
    }
}

fn short_url(r: &mut Rng) -> String {
    const CHARS: &[u8] = b"abcdefghijkmnpqrstuvwxyzABCDEFGHJKLMNPQRSTUVWXYZ23456789";
    let code: String = (0..10).map(|_| CHARS[r.random_range(0..CHARS.len())] as char).collect();
    format!("http://t.co/{code}")
}

fn topic_words(r: &mut Rng, lex: &Lexicon, p: &Persona, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let t = if r.random::<f64>() < 0.8 {
                p.topics[r.random_range(0..2)]
            } else {
                r.random_range(0..TOPICS)
            };
            pick(r, &lex.topics[t]).to_string()
        })
        .collect()
}

fn insert_randomly(r: &mut Rng, words: &mut Vec<String>, extra: Vec<String>) {
    for w in extra {
        let at = r.random_range(0..=words.len());
        words.insert(at, w);
    }
}

fn decorate(r: &mut Rng, lex: &Lexicon, mut words: Vec<String>, rt: f64, mention: f64) -> Vec<String> {
    if r.random::<f64>() < mention {
        let at = r.random_range(0..=words.len());
        words.insert(at, pick(r, &lex.handles).to_string());
    }
    if r.random::<f64>() < rt {
        let h = pick(r, &lex.handles);
        words.insert(0, format!("RT {h}:"));
    }
    words
}

fn human_tweet(r: &mut Rng, lex: &Lexicon, p: &Persona) -> String {
    let n = r.random_range(4..=8);
    let mut words = topic_words(r, lex, p, n);
    let mut extra = Vec::new();
    for (a, &band) in p.bands.iter().enumerate() {
        for _ in 0..band_token_count(r) {
            extra.push(pick(r, &lex.band[a][band as usize]).to_string());
        }
    }
    insert_randomly(r, &mut words, extra);
    if r.random::<f64>() < ATTACH_RATE {
        words.push(pick(r, &lex.hashtags).to_string());
    }
    if r.random::<f64>() < ATTACH_RATE {
        words.push(short_url(r));
    }
    decorate(r, lex, words, 0.15, 0.2).join(" ")
}

fn signature_tweet(r: &mut Rng, lex: &Lexicon, p: &Persona, kappa: f64) -> String {
    let mut words = p.templates.choose(r).expect("templates").clone();
    let mut extra = Vec::new();
    for (a, &band) in p.bands.iter().enumerate() {
        for _ in 0..band_token_count(r) {
            extra.push(signature_token(r, lex, a, band, kappa));
        }
    }
    if extra.is_empty() {
        let a = r.random_range(0..4);
        extra.push(signature_token(r, lex, a, p.bands[a], kappa));
    }
    insert_randomly(r, &mut words, extra);
    if r.random::<f64>() < ATTACH_RATE {
        words.push(p.promoted.clone());
        words.push(short_url(r));
    }
    decorate(r, lex, words, 0.15, 0.2).join(" ")
}

fn signature_token(r: &mut Rng, lex: &Lexicon, attr: usize, band: u8, kappa: f64) -> String {
    if r.random::<f64>() < kappa {
        pick(r, &lex.band[attr][1 - band as usize]).to_string()
    } else {
        pick(r, &lex.bot).to_string()
    }
}

fn make_account(cfg: &GenConfig, lex: &Lexicon, index: usize, bot: bool) -> (AccountRecord, Vec<TweetRecord>) {
    let mut r = rng::seeded(rng::derive(cfg.seed, index as u64));
    let beta = Beta::new(8.0, 2.0).expect("valid beta");
    let mut bands = [0u8; 4];
    let mut confidence = [0.0; 4];
    for a in 0..4 {
        bands[a] = u8::from(r.random::<f64>() >= cfg.band_priors[a]);
        confidence[a] = 0.5 + 0.5 * beta.sample(&mut r);
    }
    let t0 = r.random_range(0..TOPICS);
    let t1 = (t0 + r.random_range(1..TOPICS)) % TOPICS;
    let mut persona = Persona {
        bot,
        bands,
        topics: [t0, t1],
        templates: Vec::new(),
        promoted: pick(&mut r, &lex.hashtags).to_string(),
    };
    if bot {
        persona.templates = (0..TEMPLATES_PER_BOT)
            .map(|_| {
                let n = r.random_range(4..=7);
                topic_words(&mut r, lex, &persona, n)
            })
            .collect();
    }
    let bot_class = if bot {
        *BotClass::BOTS.choose(&mut r).expect("bot classes")
    } else {
        BotClass::Genuine
    };
    let account_id = format!("u{index:05}");
    let n_tweets = r.random_range(cfg.tweets_min..=cfg.tweets_max);
    let mut tweets = Vec::with_capacity(n_tweets);
    for k in 0..n_tweets {
        let text = if persona.bot && r.random::<f64>() < cfg.separability {
            signature_tweet(&mut r, lex, &persona, cfg.band_conditioning)
        } else {
            human_tweet(&mut r, lex, &persona)
        };
        tweets.push(TweetRecord::new(format!("{index:05}{k:03}"), account_id.clone(), text));
    }
    let sum = |f: fn(&TweetRecord) -> u64| tweets.iter().map(f).sum::<u64>();
    let lognormal = |r: &mut Rng, mu: f64| (mu + 1.2 * r.sample::<f64, _>(StandardNormal)).exp().round() as u64;
    let metadata = AccountMetadata {
        follower_count: lognormal(&mut r, 5.0),
        friends_count: lognormal(&mut r, 5.0),
        retweet_count: sum(|t| t.surface.is_retweet as u64),
        reply_count: sum(|t| t.surface.mention_count as u64),
        hashtag_count: sum(|t| t.surface.hashtag_count as u64),
        url_count: sum(|t| t.surface.url_count as u64),
    };
    let account = AccountRecord {
        account_id,
        bot_class,
        metadata: Some(metadata),
        profile: Some(ProfileVector::new(bands, confidence)),
        tweet_ids: Vec::new(),
    };
    (account, tweets)
}

/// Which accounts are bots: a seeded choice of exactly [`GenConfig::n_bots`].
fn bot_mask(cfg: &GenConfig) -> Vec<bool> {
    let mut mask: Vec<bool> = (0..cfg.n_accounts).map(|i| i < cfg.n_bots()).collect();
    mask.shuffle(&mut rng::seeded(rng::derive_str(cfg.seed, "labels")));
    mask
}

pub fn generate(cfg: &GenConfig) -> Result<Corpus, SynthError> {
    generate_with(cfg, Parallelism::default())
}

/// Accounts are generated independently from per-account seeds, so the result
/// does not depend on `mode`.
pub fn generate_with(cfg: &GenConfig, mode: Parallelism) -> Result<Corpus, SynthError> {
    cfg.validate()?;
    let lex = Lexicon::build(cfg);
    let mask = bot_mask(cfg);
    let parts = par::map_range(mode, cfg.n_accounts, |i| make_account(cfg, &lex, i, mask[i]));
    let (accounts, tweets): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok(Corpus::from_records(accounts, tweets.into_iter().flatten().collect())?)
}

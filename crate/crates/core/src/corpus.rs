//! Tweet / account data model, CSV and JSONL ingestion, and account-level splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::preprocess::{self, SurfaceFeatures};
use crate::profiler::{Attribute, ProfileVector};
use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: u64, field: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("tweet `{tweet_id}` references unknown account `{account_id}`")]
    DanglingReference { tweet_id: String, account_id: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("account `{0}` owns no tweets")]
    EmptyAccount(String),
    #[error("{class} has {found} account(s); a split needs at least 2 per class present")]
    InsufficientAccounts { class: String, found: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

/// Account classes: genuine users plus five bot families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BotClass {
    Genuine,
    SocialSpam1,
    SocialSpam2,
    SocialSpam3,
    TraditionalSpam,
    FakeFollower,
}

impl BotClass {
    pub const ALL: [BotClass; 6] = [
        BotClass::Genuine,
        BotClass::SocialSpam1,
        BotClass::SocialSpam2,
        BotClass::SocialSpam3,
        BotClass::TraditionalSpam,
        BotClass::FakeFollower,
    ];
    pub const BOTS: [BotClass; 5] = [
        BotClass::SocialSpam1,
        BotClass::SocialSpam2,
        BotClass::SocialSpam3,
        BotClass::TraditionalSpam,
        BotClass::FakeFollower,
    ];

    pub fn is_bot(self) -> bool {
        self != BotClass::Genuine
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BotClass::Genuine => "genuine",
            BotClass::SocialSpam1 => "social_spambot_1",
            BotClass::SocialSpam2 => "social_spambot_2",
            BotClass::SocialSpam3 => "social_spambot_3",
            BotClass::TraditionalSpam => "traditional_spambot",
            BotClass::FakeFollower => "fake_follower",
        }
    }
}

impl fmt::Display for BotClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BotClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BotClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown bot class `{s}`"))
    }
}

impl From<BotClass> for String {
    fn from(c: BotClass) -> String {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for BotClass {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub account_id: String,
    pub raw_text: String,
    pub cleaned_text: String,
    pub tokens: Vec<String>,
    pub surface: SurfaceFeatures,
}

impl TweetRecord {
    /// Builds a record and runs the preprocessing chain on `raw_text`.
    pub fn new(
        tweet_id: impl Into<String>,
        account_id: impl Into<String>,
        raw_text: impl Into<String>,
    ) -> Self {
        let raw_text = raw_text.into();
        let p = preprocess::process(&raw_text);
        TweetRecord {
            tweet_id: tweet_id.into(),
            account_id: account_id.into(),
            raw_text,
            cleaned_text: p.cleaned,
            tokens: p.tokens,
            surface: p.surface,
        }
    }
}

/// Account-level counts from the original collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AccountMetadata {
    pub follower_count: u64,
    pub friends_count: u64,
    pub retweet_count: u64,
    pub reply_count: u64,
    pub hashtag_count: u64,
    pub url_count: u64,
}

impl AccountMetadata {
    pub const DIM: usize = 6;
    pub const FIELDS: [&'static str; 6] = [
        "follower_count",
        "friends_count",
        "retweet_count",
        "reply_count",
        "hashtag_count",
        "url_count",
    ];

    fn values(&self) -> [u64; 6] {
        [
            self.follower_count,
            self.friends_count,
            self.retweet_count,
            self.reply_count,
            self.hashtag_count,
            self.url_count,
        ]
    }

    fn from_values(v: [u64; 6]) -> Self {
        AccountMetadata {
            follower_count: v[0],
            friends_count: v[1],
            retweet_count: v[2],
            reply_count: v[3],
            hashtag_count: v[4],
            url_count: v[5],
        }
    }

    /// Log-compressed numeric view for classifier input.
    pub fn to_vec(&self) -> [f64; 6] {
        self.values().map(|v| (v as f64).ln_1p())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountRecord {
    pub account_id: String,
    pub bot_class: BotClass,
    pub metadata: Option<AccountMetadata>,
    pub profile: Option<ProfileVector>,
    pub tweet_ids: Vec<String>,
}

impl AccountRecord {
    pub fn is_bot(&self) -> bool {
        self.bot_class.is_bot()
    }
}

/// Immutable after construction; every constructor checks referential integrity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    accounts: IndexMap<String, AccountRecord>,
    tweets: IndexMap<String, TweetRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "ndjson" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            _ => Err(format!("unknown corpus format `{s}`")),
        }
    }
}

impl Corpus {
    /// Assembles a corpus, checking ids and references. Tweet order within an
    /// account follows the order of `tweets`.
    pub fn from_records(
        accounts: Vec<AccountRecord>,
        tweets: Vec<TweetRecord>,
    ) -> Result<Self, CorpusError> {
        let mut acc_map = IndexMap::with_capacity(accounts.len());
        for mut a in accounts {
            if a.account_id.is_empty() {
                return Err(CorpusError::MissingField {
                    line: 0,
                    field: "account_id".into(),
                });
            }
            a.tweet_ids.clear();
            if acc_map.contains_key(&a.account_id) {
                return Err(CorpusError::DuplicateId(a.account_id));
            }
            acc_map.insert(a.account_id.clone(), a);
        }
        let mut tw_map: IndexMap<String, TweetRecord> = IndexMap::with_capacity(tweets.len());
        for t in tweets {
            if t.tweet_id.is_empty() {
                return Err(CorpusError::MissingField {
                    line: 0,
                    field: "tweet_id".into(),
                });
            }
            let Some(acc) = acc_map.get_mut(&t.account_id) else {
                return Err(CorpusError::DanglingReference {
                    tweet_id: t.tweet_id,
                    account_id: t.account_id,
                });
            };
            if tw_map.contains_key(&t.tweet_id) {
                return Err(CorpusError::DuplicateId(t.tweet_id));
            }
            acc.tweet_ids.push(t.tweet_id.clone());
            tw_map.insert(t.tweet_id.clone(), t);
        }
        if let Some(a) = acc_map.values().find(|a| a.tweet_ids.is_empty()) {
            return Err(CorpusError::EmptyAccount(a.account_id.clone()));
        }
        Ok(Corpus {
            accounts: acc_map,
            tweets: tw_map,
        })
    }

    pub fn accounts(&self) -> impl ExactSizeIterator<Item = &AccountRecord> + Clone {
        self.accounts.values()
    }

    pub fn tweets(&self) -> impl ExactSizeIterator<Item = &TweetRecord> + Clone {
        self.tweets.values()
    }

    pub fn account(&self, id: &str) -> Option<&AccountRecord> {
        self.accounts.get(id)
    }

    pub fn tweet(&self, id: &str) -> Option<&TweetRecord> {
        self.tweets.get(id)
    }

    /// Tweets of one account, in corpus order.
    pub fn tweets_of<'a>(&'a self, account: &'a AccountRecord) -> impl Iterator<Item = &'a TweetRecord> {
        account.tweet_ids.iter().map(move |id| &self.tweets[id])
    }

    pub fn n_accounts(&self) -> usize {
        self.accounts.len()
    }

    pub fn n_tweets(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    pub fn is_bot_account(&self, account_id: &str) -> Option<bool> {
        self.accounts.get(account_id).map(AccountRecord::is_bot)
    }

    pub fn has_metadata(&self) -> bool {
        !self.accounts.is_empty() && self.accounts.values().all(|a| a.metadata.is_some())
    }

    pub fn has_profiles(&self) -> bool {
        !self.accounts.is_empty() && self.accounts.values().all(|a| a.profile.is_some())
    }

    /// Accounts whose ids are in `keep`, in the original order.
    pub fn subset(&self, keep: &BTreeSet<&str>) -> Corpus {
        let accounts: IndexMap<_, _> = self
            .accounts
            .iter()
            .filter(|(id, _)| keep.contains(id.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let tweets = self
            .tweets
            .iter()
            .filter(|(_, t)| accounts.contains_key(&t.account_id))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Corpus { accounts, tweets }
    }

    /// Returns a copy with account profiles replaced by `profiles`; accounts missing
    /// from the map keep whatever they had.
    pub fn with_profiles(&self, profiles: &BTreeMap<String, ProfileVector>) -> Corpus {
        let mut out = self.clone();
        for (id, acc) in out.accounts.iter_mut() {
            if let Some(p) = profiles.get(id) {
                acc.profile = Some(*p);
            }
        }
        out
    }

    /// Copy with all stored profiles removed.
    pub fn without_profiles(&self) -> Corpus {
        let mut out = self.clone();
        for acc in out.accounts.values_mut() {
            acc.profile = None;
        }
        out
    }

    /// Content hash over ids, labels and raw text; stable across processes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for a in self.accounts.values() {
            h.update(a.account_id.as_bytes());
            h.update([0]);
            h.update(a.bot_class.as_str().as_bytes());
            h.update([0]);
            for t in self.tweets_of(a) {
                h.update(t.tweet_id.as_bytes());
                h.update([0]);
                h.update(t.raw_text.as_bytes());
                h.update([1]);
            }
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Documented CSV header; profile and metadata columns may be empty.
pub const CSV_HEADER: [&str; 18] = [
    "tweet_id",
    "account_id",
    "bot_class",
    "raw_text",
    "follower_count",
    "friends_count",
    "retweet_count",
    "reply_count",
    "hashtag_count",
    "url_count",
    "age_band",
    "gender",
    "education",
    "personality",
    "conf_age",
    "conf_gender",
    "conf_education",
    "conf_personality",
];

const BAND_COLUMNS: [&str; 4] = ["age_band", "gender", "education", "personality"];
const CONF_COLUMNS: [&str; 4] = ["conf_age", "conf_gender", "conf_education", "conf_personality"];

/// Account fields as they appear on one input row, before merging.
#[derive(Debug, Clone, PartialEq)]
struct AccountFields {
    bot_class: BotClass,
    metadata: Option<AccountMetadata>,
    profile: Option<ProfileVector>,
}

/// A row with no `bot_class` only references an account defined on another row.
struct RawRow {
    line: u64,
    tweet_id: String,
    account_id: String,
    raw_text: String,
    account: Option<AccountFields>,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let rows = match format {
        CorpusFormat::Csv => read_csv_rows(path)?,
        CorpusFormat::Jsonl => read_jsonl_rows(path)?,
    };
    let corpus = assemble(rows)?;
    log::info!(
        "loaded {}: {} accounts, {} tweets",
        path.display(),
        corpus.n_accounts(),
        corpus.n_tweets()
    );
    Ok(corpus)
}

fn assemble(rows: Vec<RawRow>) -> Result<Corpus, CorpusError> {
    let mut defs: IndexMap<String, (u64, AccountFields)> = IndexMap::new();
    for r in &rows {
        if let Some(f) = &r.account {
            match defs.get(&r.account_id) {
                Some((_, prev)) if prev != f => {
                    return Err(CorpusError::MalformedRow {
                        line: r.line,
                        reason: format!("conflicting fields for account `{}`", r.account_id),
                    })
                }
                Some(_) => {}
                None => {
                    defs.insert(r.account_id.clone(), (r.line, f.clone()));
                }
            }
        }
    }
    // Accounts appear in order of their first tweet.
    let mut order: IndexMap<String, ()> = IndexMap::new();
    for r in &rows {
        if !defs.contains_key(&r.account_id) {
            return Err(CorpusError::DanglingReference {
                tweet_id: r.tweet_id.clone(),
                account_id: r.account_id.clone(),
            });
        }
        order.entry(r.account_id.clone()).or_default();
    }
    let accounts = order
        .keys()
        .map(|id| {
            let f = &defs[id].1;
            AccountRecord {
                account_id: id.clone(),
                bot_class: f.bot_class,
                metadata: f.metadata,
                profile: f.profile,
                tweet_ids: Vec::new(),
            }
        })
        .collect();
    let tweets = rows
        .into_iter()
        .map(|r| TweetRecord::new(r.tweet_id, r.account_id, r.raw_text))
        .collect();
    Corpus::from_records(accounts, tweets)
}

fn parse_account_fields(
    line: u64,
    get: &dyn Fn(&str) -> Option<String>,
) -> Result<Option<AccountFields>, CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedRow { line, reason };
    let bot_class = match get("bot_class").filter(|s| !s.trim().is_empty()) {
        None => return Ok(None),
        Some(s) => s.parse::<BotClass>().map_err(malformed)?,
    };

    let meta_raw: Vec<Option<String>> = AccountMetadata::FIELDS
        .iter()
        .map(|f| get(f).filter(|s| !s.trim().is_empty()))
        .collect();
    let metadata = if meta_raw.iter().all(Option::is_none) {
        None
    } else {
        let mut v = [0u64; 6];
        for (i, raw) in meta_raw.iter().enumerate() {
            let field = AccountMetadata::FIELDS[i];
            let raw = raw.as_ref().ok_or_else(|| CorpusError::MissingField {
                line,
                field: field.into(),
            })?;
            v[i] = raw
                .trim()
                .parse::<u64>()
                .map_err(|_| malformed(format!("`{field}` must be a nonnegative integer, got `{raw}`")))?;
        }
        Some(AccountMetadata::from_values(v))
    };

    let prof_raw: Vec<Option<String>> = BAND_COLUMNS
        .iter()
        .chain(CONF_COLUMNS.iter())
        .map(|f| get(f).filter(|s| !s.trim().is_empty()))
        .collect();
    let profile = if prof_raw.iter().all(Option::is_none) {
        None
    } else {
        let mut bands = [0u8; 4];
        let mut conf = [0.0f64; 4];
        for (i, attr) in Attribute::ALL.into_iter().enumerate() {
            let band = prof_raw[i].as_ref().ok_or_else(|| CorpusError::MissingField {
                line,
                field: BAND_COLUMNS[i].into(),
            })?;
            bands[i] = attr.parse_band(band).map_err(malformed)?;
            let c = prof_raw[4 + i].as_ref().ok_or_else(|| CorpusError::MissingField {
                line,
                field: CONF_COLUMNS[i].into(),
            })?;
            conf[i] = c
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(|| malformed(format!("`{}` must be in [0, 1], got `{c}`", CONF_COLUMNS[i])))?;
        }
        Some(ProfileVector::new(bands, conf))
    };

    Ok(Some(AccountFields {
        bot_class,
        metadata,
        profile,
    }))
}

fn read_csv_rows(path: &Path) -> Result<Vec<RawRow>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if !CSV_HEADER.contains(&h) {
            return Err(CorpusError::MalformedRow {
                line: 1,
                reason: format!("unknown column `{h}`"),
            });
        }
        index.insert(h.to_string(), i);
    }
    for required in ["tweet_id", "account_id", "bot_class", "raw_text"] {
        if !index.contains_key(required) {
            return Err(CorpusError::MissingField {
                line: 1,
                field: required.into(),
            });
        }
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CorpusError::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |name: &str| index.get(name).and_then(|&i| rec.get(i)).map(str::to_string);
        rows.push(raw_row(line, &get)?);
    }
    Ok(rows)
}

fn raw_row(line: u64, get: &dyn Fn(&str) -> Option<String>) -> Result<RawRow, CorpusError> {
    let required = |field: &str| {
        get(field)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::MissingField {
                line,
                field: field.into(),
            })
    };
    Ok(RawRow {
        line,
        tweet_id: required("tweet_id")?,
        account_id: required("account_id")?,
        raw_text: get("raw_text").ok_or_else(|| CorpusError::MissingField {
            line,
            field: "raw_text".into(),
        })?,
        account: parse_account_fields(line, get)?,
    })
}

/// JSONL wire shape: one tweet per line with a nested account object.
#[derive(Debug, Serialize, Deserialize)]
struct JsonTweet {
    tweet_id: Option<String>,
    raw_text: Option<String>,
    account: Option<serde_json::Map<String, serde_json::Value>>,
}

fn read_jsonl_rows(path: &Path) -> Result<Vec<RawRow>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: JsonTweet = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let account = obj.account.ok_or_else(|| CorpusError::MissingField {
            line: line_no,
            field: "account".into(),
        })?;
        let tweet_id = obj.tweet_id;
        let raw_text = obj.raw_text;
        let get = |name: &str| -> Option<String> {
            match name {
                "tweet_id" => tweet_id.clone(),
                "raw_text" => raw_text.clone(),
                _ => match account.get(name)? {
                    serde_json::Value::Null => None,
                    serde_json::Value::String(s) => Some(s.clone()),
                    v => Some(v.to_string()),
                },
            }
        };
        rows.push(raw_row(line_no, &get)?);
    }
    Ok(rows)
}

/// String form of every column for one tweet row; account fields are always written.
fn row_fields(c: &Corpus, t: &TweetRecord) -> Vec<(&'static str, Option<String>)> {
    let a = &c.accounts[&t.account_id];
    let mut out: Vec<(&'static str, Option<String>)> = vec![
        ("tweet_id", Some(t.tweet_id.clone())),
        ("account_id", Some(t.account_id.clone())),
        ("bot_class", Some(a.bot_class.to_string())),
        ("raw_text", Some(t.raw_text.clone())),
    ];
    let meta = a.metadata.map(|m| m.values());
    for (i, f) in AccountMetadata::FIELDS.iter().enumerate() {
        out.push((f, meta.map(|v| v[i].to_string())));
    }
    for (i, attr) in Attribute::ALL.into_iter().enumerate() {
        out.push((
            BAND_COLUMNS[i],
            a.profile.map(|p| attr.band_name(p.band(attr)).to_string()),
        ));
    }
    for (i, attr) in Attribute::ALL.into_iter().enumerate() {
        out.push((CONF_COLUMNS[i], a.profile.map(|p| p.confidence(attr).to_string())));
    }
    out
}

pub fn write_corpus(c: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let err = |e: std::io::Error| io_err(path, e);
    match format {
        CorpusFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            let csv_err = |e: csv::Error| io_err(path, std::io::Error::other(e));
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for t in c.tweets() {
                let fields = row_fields(c, t);
                w.write_record(fields.iter().map(|(_, v)| v.as_deref().unwrap_or("")))
                    .map_err(csv_err)?;
            }
            w.flush().map_err(err)?;
        }
        CorpusFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for t in c.tweets() {
                let mut account = serde_json::Map::new();
                let fields = row_fields(c, t);
                for (name, v) in &fields[1..] {
                    if *name == "raw_text" {
                        continue;
                    }
                    let Some(v) = v else { continue };
                    let value = if AccountMetadata::FIELDS.contains(name) {
                        serde_json::Value::from(v.parse::<u64>().unwrap())
                    } else if CONF_COLUMNS.contains(name) {
                        serde_json::Value::from(v.parse::<f64>().unwrap())
                    } else {
                        serde_json::Value::from(v.clone())
                    };
                    account.insert(name.to_string(), value);
                }
                let obj = JsonTweet {
                    tweet_id: Some(t.tweet_id.clone()),
                    raw_text: Some(t.raw_text.clone()),
                    account: Some(account),
                };
                serde_json::to_writer(&mut w, &obj).map_err(|e| err(e.into()))?;
                w.write_all(b"\n").map_err(err)?;
            }
            w.flush().map_err(err)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Stratified by bot/human label, shuffled with the split seed.
    RandomByAccount,
    /// Test set = genuine accounts plus the bot classes mapped to `test_set` in the
    /// composition; each contributes its test fraction. Unmapped bot classes stay
    /// entirely in training.
    ByBotClassComposition { test_set: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub composition: BTreeMap<BotClass, String>,
}

impl SplitSpec {
    pub fn random(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::RandomByAccount,
            train_fraction,
            seed,
            composition: BTreeMap::new(),
        }
    }

    pub fn test_fraction(&self) -> f64 {
        1.0 - self.train_fraction
    }
}

/// Splits by account; every tweet of an account lands on the same side.
pub fn split_corpus(c: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    if !(0.0..=1.0).contains(&spec.train_fraction) || spec.train_fraction.is_nan() {
        return Err(CorpusError::InvalidSplit(format!(
            "train fraction {} outside [0, 1]",
            spec.train_fraction
        )));
    }
    for (label, is_bot) in [("human", false), ("bot", true)] {
        let n = c.accounts().filter(|a| a.is_bot() == is_bot).count();
        if n == 1 {
            return Err(CorpusError::InsufficientAccounts {
                class: label.into(),
                found: n,
            });
        }
    }

    let groups: Vec<(u64, Vec<&str>)> = match &spec.mode {
        SplitMode::RandomByAccount => [false, true]
            .into_iter()
            .map(|is_bot| {
                let ids = c
                    .accounts()
                    .filter(|a| a.is_bot() == is_bot)
                    .map(|a| a.account_id.as_str())
                    .collect();
                (is_bot as u64, ids)
            })
            .collect(),
        SplitMode::ByBotClassComposition { test_set } => {
            let mapped: BTreeSet<BotClass> = spec
                .composition
                .iter()
                .filter(|(_, v)| *v == test_set)
                .map(|(k, _)| *k)
                .collect();
            if mapped.is_empty() {
                return Err(CorpusError::InvalidSplit(format!(
                    "no bot class is mapped to test set `{test_set}`"
                )));
            }
            if mapped.contains(&BotClass::Genuine) {
                return Err(CorpusError::InvalidSplit(
                    "genuine accounts are always part of a composition test set".into(),
                ));
            }
            let mut eligible = vec![(0u64, Vec::new()), (1u64, Vec::new())];
            for a in c.accounts() {
                if !a.is_bot() {
                    eligible[0].1.push(a.account_id.as_str());
                } else if mapped.contains(&a.bot_class) {
                    eligible[1].1.push(a.account_id.as_str());
                }
            }
            eligible
        }
    };

    let mut test_ids: BTreeSet<&str> = BTreeSet::new();
    for (stream, mut ids) in groups {
        ids.sort_unstable();
        ids.shuffle(&mut rng::seeded(rng::derive(spec.seed, stream)));
        let n_train = (ids.len() as f64 * spec.train_fraction).round() as usize;
        test_ids.extend(&ids[n_train.min(ids.len())..]);
    }
    let train_ids: BTreeSet<&str> = c
        .accounts()
        .map(|a| a.account_id.as_str())
        .filter(|id| !test_ids.contains(id))
        .collect();
    Ok((c.subset(&train_ids), c.subset(&test_ids)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCount {
    pub accounts: usize,
    pub tweets: usize,
}

/// Per-class account and tweet counts; every class is listed, zero or not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub classes: BTreeMap<BotClass, ClassCount>,
}

impl Summary {
    pub fn total(&self) -> ClassCount {
        self.classes.values().fold(ClassCount::default(), |acc, c| ClassCount {
            accounts: acc.accounts + c.accounts,
            tweets: acc.tweets + c.tweets,
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{:>12}{:>10}", "user type", "tweets", "accounts")?;
        for (class, n) in &self.classes {
            writeln!(f, "{:<22}{:>12}{:>10}", class.as_str(), n.tweets, n.accounts)?;
        }
        let t = self.total();
        write!(f, "{:<22}{:>12}{:>10}", "total", t.tweets, t.accounts)
    }
}

pub fn summarize(c: &Corpus) -> Summary {
    let mut classes: BTreeMap<BotClass, ClassCount> =
        BotClass::ALL.iter().map(|&k| (k, ClassCount::default())).collect();
    for a in c.accounts() {
        let e = classes.get_mut(&a.bot_class).unwrap();
        e.accounts += 1;
        e.tweets += a.tweet_ids.len();
    }
    Summary { classes }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
tweet_id,account_id,bot_class,raw_text,follower_count,friends_count,retweet_count,reply_count,hashtag_count,url_count,age_band,gender,education,personality,conf_age,conf_gender,conf_education,conf_personality
t1,a1,genuine,\"hello, world\",10,20,0,1,0,0,under25,male,educated,introvert,0.9,0.8,0.7,0.6
t2,a1,genuine,second one,10,20,0,1,0,0,under25,male,educated,introvert,0.9,0.8,0.7,0.6
t3,a2,fake_follower,RT @x: buy http://t.co/abc,,,,,,,,,,,,,,
";

    fn write_tmp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn tiny(n_human: usize, n_bot: usize) -> Corpus {
        let mut accounts = Vec::new();
        let mut tweets = Vec::new();
        for i in 0..n_human + n_bot {
            let id = format!("acc{i:02}");
            accounts.push(AccountRecord {
                account_id: id.clone(),
                bot_class: if i < n_human { BotClass::Genuine } else { BotClass::SocialSpam1 },
                metadata: None,
                profile: None,
                tweet_ids: vec![],
            });
            for j in 0..2 {
                tweets.push(TweetRecord::new(format!("{id}_t{j}"), id.clone(), "text"));
            }
        }
        Corpus::from_records(accounts, tweets).unwrap()
    }

    #[test]
    fn loads_three_row_fixture() {
        let f = write_tmp(FIXTURE, ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!((c.n_accounts(), c.n_tweets()), (2, 3));
        let a1 = c.account("a1").unwrap();
        assert_eq!(a1.tweet_ids, ["t1", "t2"]);
        assert_eq!(a1.metadata.unwrap().friends_count, 20);
        assert!(a1.profile.is_some());
        let a2 = c.account("a2").unwrap();
        assert!(a2.is_bot() && a2.metadata.is_none() && a2.profile.is_none());
        assert_eq!(c.tweet("t3").unwrap().surface.url_count, 1);
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let bad = FIXTURE.replace("t3,a2,fake_follower", "t3,a9,");
        let f = write_tmp(&bad, ".csv");
        let err = load_corpus(f.path(), CorpusFormat::Csv).unwrap_err();
        assert!(matches!(err, CorpusError::DanglingReference { ref account_id, .. } if account_id == "a9"));
    }

    #[test]
    fn reference_rows_resolve_to_definitions_anywhere() {
        let ok = FIXTURE.replace("t2,a1,genuine,second one,10,20,0,1,0,0,under25,male,educated,introvert,0.9,0.8,0.7,0.6", "t2,a1,,second one,,,,,,,,,,,,,,");
        let f = write_tmp(&ok, ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        assert_eq!(c.account("a1").unwrap().tweet_ids.len(), 2);
    }

    #[test]
    fn load_errors() {
        let dup = FIXTURE.replace("t2,a1", "t1,a1");
        let f = write_tmp(&dup, ".csv");
        assert!(matches!(load_corpus(f.path(), CorpusFormat::Csv), Err(CorpusError::DuplicateId(id)) if id == "t1"));

        let partial = FIXTURE.replace(",0.9,0.8,0.7,0.6\nt2", ",0.9,0.8,0.7,\nt2");
        let f = write_tmp(&partial, ".csv");
        assert!(matches!(
            load_corpus(f.path(), CorpusFormat::Csv),
            Err(CorpusError::MissingField { field, line: 2 }) if field == "conf_personality"
        ));

        let neg = FIXTURE.replace("genuine,\"hello, world\",10", "genuine,\"hello, world\",-10");
        let f = write_tmp(&neg, ".csv");
        assert!(matches!(load_corpus(f.path(), CorpusFormat::Csv), Err(CorpusError::MalformedRow { line: 2, .. })));

        let conflict = FIXTURE.replace("t2,a1,genuine", "t2,a1,fake_follower");
        let f = write_tmp(&conflict, ".csv");
        assert!(matches!(load_corpus(f.path(), CorpusFormat::Csv), Err(CorpusError::MalformedRow { line: 3, .. })));

        let no_col = FIXTURE.replacen("tweet_id,", "", 1);
        let f = write_tmp(&no_col, ".csv");
        assert!(matches!(load_corpus(f.path(), CorpusFormat::Csv), Err(CorpusError::MissingField { line: 1, .. })));

        assert!(matches!(
            load_corpus(Path::new("/nonexistent/x.csv"), CorpusFormat::Csv),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let f = write_tmp(FIXTURE, ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for fmt in [CorpusFormat::Csv, CorpusFormat::Jsonl] {
            let p = dir.path().join("out");
            write_corpus(&c, &p, fmt).unwrap();
            let back = load_corpus(&p, fmt).unwrap();
            assert_eq!(back, c);
        }
        // Fully-specified CSV files are reproduced byte for byte.
        let full = FIXTURE.replace(",,,,,,,,,,,,,,\n", ",1,2,3,4,5,6,over25,female,not_educated,extrovert,0.5,0.75,1,0.625\n");
        let f = write_tmp(&full, ".csv");
        let c = load_corpus(f.path(), CorpusFormat::Csv).unwrap();
        let p = dir.path().join("again.csv");
        write_corpus(&c, &p, CorpusFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), full);
    }

    #[test]
    fn split_ten_accounts() {
        let c = tiny(5, 5);
        let spec = SplitSpec::random(0.8, 7);
        let (train, test) = split_corpus(&c, &spec).unwrap();
        assert_eq!((train.n_accounts(), test.n_accounts()), (8, 2));
        let (train2, test2) = split_corpus(&c, &spec).unwrap();
        assert_eq!((train, test), (train2, test2));
    }

    #[test]
    fn split_identity_and_errors() {
        let c = tiny(3, 3);
        let (train, test) = split_corpus(&c, &SplitSpec::random(1.0, 1)).unwrap();
        assert_eq!(train, c);
        assert!(test.is_empty());
        assert!(matches!(
            split_corpus(&tiny(3, 1), &SplitSpec::random(0.5, 1)),
            Err(CorpusError::InsufficientAccounts { .. })
        ));
        assert!(split_corpus(&c, &SplitSpec::random(1.5, 1)).is_err());
    }

    #[test]
    fn composition_split_keeps_only_mapped_bots_in_test() {
        let mut accounts = Vec::new();
        let mut tweets = Vec::new();
        let classes = [BotClass::Genuine, BotClass::SocialSpam1, BotClass::SocialSpam2, BotClass::FakeFollower];
        for (i, class) in classes.iter().cycle().take(40).enumerate() {
            let id = format!("a{i}");
            accounts.push(AccountRecord {
                account_id: id.clone(),
                bot_class: *class,
                metadata: None,
                profile: None,
                tweet_ids: vec![],
            });
            tweets.push(TweetRecord::new(format!("t{i}"), id, "x"));
        }
        let c = Corpus::from_records(accounts, tweets).unwrap();
        let spec = SplitSpec {
            mode: SplitMode::ByBotClassComposition { test_set: "test1".into() },
            train_fraction: 0.5,
            seed: 3,
            composition: [(BotClass::SocialSpam1, "test1".to_string()), (BotClass::SocialSpam2, "test2".to_string())]
                .into_iter()
                .collect(),
        };
        let (train, test) = split_corpus(&c, &spec).unwrap();
        assert!(test.accounts().all(|a| matches!(a.bot_class, BotClass::Genuine | BotClass::SocialSpam1)));
        assert_eq!(test.n_accounts(), 10);
        assert_eq!(train.n_accounts() + test.n_accounts(), 40);
    }

    #[test]
    fn summary_counts() {
        let f = write_tmp(FIXTURE, ".csv");
        let s = summarize(&load_corpus(f.path(), CorpusFormat::Csv).unwrap());
        assert_eq!(s.classes[&BotClass::Genuine], ClassCount { accounts: 1, tweets: 2 });
        assert_eq!(s.classes[&BotClass::FakeFollower], ClassCount { accounts: 1, tweets: 1 });
        assert_eq!(s.total(), ClassCount { accounts: 2, tweets: 3 });
        let empty = summarize(&Corpus::default());
        assert!(empty.classes.values().all(|c| *c == ClassCount::default()));
        assert_eq!(empty.classes.len(), 6);
    }
}

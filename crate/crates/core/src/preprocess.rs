//! Tweet text cleaning, tokenization and surface features.
//!
//! Cleaning runs four stages in a fixed order:
//!
//! 1. whitespace becomes a plain space and other control / format characters are
//!    dropped;
//! 2. literal `\uXXXX` escapes (any number of leading backslashes) are decoded,
//!    repeatedly, until none are left; lone surrogates decode to nothing and
//!    decoded characters go through the stage 1 filter;
//! 3. URLs are replaced by a space: scheme-prefixed URLs, bare `t.co/...`
//!    shorteners and truncated `http:/` fragments (with a trailing ellipsis), in
//!    that order. Tweets mentioning "blog" additionally lose every path-like token
//!    (`host.tld/path`), which is where shortened links hide in those tweets;
//! 4. whitespace runs collapse to one space and the ends are trimmed.
//!
//! Removed spans are replaced with a space rather than deleted, so no stage can
//! splice two fragments into a new match. That keeps `clean_text` idempotent.

use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

static ESCAPE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\\+u([0-9a-fA-F]{4})(?:\\+u([dD][c-fC-F][0-9a-fA-F]{2}))?").unwrap()
});
static SCHEME_URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bhttps?://\S+").unwrap());
static SHORT_URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bt\.co/\w+").unwrap());
static URL_FRAGMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bhttps?:/(?:\s*(?:\.{2,}|…))?(?:\s|$)").unwrap());
static BLOG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bblog\b").unwrap());
static PATH_LIKE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S*\.\S+/\S+").unwrap());
static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\B[@#]\w+|\w+").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\B#\w+").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\B@\w+").unwrap());

/// Counts taken from the raw tweet before URLs are stripped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SurfaceFeatures {
    pub url_count: u32,
    pub hashtag_count: u32,
    pub mention_count: u32,
    pub is_retweet: bool,
    pub token_count: u32,
    pub char_count: u32,
}

impl SurfaceFeatures {
    pub const DIM: usize = 6;

    /// Numeric view used as a classifier input block. Counts are log-compressed.
    pub fn to_vec(&self) -> [f64; Self::DIM] {
        let l = |v: u32| (v as f64).ln_1p();
        [
            l(self.url_count),
            l(self.hashtag_count),
            l(self.mention_count),
            if self.is_retweet { 1.0 } else { 0.0 },
            l(self.token_count),
            l(self.char_count),
        ]
    }
}

/// Result of running the whole preprocessing chain on one tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub cleaned: String,
    pub tokens: Vec<String>,
    pub surface: SurfaceFeatures,
}

pub fn process(raw: &str) -> Processed {
    let decoded = decode_escapes(&normalize_chars(raw));
    let (stripped, url_count) = strip_urls(&decoded);
    let cleaned = collapse_whitespace(&stripped);
    let tokens = tokenize(&cleaned);
    let surface = SurfaceFeatures {
        url_count,
        hashtag_count: HASHTAG.find_iter(&stripped).count() as u32,
        mention_count: MENTION.find_iter(&stripped).count() as u32,
        is_retweet: is_retweet(raw),
        token_count: tokens.len() as u32,
        char_count: raw.chars().count() as u32,
    };
    Processed {
        cleaned,
        tokens,
        surface,
    }
}

pub fn clean_text(raw: &str) -> String {
    let decoded = decode_escapes(&normalize_chars(raw));
    collapse_whitespace(&strip_urls(&decoded).0)
}

/// Lowercased word tokens. `@mention` and `#hashtag` stay whole; other
/// punctuation separates tokens and is dropped.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    TOKEN
        .find_iter(cleaned)
        .map(|m| m.as_str().chars().map(lower_char).collect())
        .collect()
}

pub fn surface_features(raw: &str) -> SurfaceFeatures {
    process(raw).surface
}

/// `RT @user` / `RT@user`, case-insensitive, at the start of the text.
pub fn is_retweet(raw: &str) -> bool {
    let t = raw.trim_start().as_bytes();
    t.len() >= 3
        && t[..2].eq_ignore_ascii_case(b"rt")
        && (t[2] == b'@' || (t[2] == b' ' && t.get(3) == Some(&b'@')))
}

// Single-char lowercase mapping keeps token length equal to the source span.
fn lower_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn decode_escapes(raw: &str) -> String {
    let mut current = raw.to_string();
    // Each pass strictly shortens the string when it changes anything.
    loop {
        let next = ESCAPE
            .replace_all(&current, |caps: &Captures| decode_unit(caps))
            .into_owned();
        if next == current {
            return next;
        }
        current = next;
    }
}

fn decode_unit(caps: &Captures) -> String {
    let hi = u32::from_str_radix(&caps[1], 16).unwrap();
    let lo = caps.get(2).map(|m| u32::from_str_radix(m.as_str(), 16).unwrap());
    let cp = match (hi, lo) {
        (0xD800..=0xDBFF, Some(lo)) => 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00),
        // An unpaired trailing low surrogate is dropped along with the match.
        _ => hi,
    };
    char::from_u32(cp).map(|c| normalize_chars(c.encode_utf8(&mut [0; 4]))).unwrap_or_default()
}

fn is_format_char(c: char) -> bool {
    matches!(c,
        '\u{00AD}' | '\u{200B}'..='\u{200F}' | '\u{202A}'..='\u{202E}'
        | '\u{2060}'..='\u{2064}' | '\u{FEFF}' | '\u{FFF9}'..='\u{FFFB}')
}

fn normalize_chars(s: &str) -> String {
    s.chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_control() || is_format_char(c) {
                None
            } else {
                Some(c)
            }
        })
        .collect()
}

fn strip_urls(text: &str) -> (String, u32) {
    let mut count = 0u32;
    let mut out = text.to_string();
    for re in [&*SCHEME_URL, &*SHORT_URL, &*URL_FRAGMENT] {
        count += re.find_iter(&out).count() as u32;
        out = re.replace_all(&out, " ").into_owned();
    }
    if BLOG.is_match(&out) {
        count += PATH_LIKE.find_iter(&out).count() as u32;
        out = PATH_LIKE.replace_all(&out, " ").into_owned();
    }
    (out, count)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

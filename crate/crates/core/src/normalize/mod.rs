//! Rule-based tokenization and normalization of forum text.
//!
//! Entities (URLs, hashtags, emoticons, dates, times, phone numbers, money,
//! percentages, user handles, censored words, numerals) are recognized by the
//! [`Tokenizer`] and replaced by mask tokens drawn from [`Mask`]. Words mixing
//! letters and digits are segmented, slang is expanded from a lexicon, and
//! stray quote/semicolon punctuation is dropped.

mod tables;
mod tokenizer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::Fingerprinter;

pub use tables::{
    load_emoticons, load_rules, load_slang, parse_emoticons, parse_rules, parse_slang,
    DEFAULT_EMOTICONS, DEFAULT_RULES, DEFAULT_SLANG,
};
pub use tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("{path}:{line}: {message}")]
    TableFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pattern rule {rule:?}: {message}")]
    Pattern { rule: String, message: String },
    #[error("cannot segment {0:?}: it contains no letters")]
    NoLetters(String),
}

/// The closed set of mask tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    Url,
    Hashtag,
    Date,
    Time,
    Phone,
    Money,
    User,
    Percent,
    Censored,
    Number,
    EmHappy,
    EmSad,
    EmNeutral,
}

impl Mask {
    pub const ALL: [Mask; 13] = [
        Mask::Url,
        Mask::Hashtag,
        Mask::Date,
        Mask::Time,
        Mask::Phone,
        Mask::Money,
        Mask::User,
        Mask::Percent,
        Mask::Censored,
        Mask::Number,
        Mask::EmHappy,
        Mask::EmSad,
        Mask::EmNeutral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mask::Url => "url",
            Mask::Hashtag => "hashtag",
            Mask::Date => "date",
            Mask::Time => "time",
            Mask::Phone => "phone",
            Mask::Money => "money",
            Mask::User => "user",
            Mask::Percent => "percent",
            Mask::Censored => "censored",
            Mask::Number => "number",
            Mask::EmHappy => "emhappy",
            Mask::EmSad => "emsad",
            Mask::EmNeutral => "emneutral",
        }
    }

    /// The token text, e.g. `<url>`.
    pub fn token(self) -> String {
        format!("<{}>", self.name())
    }

    pub fn from_name(name: &str) -> Option<Mask> {
        Mask::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Parses `<name>`.
    pub fn from_token(tok: &str) -> Option<Mask> {
        tok.strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .and_then(Mask::from_name)
    }

    pub fn rule(self) -> Rule {
        match self {
            Mask::Url => Rule::Url,
            Mask::Hashtag => Rule::Hashtag,
            Mask::Date => Rule::Date,
            Mask::Time => Rule::Time,
            Mask::Phone => Rule::Phone,
            Mask::Money => Rule::Money,
            Mask::User => Rule::User,
            Mask::Percent => Rule::Percent,
            Mask::Censored => Rule::Censored,
            Mask::Number => Rule::Number,
            Mask::EmHappy | Mask::EmSad | Mask::EmNeutral => Rule::Emoticon,
        }
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Mask,
    Punct,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    /// Byte offsets into the original text.
    pub span: (usize, usize),
    /// Entity recognized by the tokenizer; the normalizer swaps it for a mask.
    pub entity: Option<Mask>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream(pub Vec<Token>);

impl TokenStream {
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|t| t.surface.as_str())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.surfaces().map(str::to_string).collect()
    }

    pub fn join(&self) -> String {
        self.surfaces().collect::<Vec<_>>().join(" ")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Individually switchable normalization steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Url,
    User,
    Hashtag,
    Date,
    Time,
    Phone,
    Money,
    Percent,
    Censored,
    Number,
    Emoticon,
    Segmentation,
    Slang,
    DropQuotes,
    DropTerminalPunct,
}

impl Rule {
    pub const ALL: [Rule; 15] = [
        Rule::Url,
        Rule::User,
        Rule::Hashtag,
        Rule::Date,
        Rule::Time,
        Rule::Phone,
        Rule::Money,
        Rule::Percent,
        Rule::Censored,
        Rule::Number,
        Rule::Emoticon,
        Rule::Segmentation,
        Rule::Slang,
        Rule::DropQuotes,
        Rule::DropTerminalPunct,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowercasePolicy {
    Preserve,
    LowercaseAll,
    /// Only tokens rewritten by segmentation, hashtag unpacking or the slang
    /// lexicon are lowercased.
    #[default]
    LowercaseModifiedOnly,
}

/// One row of the entity rule table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRule {
    pub name: String,
    pub mask: Mask,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizerConfig {
    /// Lowercase key to replacement (tokenized, space-separated).
    pub slang_lexicon: BTreeMap<String, String>,
    pub emoticon_lexicon: BTreeMap<String, Mask>,
    pub lowercase_policy: LowercasePolicy,
    pub enabled_rules: BTreeSet<Rule>,
    pub pattern_rules: Vec<PatternRule>,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        NormalizerConfig {
            slang_lexicon: parse_slang(DEFAULT_SLANG).expect("shipped slang lexicon parses"),
            emoticon_lexicon: parse_emoticons(DEFAULT_EMOTICONS)
                .expect("shipped emoticon lexicon parses"),
            lowercase_policy: LowercasePolicy::default(),
            enabled_rules: Rule::ALL.into_iter().collect(),
            pattern_rules: parse_rules(DEFAULT_RULES).expect("shipped rule table parses"),
        }
    }
}

impl NormalizerConfig {
    pub fn is_enabled(&self, rule: Rule) -> bool {
        self.enabled_rules.contains(&rule)
    }

    /// Content hash over everything that influences normalizer output.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new("sugmine-normalizer v1");
        fp.field("lowercase", &format!("{:?}", self.lowercase_policy));
        for r in &self.enabled_rules {
            fp.field("rule", &format!("{r:?}"));
        }
        for p in &self.pattern_rules {
            fp.field(
                "pattern",
                &format!("{}\t{}\t{}", p.name, p.mask.name(), p.pattern),
            );
        }
        for (k, v) in &self.slang_lexicon {
            fp.field("slang", &format!("{k}\t{v}"));
        }
        for (k, v) in &self.emoticon_lexicon {
            fp.field("emoticon", &format!("{k}\t{}", v.name()));
        }
        fp.finish()
    }
}

/// A compiled normalizer: tokenizer plus normalization rules.
#[derive(Debug, Clone)]
pub struct Normalizer {
    config: NormalizerConfig,
    tokenizer: Tokenizer,
    fingerprint: String,
}

impl Normalizer {
    pub fn new(config: NormalizerConfig) -> Result<Self, NormalizeError> {
        let tokenizer = Tokenizer::new(&config.pattern_rules, &config.emoticon_lexicon)?;
        let fingerprint = config.fingerprint();
        Ok(Normalizer {
            config,
            tokenizer,
            fingerprint,
        })
    }

    /// The shipped default normalizer, compiled once.
    pub fn shared_default() -> &'static Normalizer {
        static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
        DEFAULT.get_or_init(|| {
            Normalizer::new(NormalizerConfig::default()).expect("shipped tables compile")
        })
    }

    pub fn config(&self) -> &NormalizerConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tokenize(&self, text: &str) -> TokenStream {
        self.tokenizer.tokenize(text)
    }

    pub fn normalize(&self, ts: &TokenStream) -> TokenStream {
        let cfg = &self.config;
        let mut out: Vec<Token> = Vec::with_capacity(ts.len());
        for tok in &ts.0 {
            if tok.kind == TokenKind::Mask {
                out.push(tok.clone());
                continue;
            }
            if let Some(mask) = tok.entity {
                if cfg.is_enabled(mask.rule()) {
                    self.push_entity(tok, mask, &mut out);
                    continue;
                }
            }
            match tok.kind {
                TokenKind::Punct => {
                    let quotes_only = tok.surface.chars().all(tokenizer::is_quote_char);
                    if !(quotes_only && cfg.is_enabled(Rule::DropQuotes)) {
                        out.push(tok.clone());
                    }
                }
                TokenKind::Word => self.push_word(tok, &mut out),
                TokenKind::Number | TokenKind::Mask => out.push(tok.clone()),
            }
        }
        if cfg.is_enabled(Rule::DropTerminalPunct) {
            while out.last().is_some_and(is_terminal_punct) {
                out.pop();
            }
        }
        TokenStream(out)
    }

    pub fn preprocess(&self, text: &str) -> String {
        self.normalize(&self.tokenize(text)).join()
    }

    /// Normalized token strings, ready for vectorization.
    pub fn preprocess_tokens(&self, text: &str) -> Vec<String> {
        self.normalize(&self.tokenize(text)).to_strings()
    }

    fn case_modified(&self, s: &str) -> String {
        match self.config.lowercase_policy {
            LowercasePolicy::Preserve => s.to_string(),
            _ => s.to_lowercase(),
        }
    }

    fn push_entity(&self, tok: &Token, mask: Mask, out: &mut Vec<Token>) {
        out.push(Token {
            surface: mask.token(),
            kind: TokenKind::Mask,
            span: tok.span,
            entity: None,
        });
        if mask != Mask::Hashtag {
            return;
        }
        // unpack the tag body after the mask
        let body_start = tok.surface.find('#').map_or(0, |i| i + 1);
        let body = &tok.surface[body_start..];
        let offset = tok.span.0 + body_start;
        let pieces = if self.config.is_enabled(Rule::Segmentation) {
            split_alnum(body)
        } else {
            vec![(0, body)]
        };
        for (at, piece) in pieces {
            out.push(Token {
                surface: self.case_modified(piece),
                kind: TokenKind::Word,
                span: (offset + at, offset + at + piece.len()),
                entity: None,
            });
        }
    }

    fn push_word(&self, tok: &Token, out: &mut Vec<Token>) {
        let cfg = &self.config;
        if cfg.is_enabled(Rule::Slang) {
            if let Some(rep) = cfg.slang_lexicon.get(&tok.surface.to_lowercase()) {
                for w in rep.split(' ') {
                    out.push(Token {
                        surface: self.case_modified(w),
                        kind: TokenKind::Word,
                        span: tok.span,
                        entity: None,
                    });
                }
                return;
            }
        }
        let has_digit = tok.surface.chars().any(|c| c.is_ascii_digit());
        let has_letter = tok.surface.chars().any(char::is_alphabetic);
        if has_digit && has_letter && cfg.is_enabled(Rule::Segmentation) {
            for (at, piece) in split_alnum(&tok.surface) {
                out.push(Token {
                    surface: self.case_modified(piece),
                    kind: TokenKind::Word,
                    span: (tok.span.0 + at, tok.span.0 + at + piece.len()),
                    entity: None,
                });
            }
            return;
        }
        let mut t = tok.clone();
        if cfg.lowercase_policy == LowercasePolicy::LowercaseAll {
            t.surface = t.surface.to_lowercase();
        }
        out.push(t);
    }
}

fn is_terminal_punct(t: &Token) -> bool {
    t.kind == TokenKind::Punct
        && t.entity.is_none()
        && t.surface
            .chars()
            .all(|c| matches!(c, '.' | '!' | '?' | '\u{2026}') || tokenizer::is_quote_char(c))
}

/// Splits at letter/digit boundaries and drops digit runs. Returns byte
/// offsets with the case-preserved pieces; hyphen and underscore joiners at
/// piece edges are trimmed.
fn split_alnum(w: &str) -> Vec<(usize, &str)> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut in_digits: Option<bool> = None;
    for (i, c) in w.char_indices() {
        let d = c.is_ascii_digit();
        if in_digits.is_some_and(|prev| prev != d) {
            pieces.push((start, &w[start..i], in_digits == Some(true)));
            start = i;
        }
        in_digits = Some(d);
    }
    if start < w.len() {
        pieces.push((start, &w[start..], in_digits == Some(true)));
    }
    pieces
        .into_iter()
        .filter(|(_, _, digits)| !digits)
        .filter_map(|(at, p, _)| {
            let trimmed_front = p.trim_start_matches(['-', '_']);
            let at = at + (p.len() - trimmed_front.len());
            let t = trimmed_front.trim_end_matches(['-', '_']);
            (!t.is_empty()).then_some((at, t))
        })
        .collect()
}

/// Splits a word at letter/digit boundaries, drops the digit runs and
/// lowercases what is left.
pub fn segment_word(w: &str) -> Result<Vec<String>, NormalizeError> {
    if !w.chars().any(char::is_alphabetic) {
        return Err(NormalizeError::NoLetters(w.to_string()));
    }
    Ok(split_alnum(w)
        .into_iter()
        .map(|(_, p)| p.to_lowercase())
        .collect())
}

/// Tokenizes with the shipped rule table and emoticon lexicon.
pub fn tokenize(text: &str) -> TokenStream {
    Normalizer::shared_default().tokenize(text)
}

/// Normalizes a token stream. Compiles `cfg`; prefer [`Normalizer`] in loops.
pub fn normalize(ts: &TokenStream, cfg: &NormalizerConfig) -> Result<TokenStream, NormalizeError> {
    Ok(Normalizer::new(cfg.clone())?.normalize(ts))
}

/// Tokenize, normalize and join with single spaces.
pub fn preprocess(text: &str, cfg: &NormalizerConfig) -> Result<String, NormalizeError> {
    Ok(Normalizer::new(cfg.clone())?.preprocess(text))
}

use std::collections::BTreeMap;

use regex::Regex;

use super::{Mask, NormalizeError, PatternRule, Token, TokenKind, TokenStream};

/// Characters whose runs form a single droppable punctuation token.
pub(crate) fn is_quote_char(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | '`' | ';' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}'
    )
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || is_combining_mark(c)
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

const CONTRACTIONS: [&str; 7] = ["n't", "'m", "'s", "'re", "'ve", "'ll", "'d"];

/// Candidate produced by one rule at the current position.
struct Candidate {
    len: usize,
    kind: TokenKind,
    entity: Option<Mask>,
}

/// Entity-aware tokenizer compiled from a rule table and emoticon lexicon.
///
/// At every non-whitespace position all rules are tried; the longest match
/// wins and ties go to the earlier rule. Rule order is: literal mask tokens,
/// the pattern table (in file order), emoticons, contraction suffixes, words,
/// punctuation.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    mask_literal: Regex,
    rules: Vec<(Regex, Mask)>,
    emoticons: Vec<(String, Mask)>,
}

impl Tokenizer {
    pub fn new(
        rules: &[PatternRule],
        emoticons: &BTreeMap<String, Mask>,
    ) -> Result<Self, NormalizeError> {
        let names: Vec<&str> = Mask::ALL.iter().map(|m| m.name()).collect();
        let mask_literal = Regex::new(&format!("^<(?:{})>", names.join("|")))
            .expect("mask names form a valid regex");
        let rules = rules
            .iter()
            .map(|r| {
                Regex::new(&format!("^(?:{})", r.pattern))
                    .map(|re| (re, r.mask))
                    .map_err(|e| NormalizeError::Pattern {
                        rule: r.name.clone(),
                        message: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut emoticons: Vec<(String, Mask)> =
            emoticons.iter().map(|(k, v)| (k.clone(), *v)).collect();
        emoticons.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(Tokenizer {
            mask_literal,
            rules,
            emoticons,
        })
    }

    pub fn tokenize(&self, text: &str) -> TokenStream {
        let mut tokens = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let Some(c) = rest.chars().next() else { break };
            if c.is_whitespace() {
                pos += c.len_utf8();
                continue;
            }
            let best = self.best_candidate(text, pos);
            let end = pos + best.len;
            tokens.push(Token {
                surface: text[pos..end].to_string(),
                kind: best.kind,
                span: (pos, end),
                entity: best.entity,
            });
            pos = end;
        }
        TokenStream(tokens)
    }

    fn best_candidate(&self, text: &str, pos: usize) -> Candidate {
        let rest = &text[pos..];
        let mut best: Option<Candidate> = None;
        let mut offer = |cand: Candidate| {
            if cand.len > 0 && best.as_ref().is_none_or(|b| cand.len > b.len) {
                best = Some(cand);
            }
        };

        if let Some(m) = self.mask_literal.find(rest) {
            offer(Candidate {
                len: m.end(),
                kind: TokenKind::Mask,
                entity: None,
            });
        }
        for (re, mask) in &self.rules {
            if let Some(m) = re.find(rest) {
                if ends_cleanly(text, pos + m.end()) {
                    offer(Candidate {
                        len: m.end(),
                        kind: if *mask == Mask::Number {
                            TokenKind::Number
                        } else {
                            TokenKind::Word
                        },
                        entity: Some(*mask),
                    });
                }
            }
        }
        if let Some((e, mask)) = self
            .emoticons
            .iter()
            .find(|(e, _)| rest.starts_with(e.as_str()) && ends_cleanly(text, pos + e.len()))
        {
            offer(Candidate {
                len: e.len(),
                kind: TokenKind::Punct,
                entity: Some(*mask),
            });
        }
        if let Some(len) = contraction_len(text, pos) {
            offer(Candidate {
                len,
                kind: TokenKind::Word,
                entity: None,
            });
        }
        if let Some(len) = word_len(text, pos) {
            offer(Candidate {
                len,
                kind: TokenKind::Word,
                entity: None,
            });
        }
        offer(Candidate {
            len: punct_len(rest),
            kind: TokenKind::Punct,
            entity: None,
        });
        best.expect("punctuation always matches one character")
    }
}

/// A match ending in an alphanumeric may not be followed by another one.
fn ends_cleanly(text: &str, end: usize) -> bool {
    let last = text[..end].chars().next_back();
    let next = text[end..].chars().next();
    match (last, next) {
        (Some(l), Some(n)) => !(is_word_char(l) && is_word_char(n)),
        _ => true,
    }
}

fn normalize_apostrophes(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c == '\u{2019}' {
                '\''
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

fn contraction_len(text: &str, pos: usize) -> Option<usize> {
    let rest = &text[pos..];
    let head: String = rest.chars().take(4).collect();
    let head_norm = normalize_apostrophes(&head);
    for suffix in CONTRACTIONS {
        if head_norm.starts_with(suffix) {
            // byte length of the matched prefix in the original text
            let len: usize = rest
                .chars()
                .take(suffix.chars().count())
                .map(char::len_utf8)
                .sum();
            if rest[len..].chars().next().is_none_or(|c| !is_word_char(c)) {
                return Some(len);
            }
        }
    }
    None
}

fn word_len(text: &str, pos: usize) -> Option<usize> {
    let rest = &text[pos..];
    let mut end = 0;
    let mut chars = rest.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if is_word_char(c) {
            end = i + c.len_utf8();
        } else if c == '-' && end == i && end > 0 {
            // hyphen joins two word runs
            match chars.peek() {
                Some(&(_, n)) if is_word_char(n) => continue,
                _ => break,
            }
        } else {
            break;
        }
    }
    if end == 0 {
        return None;
    }
    // "don't" -> "do" + "n't"
    let word = &rest[..end];
    if end > 1 && word.ends_with(['n', 'N']) && contraction_len(text, pos + end - 1).is_some() {
        let after = &rest[end..];
        if after.starts_with('\'') || after.starts_with('\u{2019}') {
            return Some(end - 1);
        }
    }
    Some(end)
}

fn punct_len(rest: &str) -> usize {
    let mut chars = rest.chars();
    let first = chars.next().expect("called on non-empty input");
    if is_quote_char(first) {
        rest.chars()
            .take_while(|c| is_quote_char(*c))
            .map(char::len_utf8)
            .sum()
    } else {
        first.len_utf8()
    }
}

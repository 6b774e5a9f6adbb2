//! Versioned tab-separated table files used for lexicons and rule tables.
//!
//! The first line must be `#@sugmine-<kind> v<N>`. Other lines starting with
//! `#` and blank lines are ignored; every remaining line holds exactly the
//! expected number of tab-separated columns.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Mask, NormalizeError, PatternRule};

pub const TABLE_VERSION: u32 = 1;

pub const DEFAULT_RULES: &str = include_str!("../../data/rules.tsv");
pub const DEFAULT_EMOTICONS: &str = include_str!("../../data/emoticons.tsv");
pub const DEFAULT_SLANG: &str = include_str!("../../data/slang.tsv");

fn rows<'a>(
    text: &'a str,
    kind: &str,
    columns: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, NormalizeError> {
    let mut lines = text.lines().enumerate();
    let expected = format!("#@sugmine-{kind} v{TABLE_VERSION}");
    match lines.next() {
        Some((_, first)) if first.trim_end() == expected => {}
        Some((_, first)) => {
            return Err(NormalizeError::Table {
                line: 1,
                message: format!("expected header {expected:?}, found {:?}", first.trim_end()),
            })
        }
        None => {
            return Err(NormalizeError::Table {
                line: 1,
                message: format!("empty file, expected header {expected:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != columns {
            return Err(NormalizeError::Table {
                line: i + 1,
                message: format!(
                    "expected {columns} tab-separated columns, found {}",
                    cols.len()
                ),
            });
        }
        out.push((i + 1, cols));
    }
    Ok(out)
}

pub fn parse_slang(text: &str) -> Result<BTreeMap<String, String>, NormalizeError> {
    let mut map = BTreeMap::new();
    for (line, cols) in rows(text, "slang", 2)? {
        let key = cols[0].trim().to_lowercase();
        let value = cols[1].split_whitespace().collect::<Vec<_>>().join(" ");
        if key.is_empty() || value.is_empty() {
            return Err(NormalizeError::Table {
                line,
                message: "empty key or replacement".into(),
            });
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(NormalizeError::Table {
                line,
                message: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(map)
}

pub fn parse_emoticons(text: &str) -> Result<BTreeMap<String, Mask>, NormalizeError> {
    let mut map = BTreeMap::new();
    for (line, cols) in rows(text, "emoticons", 2)? {
        let key = cols[0].to_string();
        let mask = Mask::from_name(cols[1].trim()).ok_or_else(|| NormalizeError::Table {
            line,
            message: format!("{:?} is not a mask name", cols[1]),
        })?;
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(NormalizeError::Table {
                line,
                message: "emoticon must be non-empty and contain no whitespace".into(),
            });
        }
        if map.insert(key.clone(), mask).is_some() {
            return Err(NormalizeError::Table {
                line,
                message: format!("duplicate emoticon {key:?}"),
            });
        }
    }
    Ok(map)
}

pub fn parse_rules(text: &str) -> Result<Vec<PatternRule>, NormalizeError> {
    let mut out: Vec<PatternRule> = Vec::new();
    for (line, cols) in rows(text, "rules", 3)? {
        let mask = Mask::from_name(cols[1].trim()).ok_or_else(|| NormalizeError::Table {
            line,
            message: format!("{:?} is not a mask name", cols[1]),
        })?;
        let name = cols[0].trim().to_string();
        if out.iter().any(|r| r.name == name) {
            return Err(NormalizeError::Table {
                line,
                message: format!("duplicate rule name {name:?}"),
            });
        }
        if let Err(e) = regex::Regex::new(cols[2]) {
            return Err(NormalizeError::Table {
                line,
                message: format!("rule {name:?}: {e}"),
            });
        }
        out.push(PatternRule {
            name,
            mask,
            pattern: cols[2].to_string(),
        });
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, NormalizeError> {
    std::fs::read_to_string(path).map_err(|source| NormalizeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn at(path: &Path, e: NormalizeError) -> NormalizeError {
    match e {
        NormalizeError::Table { line, message } => NormalizeError::TableFile {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    }
}

pub fn load_slang(path: &Path) -> Result<BTreeMap<String, String>, NormalizeError> {
    parse_slang(&read(path)?).map_err(|e| at(path, e))
}

pub fn load_emoticons(path: &Path) -> Result<BTreeMap<String, Mask>, NormalizeError> {
    parse_emoticons(&read(path)?).map_err(|e| at(path, e))
}

pub fn load_rules(path: &Path) -> Result<Vec<PatternRule>, NormalizeError> {
    parse_rules(&read(path)?).map_err(|e| at(path, e))
}

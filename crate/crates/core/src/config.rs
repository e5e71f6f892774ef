//! Flat `key = value` configuration text.
//!
//! One assignment per line, dotted keys, `#` starts a comment. Values are
//! bare words, numbers, optionally quoted strings or bracketed lists
//! `[a, b, c]`. Every key must be consumed by the reader; leftovers are
//! reported as unknown keys with their line numbers.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('"') && s.ends_with('"')) || (s.starts_with('\'') && s.ends_with('\'')))
    {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '#') => return &line[..i],
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            _ => {}
        }
    }
    line
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', got '{body}'"),
            })?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return Err(Error::Config {
                    line,
                    message: format!("invalid key '{key}'"),
                });
            }
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    message: format!("missing value for '{key}'"),
                });
            }
            if value.starts_with('[') != value.ends_with(']') {
                return Err(Error::Config {
                    line,
                    message: format!("unbalanced list brackets in '{key}'"),
                });
            }
            let entry = Entry {
                value: value.to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}' (first set on line {})", prev.line),
                });
            }
        }
        Ok(ConfigMap {
            entries,
            used: RefCell::default(),
        })
    }

    /// Sets or replaces a key, as a command-line override does.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: 0,
            },
        );
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Keys starting with `prefix`.
    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(e)
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line_of(key),
            message: format!("{key}: {}", message.into()),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        self.raw(key).map(|e| strip_quotes(&e.value).to_string())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => strip_quotes(&e.value)
                .parse::<T>()
                .map(Some)
                .map_err(|err| Error::Config {
                    line: e.line,
                    message: format!("{key}: cannot parse '{}': {err}", e.value),
                }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        let body = e.value.trim();
        let inner = body
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .unwrap_or(body)
            .trim();
        if inner.is_empty() {
            return Ok(Some(Vec::new()));
        }
        inner
            .split(',')
            .map(|item| {
                let item = strip_quotes(item);
                item.parse::<T>().map_err(|err| Error::Config {
                    line: e.line,
                    message: format!("{key}: cannot parse list item '{item}': {err}"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Fails on the first key (by line) that no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let mut unknown: Vec<(&String, &Entry)> = self
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            None => Ok(()),
            Some((k, e)) => Err(Error::Config {
                line: e.line,
                message: format!("unknown key '{k}'"),
            }),
        }
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> String {
        self.entries
            .iter()
            .map(|(k, e)| format!("{k} = {}\n", e.value))
            .collect()
    }
}

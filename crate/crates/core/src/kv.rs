//! `key=value` text files with optional `[section]` headers.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed `key=value` lines grouped by section ("" before any header).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl KvFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut file = KvFile::default();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                file.sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: i + 1,
                    reason: format!("expected `key=value`, got `{line}`"),
                });
            };
            file.sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(file)
    }

    pub fn section(&self, name: &str) -> Section<'_> {
        Section {
            values: self.sections.get(name),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Section<'a> {
    values: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    pub fn from_map(values: &'a BTreeMap<String, String>) -> Self {
        Section { values: Some(values) }
    }

    pub fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.and_then(|m| m.get(key)).map(String::as_str)
    }

    /// Parses `key` if present; the error names the field.
    pub fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::param(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &'static str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn keys(&self) -> impl Iterator<Item = &'a str> {
        self.values.into_iter().flat_map(|m| m.keys().map(String::as_str))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let f = KvFile::parse("top=1\n[model]\nlayers = 6 # six\n\n[train]\nlr=0.01\n", "m").unwrap();
        assert_eq!(f.section("").raw("top"), Some("1"));
        assert_eq!(f.section("model").get::<usize>("layers").unwrap(), Some(6));
        assert_eq!(f.section("train").get_or("epochs", 5usize).unwrap(), 5);
        let err = f.section("train").get::<usize>("lr").unwrap_err();
        assert!(err.to_string().contains("`lr`"));
        assert!(KvFile::parse("[x]\nnonsense\n", "m").is_err());
    }
}

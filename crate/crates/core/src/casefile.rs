//! Line-oriented sectioned text files.
//!
//! ```text
//! # comment
//! [system]
//! base_mva = 100
//!
//! [bus]
//! 1  slack  1.04  0.0  0  0  0  0
//! ```
//!
//! A section is either a list of whitespace-separated records or a list of
//! `key = value` pairs; the consumer decides which. Line numbers are kept so
//! that errors can point back into the file.

use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CaseFileError {
    #[error("line {line}: malformed section header `{text}`")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: content outside of any section")]
    NoSection { line: usize },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    BadKeyValue { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey { line: usize, section: String, key: String },
    #[error("line {line}: field `{field}`: cannot parse `{text}`")]
    BadField { line: usize, field: String, text: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: usize, expected: String, found: usize },
    #[error("section [{section}] is missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("line {line}: duplicate section [{section}]")]
    DuplicateSection { line: usize, section: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub lines: Vec<Line>,
}

impl Section {
    /// Records as whitespace-separated field lists.
    pub fn records(&self) -> impl Iterator<Item = Record<'_>> {
        self.lines.iter().map(|l| Record {
            line: l.number,
            fields: l.text.split_whitespace().collect(),
        })
    }

    /// Interprets the section as `key = value` pairs.
    pub fn key_values(&self) -> Result<KeyValues, CaseFileError> {
        let mut map = BTreeMap::new();
        for l in &self.lines {
            let (k, v) = l.text.split_once('=').ok_or_else(|| CaseFileError::BadKeyValue {
                line: l.number,
                text: l.text.clone(),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(CaseFileError::BadKeyValue { line: l.number, text: l.text.clone() });
            }
            if map.contains_key(&key) {
                return Err(CaseFileError::DuplicateKey {
                    line: l.number,
                    section: self.name.clone(),
                    key,
                });
            }
            map.insert(key, (l.number, v.trim().to_string()));
        }
        Ok(KeyValues { section: self.name.clone(), map })
    }
}

pub struct Record<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

impl Record<'_> {
    pub fn expect_len(&self, min: usize, max: usize) -> Result<(), CaseFileError> {
        if self.fields.len() < min || self.fields.len() > max {
            let expected = if min == max { min.to_string() } else { format!("{min}-{max}") };
            return Err(CaseFileError::FieldCount { line: self.line, expected, found: self.fields.len() });
        }
        Ok(())
    }

    pub fn get<T: FromStr>(&self, idx: usize, field: &str) -> Result<T, CaseFileError> {
        let text = self.fields.get(idx).copied().unwrap_or("");
        text.parse().map_err(|_| CaseFileError::BadField {
            line: self.line,
            field: field.to_string(),
            text: text.to_string(),
        })
    }

    pub fn get_or<T: FromStr>(&self, idx: usize, field: &str, default: T) -> Result<T, CaseFileError> {
        if idx >= self.fields.len() {
            Ok(default)
        } else {
            self.get(idx, field)
        }
    }
}

#[derive(Debug, Clone)]
pub struct KeyValues {
    section: String,
    map: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CaseFileError> {
        let (line, text) = self.map.get(key).ok_or_else(|| CaseFileError::MissingKey {
            section: self.section.clone(),
            key: key.to_string(),
        })?;
        text.parse().map_err(|_| CaseFileError::BadField {
            line: *line,
            field: key.to_string(),
            text: text.clone(),
        })
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CaseFileError> {
        if self.map.contains_key(key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CaseFile {
    pub sections: Vec<Section>,
}

impl CaseFile {
    pub fn parse(text: &str) -> Result<Self, CaseFileError> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let number = i + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                let name = content
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .map(str::trim)
                    .filter(|s| {
                        !s.is_empty()
                            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
                    })
                    .ok_or_else(|| CaseFileError::BadHeader { line: number, text: content.to_string() })?;
                if sections.iter().any(|s| s.name == name) {
                    return Err(CaseFileError::DuplicateSection { line: number, section: name.to_string() });
                }
                sections.push(Section { name: name.to_string(), line: number, lines: Vec::new() });
                continue;
            }
            match sections.last_mut() {
                Some(s) => s.lines.push(Line { number, text: content.to_string() }),
                None => return Err(CaseFileError::NoSection { line: number }),
            }
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Section, CaseFileError> {
        self.section(name).ok_or_else(|| CaseFileError::MissingSection(name.to_string()))
    }
}

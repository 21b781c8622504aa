//! `key = value` text files with `#` comments.

use std::path::Path;
use std::str::FromStr;

use super::IoError;

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

pub(crate) fn parse(text: &str, path: &Path) -> Result<Vec<Entry>, IoError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| IoError::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (k.trim().to_string(), v.trim().to_string());
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        entries.push(Entry { key, value, line: i + 1 });
    }
    Ok(entries)
}

pub(crate) fn value<T: FromStr>(e: &Entry, path: &Path) -> Result<T, IoError> {
    e.value.parse().map_err(|_| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        msg: format!("cannot parse {:?} for {}", e.value, e.key),
    })
}

pub(crate) fn values<T: FromStr, const N: usize>(e: &Entry, path: &Path) -> Result<[T; N], IoError> {
    let err = || IoError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        msg: format!("{} needs {N} values, got {:?}", e.key, e.value),
    };
    let parsed: Vec<T> = e.value.split_whitespace().map(|s| s.parse().map_err(|_| err())).collect::<Result<_, _>>()?;
    parsed.try_into().map_err(|_| err())
}

//! File ingestion with field-path errors, output bookkeeping and canonical
//! hashing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use serde_path_to_error::Segment;
use sha2::{Digest, Sha256};

use coalesce_core::{Error, ValidationIssue};

/// One machine-readable problem with an input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorItem {
    /// Input the problem was found in, or the offending flag.
    pub source: String,
    /// JSON pointer into `source`; empty for the whole document.
    pub path: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particle: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<usize>,
}

impl ErrorItem {
    pub fn new(source: impl Into<String>, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            path: path.into(),
            message: message.into(),
            particle: None,
            interval: None,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Inputs are malformed or violate an invariant.
    Invalid(Vec<ErrorItem>),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn invalid(source: impl Into<String>, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid(vec![ErrorItem::new(source, path, message)])
    }

    pub fn from_issues(source: &str, issues: Vec<ValidationIssue>) -> Self {
        Self::Invalid(
            issues
                .into_iter()
                .map(|i| ErrorItem::new(source, i.path, i.message))
                .collect(),
        )
    }

    /// Attributes a core error to `source`: problems with the inputs become
    /// validation errors, I/O failures stay internal.
    pub fn core(source: &str, e: Error) -> Self {
        match e {
            Error::Validation(issues) => Self::from_issues(source, issues),
            Error::Io(e) => Self::Internal(e.into()),
            other => Self::invalid(source, "", other.to_string()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::Internal(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

/// Parses `path` as JSON, keeping the raw document for hashing.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<(T, Value)> {
    let source = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::invalid(&source, "", format!("cannot read: {e}")))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::invalid(&source, "", e.to_string()))?;
    let parsed = serde_path_to_error::deserialize(&raw).map_err(|e| {
        let at = pointer(e.path());
        CliError::invalid(&source, at, e.into_inner().to_string())
    })?;
    Ok((parsed, raw))
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut entries: Vec<_> = map.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sorted(v))).collect())
            }
            Value::Array(xs) => Value::Array(xs.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(v).to_string()
}

pub fn sha256_hex(v: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(v).as_bytes()))
}

/// Output directory that remembers what was written to it.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes whatever `fill` produces into a buffer first, so a failing
    /// writer never leaves a truncated file behind.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b": 1, "a": {"y": [1, {"q": 2, "p": 3}], "x": null}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": {"x": null, "y": [1, {"p": 3, "q": 2}]}, "b": 1}"#).unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
        assert_eq!(sha256_hex(&a), sha256_hex(&b));
        let c: Value = serde_json::from_str(r#"{"b": 1, "a": {"y": [{"q": 2, "p": 3}, 1], "x": null}}"#).unwrap();
        assert_ne!(sha256_hex(&a), sha256_hex(&c));
    }

    #[test]
    fn field_paths_are_pointers() {
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Inner {
            mass: f64,
        }
        #[derive(serde::Deserialize, Debug)]
        #[allow(dead_code)]
        struct Outer {
            atoms: Vec<Inner>,
        }
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("x.json");
        fs::write(&file, r#"{"atoms": [{"mass": 1}, {"mass": "heavy"}]}"#).unwrap();
        match read_json::<Outer>(&file) {
            Err(CliError::Invalid(items)) => assert_eq!(items[0].path, "/atoms/1/mass"),
            other => panic!("{other:?}"),
        }
    }
}

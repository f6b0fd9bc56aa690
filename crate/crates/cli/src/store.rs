//! On-disk layout shared by the CLI and the review service.
//!
//! ```text
//! <root>/texts/<id>.txt          plain UTF-8, "\n" line endings
//! <root>/annotations/<id>.json   working stand-off set
//! <root>/reports/<id>.json       last pipeline report
//! <root>/gold/<id>.json          reviewed stand-off set
//! <root>/cache/                  model transcripts
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use mythmark::schema::{validate_document, AnnotatedDocument, SchemaError, StandoffFile, ValidationReport};
use mythmark::text::sha256_hex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("`{0}` is not a valid document id (letters, digits, '-', '_' and '.' only)")]
    BadId(String),
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("annotation set for `{doc_id}` fails validation ({} violations)", .report.violations.len())]
    Invalid {
        doc_id: String,
        report: ValidationReport,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Document ids double as file stems, so they are kept to a safe alphabet.
pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadId(id.to_string()))
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
    tmp.write_all(contents.as_bytes()).map_err(io(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn text_path(&self, id: &str) -> PathBuf {
        self.root.join("texts").join(format!("{id}.txt"))
    }

    pub fn annotations_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.json"))
    }

    pub fn report_path(&self, id: &str) -> PathBuf {
        self.root.join("reports").join(format!("{id}.json"))
    }

    pub fn gold_path(&self, id: &str) -> PathBuf {
        self.root.join("gold").join(format!("{id}.json"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    /// Ids of every text in the store, sorted.
    pub fn doc_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("texts");
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&dir)(e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let path = entry.map_err(io(&dir))?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if check_id(stem).is_ok() {
                        ids.push(stem.to_string());
                    }
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn read_text(&self, id: &str) -> Result<String, StoreError> {
        check_id(id)?;
        let path = self.text_path(id);
        match std::fs::read_to_string(&path) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::UnknownDoc(id.to_string())),
            Err(e) => Err(io(&path)(e)),
        }
    }

    /// Raw bytes of a JSON file, `None` when it does not exist.
    fn read_optional(path: &Path) -> Result<Option<String>, StoreError> {
        match std::fs::read_to_string(path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io(path)(e)),
        }
    }

    /// The working annotation file and a revision tag (digest of its bytes).
    pub fn read_annotations(&self, id: &str) -> Result<Option<(StandoffFile, String)>, StoreError> {
        check_id(id)?;
        let path = self.annotations_path(id);
        let Some(raw) = Self::read_optional(&path)? else {
            return Ok(None);
        };
        let file: StandoffFile =
            serde_json::from_str(&raw).map_err(|source| SchemaError::Json { path: path.clone(), source })?;
        Ok(Some((file, sha256_hex(&raw))))
    }

    pub fn read_report(&self, id: &str) -> Result<Option<serde_json::Value>, StoreError> {
        let path = self.report_path(id);
        let Some(raw) = Self::read_optional(&path)? else {
            return Ok(None);
        };
        let value = serde_json::from_str(&raw).map_err(|source| SchemaError::Json { path: path.clone(), source })?;
        Ok(Some(value))
    }

    /// Text plus working annotations (none if no file yet), digest-checked.
    pub fn load_document(&self, id: &str) -> Result<AnnotatedDocument, StoreError> {
        let text = self.read_text(id)?;
        match self.read_annotations(id)? {
            Some((file, _)) => Ok(file.into_document(text)?),
            None => Ok(AnnotatedDocument::new(id, text)),
        }
    }

    /// Validates `file` against the stored text, then writes it atomically
    /// to `path`. Returns the new revision tag.
    pub fn write_standoff(&self, path: &Path, file: &StandoffFile) -> Result<String, StoreError> {
        let text = self.read_text(&file.doc_id)?;
        let doc = file.clone().into_document(text)?;
        let report = validate_document(&doc);
        if !report.is_valid() {
            return Err(StoreError::Invalid {
                doc_id: file.doc_id.clone(),
                report,
            });
        }
        let json = file.to_json();
        write_atomic(path, &json)?;
        Ok(sha256_hex(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        assert!(check_id("p1").is_ok());
        assert!(check_id("swann-1913_v2.a").is_ok());
        for bad in ["", "../x", ".hidden", "a/b", "é"] {
            assert!(check_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.json");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}

//! The mythological tagset and the stand-off annotation model.
//!
//! Annotations are stored apart from the text they describe, as half-open
//! code-point ranges `[start, end)` plus an [`EntityType`]. A document's
//! annotations are sorted by `start` and never overlap, which mirrors what
//! the flat inline tag format can express.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::{sha256_hex, CodePoints};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unknown entity type `{0}`")]
    UnknownType(String),
    #[error("text digest mismatch for `{doc_id}`: file says {expected}, text hashes to {actual}")]
    DigestMismatch {
        doc_id: String,
        expected: String,
        actual: String,
    },
    #[error("no text file found for `{0}`")]
    MissingText(String),
    #[error("malformed stand-off file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The ten categories of mythological reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Deity,
    Hero,
    Creature,
    HalfCreature,
    CreatureGroup,
    Monsters,
    Location,
    Event,
    Object,
    Concept,
}

impl EntityType {
    pub const ALL: [EntityType; 10] = [
        EntityType::Deity,
        EntityType::Hero,
        EntityType::Creature,
        EntityType::HalfCreature,
        EntityType::CreatureGroup,
        EntityType::Monsters,
        EntityType::Location,
        EntityType::Event,
        EntityType::Object,
        EntityType::Concept,
    ];

    /// Canonical label: lowercase ASCII with underscores.
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Deity => "deity",
            EntityType::Hero => "hero",
            EntityType::Creature => "creature",
            EntityType::HalfCreature => "half_creature",
            EntityType::CreatureGroup => "creature_group",
            EntityType::Monsters => "monsters",
            EntityType::Location => "location",
            EntityType::Event => "event",
            EntityType::Object => "object",
            EntityType::Concept => "concept",
        }
    }

    /// The gloss shown to annotators (and to the model) for this type.
    pub fn gloss(self) -> &'static str {
        match self {
            EntityType::Deity => "For gods or goddesses, like Zeus or Athena.",
            EntityType::Hero => "For mythological heroes like Heracles or Achilles.",
            EntityType::Creature => "For mythological creatures like the Minotaur.",
            EntityType::HalfCreature => "For beings like centaurs or satyrs.",
            EntityType::CreatureGroup => {
                "For groups of mythological entities like the Gorgons or collective references to “monsters.”"
            }
            EntityType::Monsters => "For general references to mythological beings or monsters.",
            EntityType::Location => "For places or geographic references like Érymanthos.",
            EntityType::Event => {
                "For mythological events, like the Trojan War or the Labors of Heracles."
            }
            EntityType::Object => {
                "For mythological objects, like the Golden Fleece or Pandora’s Box."
            }
            EntityType::Concept => "For abstract mythological concepts, like Fate or Nemesis.",
        }
    }
}

/// Parses a type label.
///
/// Surrounding whitespace is ignored, matching is case-insensitive, and the
/// backslash-escaped underscore (`half\_creature`) is accepted.
pub fn parse_entity_type(label: &str) -> Result<EntityType, SchemaError> {
    let normalized = label.trim().replace("\\_", "_").to_ascii_lowercase();
    EntityType::ALL
        .into_iter()
        .find(|t| t.as_str() == normalized)
        .ok_or_else(|| SchemaError::UnknownType(label.to_string()))
}

impl FromStr for EntityType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_entity_type(s)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        parse_entity_type(&label).map_err(serde::de::Error::custom)
    }
}

/// One stand-off span. Offsets are code points into the owning text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub surface: String,
}

impl Annotation {
    /// Builds an annotation whose surface is read from `text`. Returns `None`
    /// for empty or out-of-bounds ranges.
    pub fn from_text(text: &str, start: usize, end: usize, entity_type: EntityType) -> Option<Self> {
        if start >= end {
            return None;
        }
        let surface = CodePoints::new(text).slice(start, end)?.to_string();
        Some(Annotation {
            start,
            end,
            entity_type,
            surface,
        })
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &Annotation) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// The same annotation moved by `delta` code points.
    pub fn shifted(&self, delta: isize) -> Annotation {
        Annotation {
            start: self.start.wrapping_add_signed(delta),
            end: self.end.wrapping_add_signed(delta),
            entity_type: self.entity_type,
            surface: self.surface.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub prompt_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl AnnotatedDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        AnnotatedDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            annotations: Vec::new(),
            provenance: None,
        }
    }

    pub fn with_annotations(mut self, annotations: Vec<Annotation>) -> Self {
        self.annotations = annotations;
        self
    }

    pub fn text_sha256(&self) -> String {
        sha256_hex(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OffsetOutOfBounds,
    SurfaceMismatch,
    Overlap,
    Unsorted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Checks every annotation invariant against `doc.text`.
pub fn validate_document(doc: &AnnotatedDocument) -> ValidationReport {
    validate_annotations(&doc.text, &doc.annotations)
}

/// Same as [`validate_document`] for a bare annotation list.
pub fn validate_annotations(text: &str, annotations: &[Annotation]) -> ValidationReport {
    let cp = CodePoints::new(text);
    let mut violations = Vec::new();

    for (index, ann) in annotations.iter().enumerate() {
        if ann.start >= ann.end || ann.end > cp.len() {
            violations.push(Violation {
                kind: ViolationKind::OffsetOutOfBounds,
                index,
                detail: format!(
                    "span [{}, {}) is empty or exceeds text length {}",
                    ann.start,
                    ann.end,
                    cp.len()
                ),
            });
        } else {
            let slice = cp.slice(ann.start, ann.end).unwrap_or_default();
            if slice != ann.surface {
                violations.push(Violation {
                    kind: ViolationKind::SurfaceMismatch,
                    index,
                    detail: format!(
                        "surface {:?} but text[{}..{}] is {:?}",
                        ann.surface, ann.start, ann.end, slice
                    ),
                });
            }
        }
        if index > 0 && ann.start <= annotations[index - 1].start {
            violations.push(Violation {
                kind: ViolationKind::Unsorted,
                index,
                detail: format!(
                    "start {} does not follow previous start {}",
                    ann.start,
                    annotations[index - 1].start
                ),
            });
        }
    }

    // sweep in start order so overlaps are found even when the list is unsorted
    let mut order: Vec<usize> = (0..annotations.len())
        .filter(|&i| annotations[i].start < annotations[i].end)
        .collect();
    order.sort_by_key(|&i| (annotations[i].start, annotations[i].end, i));
    let mut reach: Option<usize> = None;
    for &i in &order {
        let ann = &annotations[i];
        if let Some(r) = reach {
            if ann.start < annotations[r].end {
                violations.push(Violation {
                    kind: ViolationKind::Overlap,
                    index: i,
                    detail: format!(
                        "span [{}, {}) overlaps annotation {} [{}, {})",
                        ann.start, ann.end, r, annotations[r].start, annotations[r].end
                    ),
                });
            }
        }
        if reach.map_or(true, |r| ann.end > annotations[r].end) {
            reach = Some(i);
        }
    }

    violations.sort_by_key(|v| (v.index, v.kind as u8));
    ValidationReport { violations }
}

/// Reviewer metadata attached to gold files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewInfo {
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// On-disk stand-off file. The text lives next to it as plain UTF-8; only its
/// digest is stored here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandoffFile {
    pub doc_id: String,
    pub text_sha256: String,
    /// Free-form description of the span guidelines a gold file follows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_convention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub annotations: Vec<Annotation>,
}

impl StandoffFile {
    pub fn from_document(doc: &AnnotatedDocument) -> Self {
        StandoffFile {
            doc_id: doc.doc_id.clone(),
            text_sha256: doc.text_sha256(),
            span_convention: None,
            review: None,
            provenance: doc.provenance.clone(),
            annotations: doc.annotations.clone(),
        }
    }

    /// Attaches `text` after checking it against the stored digest.
    pub fn into_document(self, text: String) -> Result<AnnotatedDocument, SchemaError> {
        let actual = sha256_hex(&text);
        if !actual.eq_ignore_ascii_case(&self.text_sha256) {
            return Err(SchemaError::DigestMismatch {
                doc_id: self.doc_id,
                expected: self.text_sha256,
                actual,
            });
        }
        Ok(AnnotatedDocument {
            doc_id: self.doc_id,
            text,
            annotations: self.annotations,
            provenance: self.provenance,
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("stand-off file serializes");
        out.push('\n');
        out
    }

    pub fn read(path: &Path) -> Result<Self, SchemaError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&raw).map_err(|source| SchemaError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Where the plain text for a stand-off file lives: `<stem>.txt` beside it,
/// or `../texts/<doc_id>.txt` in a store layout.
pub fn locate_text(standoff_path: &Path, doc_id: &str) -> Option<PathBuf> {
    let beside = standoff_path.with_extension("txt");
    if beside.is_file() {
        return Some(beside);
    }
    let store = standoff_path.parent()?.parent()?;
    let in_store = store.join("texts").join(format!("{doc_id}.txt"));
    in_store.is_file().then_some(in_store)
}

/// Reads a stand-off file and its text, refusing digest mismatches.
pub fn load_standoff(path: &Path) -> Result<(StandoffFile, AnnotatedDocument), SchemaError> {
    let file = StandoffFile::read(path)?;
    let text_path =
        locate_text(path, &file.doc_id).ok_or_else(|| SchemaError::MissingText(file.doc_id.clone()))?;
    let text = std::fs::read_to_string(&text_path).map_err(|source| SchemaError::Io {
        path: text_path.clone(),
        source,
    })?;
    let doc = file.clone().into_document(text)?;
    Ok((file, doc))
}

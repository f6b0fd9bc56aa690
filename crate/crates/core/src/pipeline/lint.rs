use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::quote::{normalize, NormalizationConfig};
use crate::schema::{AnnotatedDocument, EntityType};
use crate::text::is_word_char;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintKind {
    TypeConflict,
    RepeatedSurface,
    SpanSuspect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintFinding {
    pub kind: LintKind,
    /// Indices into the document's annotation list, ascending.
    pub annotations: Vec<usize>,
    pub detail: String,
}

/// Words that, right before a tagged name, suggest the entity is the longer
/// phrase ("île de Calypso" rather than "Calypso").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintConfig {
    pub cues: Vec<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            cues: ["île de", "palais de", "mont", "temple de"]
                .map(String::from)
                .to_vec(),
        }
    }
}

pub fn lint_document(doc: &AnnotatedDocument) -> Vec<LintFinding> {
    lint_with(doc, &LintConfig::default())
}

pub fn lint_with(doc: &AnnotatedDocument, config: &LintConfig) -> Vec<LintFinding> {
    let norm = NormalizationConfig::default();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, a) in doc.annotations.iter().enumerate() {
        groups
            .entry(normalize(a.surface.trim(), &norm).text)
            .or_default()
            .push(i);
    }

    let mut findings = Vec::new();
    for (surface, idx) in &groups {
        let mut types: Vec<EntityType> = Vec::new();
        for &i in idx {
            let t = doc.annotations[i].entity_type;
            if !types.contains(&t) {
                types.push(t);
            }
        }
        if types.len() >= 2 {
            let listed: Vec<&str> = types.iter().map(|t| t.as_str()).collect();
            findings.push(LintFinding {
                kind: LintKind::TypeConflict,
                annotations: idx.clone(),
                detail: format!("\"{surface}\" is typed {}", listed.join(", ")),
            });
        }
        if idx.len() >= 2 {
            findings.push(LintFinding {
                kind: LintKind::RepeatedSurface,
                annotations: idx.clone(),
                detail: format!("\"{surface}\" is annotated {} times", idx.len()),
            });
        }
    }

    let chars: Vec<char> = doc.text.chars().collect();
    for (i, a) in doc.annotations.iter().enumerate() {
        if a.start > chars.len() {
            continue;
        }
        if let Some(cue) = config.cues.iter().find(|c| cue_precedes(&chars[..a.start], c)) {
            findings.push(LintFinding {
                kind: LintKind::SpanSuspect,
                annotations: vec![i],
                detail: format!("preceded by \"{cue}\"; the entity may be \"{cue} {}\"", a.surface),
            });
        }
    }

    findings.sort_by_key(|f| (f.kind, f.annotations[0]));
    findings
}

fn same(a: char, b: char) -> bool {
    (a.is_whitespace() && b.is_whitespace()) || a.to_lowercase().eq(b.to_lowercase())
}

/// `before` ends with `cue`, optionally followed by one whitespace, and the
/// cue starts at a word boundary.
fn cue_precedes(before: &[char], cue: &str) -> bool {
    let cue: Vec<char> = cue.chars().collect();
    if cue.is_empty() {
        return false;
    }
    let mut end = before.len();
    if end > 0 && before[end - 1].is_whitespace() {
        end -= 1;
    }
    if end < cue.len() {
        return false;
    }
    let start = end - cue.len();
    before[start..end].iter().zip(&cue).all(|(&a, &b)| same(a, b))
        && (start == 0 || !is_word_char(before[start - 1]) || !is_word_char(cue[0]))
}

//! Whole-document annotation: segmentation, prefiltering, one model call
//! per passage, parsing, preservation checks and offset merging.

mod lint;
mod prefilter;
mod segment;

use std::path::PathBuf;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lint::{lint_document, lint_with, LintConfig, LintFinding, LintKind};
pub use prefilter::{prefilter, Gazetteer};
pub use segment::{reconstruct, segment, Passage, DEFAULT_MAX_LEN, MIN_MAX_LEN};

use crate::gateway::{Gateway, PromptTemplate};
use crate::inline::{parse_inline_with_warnings, ParseMode};
use crate::preservation::{check_preservation, remap_annotations, Alteration, DEFAULT_MAX_RATIO};
use crate::schema::{validate_document, AnnotatedDocument, Annotation, Provenance};
use crate::text::{char_len, sha256_hex};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("max_len {0} is below the minimum of 200")]
    MaxLenTooSmall(usize),
    #[error("document `{doc_id}` contains '<' at offset {at}; tag markup in source text is not supported")]
    DocumentRefused { doc_id: String, at: usize },
    #[error("I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub max_len: usize,
    pub max_ratio: f64,
    pub gazetteer: Gazetteer,
    pub template: PromptTemplate,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_len: DEFAULT_MAX_LEN,
            max_ratio: DEFAULT_MAX_RATIO,
            gazetteer: Gazetteer::default(),
            template: PromptTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageStatus {
    Annotated,
    AnnotatedWithRemap,
    FailedPreservation,
    ParseError,
    BackendError,
    SkippedPrefilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageReport {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub status: PassageStatus,
    /// Annotations this passage contributed to the document.
    pub annotations: usize,
    /// Model requests made for the passage (2 when the answer was retried).
    pub requests: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alterations: Vec<Alteration>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub passages: usize,
    pub annotated: usize,
    pub annotated_with_remap: usize,
    pub failed_preservation: usize,
    pub parse_error: usize,
    pub backend_error: usize,
    pub skipped_prefilter: usize,
    pub annotations: usize,
}

impl StatusCounts {
    pub fn tally(entries: &[PassageReport]) -> Self {
        let mut c = StatusCounts { passages: entries.len(), ..Default::default() };
        for e in entries {
            c.annotations += e.annotations;
            *match e.status {
                PassageStatus::Annotated => &mut c.annotated,
                PassageStatus::AnnotatedWithRemap => &mut c.annotated_with_remap,
                PassageStatus::FailedPreservation => &mut c.failed_preservation,
                PassageStatus::ParseError => &mut c.parse_error,
                PassageStatus::BackendError => &mut c.backend_error,
                PassageStatus::SkippedPrefilter => &mut c.skipped_prefilter,
            } += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub doc_id: String,
    pub text_sha256: String,
    pub model: String,
    pub passages: Vec<PassageReport>,
    pub counts: StatusCounts,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

struct PassageOutcome {
    report: PassageReport,
    annotations: Vec<Annotation>,
    digest: Option<String>,
}

impl PassageOutcome {
    fn new(p: &Passage, status: PassageStatus) -> Self {
        PassageOutcome {
            report: PassageReport {
                index: p.index,
                start: p.start,
                end: p.end,
                status,
                annotations: 0,
                requests: 0,
                edit_ratio: None,
                alterations: Vec::new(),
                warnings: Vec::new(),
                error: None,
            },
            annotations: Vec::new(),
            digest: None,
        }
    }

    fn accept(mut self, status: PassageStatus, annotations: Vec<Annotation>, offset: usize) -> Self {
        self.report.status = status;
        self.report.annotations = annotations.len();
        self.annotations = annotations
            .into_iter()
            .map(|a| a.shifted(offset as isize))
            .collect();
        self
    }
}

async fn annotate_passage(
    p: &Passage,
    selected: bool,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> PassageOutcome {
    let mut out = PassageOutcome::new(p, PassageStatus::SkippedPrefilter);
    if !selected {
        return out;
    }
    let prompt = match config.template.annotation_prompt(&p.text) {
        Ok(prompt) => prompt,
        Err(e) => {
            out.report.status = PassageStatus::BackendError;
            out.report.error = Some(e.to_string());
            return out;
        }
    };

    // first answer, then one renewed request if the text came back altered
    for variant in 0..2 {
        out.report.requests += 1;
        let completion = match gateway.complete_variant(&prompt, &p.text, variant).await {
            Ok(c) => c,
            Err(e) => {
                out.report.status = PassageStatus::BackendError;
                out.report.error = Some(e.to_string());
                return out;
            }
        };
        out.digest = Some(completion.transcript.prompt_digest.clone());

        let (parsed, warnings) = match parse_inline_with_warnings(&completion.transcript.response, ParseMode::Lenient) {
            Ok(r) => r,
            Err(e) => {
                out.report.status = PassageStatus::ParseError;
                out.report.error = Some(e.to_string());
                return out;
            }
        };
        out.report.warnings = warnings
            .into_iter()
            .map(|w| format!("dropped tag at {}: {}", w.at, w.message))
            .collect();

        let verdict = check_preservation(&p.text, &parsed.plain_text);
        out.report.edit_ratio = Some(verdict.edit_ratio);
        out.report.alterations = verdict.alterations.clone();
        if verdict.is_identical() {
            return out.accept(PassageStatus::Annotated, parsed.annotations, p.start);
        }
        if verdict.edit_ratio <= config.max_ratio {
            let remapped = match remap_annotations(&parsed.annotations, &verdict, &p.text, config.max_ratio) {
                Ok(r) => r,
                Err(e) => {
                    out.report.status = PassageStatus::ParseError;
                    out.report.error = Some(e.to_string());
                    return out;
                }
            };
            for a in &remapped.unmappable {
                out.report.warnings.push(format!(
                    "unmappable annotation {:?} ({}) touches altered text",
                    a.surface, a.entity_type
                ));
            }
            return out.accept(PassageStatus::AnnotatedWithRemap, remapped.remapped, p.start);
        }
        tracing::info!(passage = p.index, ratio = verdict.edit_ratio, variant, "model altered the passage");
    }
    out.report.status = PassageStatus::FailedPreservation;
    out
}

/// Annotates a whole document through `gateway`. Passage failures are
/// recorded in the report; they never affect other passages.
pub async fn annotate_document(
    doc_id: &str,
    text: &str,
    gateway: &Gateway,
    config: &PipelineConfig,
) -> Result<(AnnotatedDocument, PipelineReport), PipelineError> {
    if let Some(byte) = text.find('<') {
        return Err(PipelineError::DocumentRefused {
            doc_id: doc_id.to_string(),
            at: char_len(&text[..byte]),
        });
    }
    let passages = segment(doc_id, text, config.max_len)?;
    let selection = prefilter(&passages, &config.gazetteer);
    let bound = gateway.config().max_in_flight;

    let outcomes: Vec<PassageOutcome> = stream::iter(selection.iter())
        .map(|(p, selected)| annotate_passage(p, *selected, gateway, config))
        .buffered(bound)
        .collect()
        .await;

    let mut annotations = Vec::new();
    let mut entries = Vec::with_capacity(outcomes.len());
    let mut digests = Vec::new();
    for o in outcomes {
        annotations.extend(o.annotations);
        digests.extend(o.digest);
        entries.push(o.report);
    }

    let doc = AnnotatedDocument {
        doc_id: doc_id.to_string(),
        text: text.to_string(),
        annotations,
        provenance: Some(Provenance {
            model: gateway.model().to_string(),
            prompt_digest: sha256_hex(&digests.join("\n")),
            timestamp: Some(gateway.clock().now()),
        }),
    };
    debug_assert!(validate_document(&doc).is_valid());

    let report = PipelineReport {
        doc_id: doc_id.to_string(),
        text_sha256: doc.text_sha256(),
        model: gateway.model().to_string(),
        counts: StatusCounts::tally(&entries),
        passages: entries,
    };
    Ok((doc, report))
}

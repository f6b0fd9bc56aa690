//! Grounding quotations against a corpus.
//!
//! A model asked to retrieve passages may return text that reads like the
//! author but appears nowhere in the book. [`verify_quote`] classifies a
//! claimed quotation as an exact occurrence, a near match (light OCR drift
//! or paraphrase, within a normalized edit-distance threshold) or not found.

mod bitpar;
mod index;
mod normalize;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use index::{build_index, CorpusIndex, IndexedDocument, NGRAM};
pub use normalize::{normalize, NormalizationConfig, Normalized, OffsetMap};
pub use search::{
    edit_budget, verify_quote, window_distance, QuoteMatch, QuoteStatus, QuoteVerdict,
    DEFAULT_THRESHOLD, MAX_REPORTED,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuoteError {
    #[error("document id `{0}` appears twice in the corpus")]
    DuplicateDocId(String),
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("quote is empty after normalization")]
    EmptyQuote,
    #[error("threshold {0} is outside [0, 1)")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionWarning {
    /// Found, but only in documents other than the claimed one.
    WrongAttribution,
    /// The claimed document is not in the corpus.
    UnknownDocument,
}

/// Compares a verdict with the document the quote was attributed to.
pub fn check_attribution(
    index: &CorpusIndex,
    verdict: &QuoteVerdict,
    claimed_doc_id: Option<&str>,
) -> Option<AttributionWarning> {
    let claimed = claimed_doc_id?;
    if index.document(claimed).is_none() {
        return Some(AttributionWarning::UnknownDocument);
    }
    if verdict.matches.is_empty() || verdict.matches.iter().any(|m| m.doc_id == claimed) {
        None
    } else {
        Some(AttributionWarning::WrongAttribution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribution() {
        let idx = build_index(
            [("swann", "Longtemps, je me suis couché de bonne heure."), ("other", "Rien.")],
            NormalizationConfig::default(),
        )
        .unwrap();
        let v = verify_quote(&idx, "je me suis couché de bonne heure", DEFAULT_THRESHOLD).unwrap();
        assert_eq!(check_attribution(&idx, &v, Some("swann")), None);
        assert_eq!(check_attribution(&idx, &v, None), None);
        assert_eq!(
            check_attribution(&idx, &v, Some("other")),
            Some(AttributionWarning::WrongAttribution)
        );
        assert_eq!(
            check_attribution(&idx, &v, Some("nope")),
            Some(AttributionWarning::UnknownDocument)
        );
    }
}

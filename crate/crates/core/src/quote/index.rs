use std::collections::HashSet;

use super::normalize::{normalize, NormalizationConfig, OffsetMap};
use super::QuoteError;

/// Length of the character n-grams in the posting table.
pub const NGRAM: usize = 6;

const BITS: u32 = 21;

/// Packs up to [`NGRAM`] characters, first character in the high bits,
/// missing trailing characters as zero. Keys of all grams sharing a prefix
/// therefore form one contiguous range.
fn pack(chars: &[char]) -> u128 {
    let mut key = 0u128;
    for i in 0..NGRAM {
        let c = chars.get(i).map_or(0, |&c| u32::from(c));
        key = (key << BITS) | u128::from(c);
    }
    key
}

#[derive(Debug, Clone)]
pub struct IndexedDocument {
    pub doc_id: String,
    pub original: String,
    pub normalized: Vec<char>,
    pub map: OffsetMap,
}

/// Normalized documents plus a table of every position's n-gram, sorted by
/// gram. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    pub(crate) config: NormalizationConfig,
    pub(crate) docs: Vec<IndexedDocument>,
    // (document index, normalized position), ordered by the gram starting
    // there; grams near a document's end are short
    pub(crate) postings: Vec<(u32, u32)>,
}

impl CorpusIndex {
    pub fn config(&self) -> &NormalizationConfig {
        &self.config
    }

    pub fn documents(&self) -> &[IndexedDocument] {
        &self.docs
    }

    pub fn document(&self, doc_id: &str) -> Option<&IndexedDocument> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    fn key_at(&self, (doc, pos): (u32, u32)) -> u128 {
        let text = &self.docs[doc as usize].normalized;
        let pos = pos as usize;
        pack(&text[pos..text.len().min(pos + NGRAM)])
    }

    /// Positions whose text starts with `prefix` (1 to [`NGRAM`] chars).
    /// May include a few extra positions when the text contains NUL; callers
    /// verify.
    pub(crate) fn positions_with_prefix(&self, prefix: &[char]) -> &[(u32, u32)] {
        debug_assert!(!prefix.is_empty() && prefix.len() <= NGRAM);
        let free = BITS * (NGRAM - prefix.len()) as u32;
        let lo = pack(prefix);
        let hi = lo | ((1u128 << free) - 1);
        let a = self.postings.partition_point(|&p| self.key_at(p) < lo);
        let b = self.postings.partition_point(|&p| self.key_at(p) <= hi);
        &self.postings[a..b]
    }
}

/// Normalizes every document and builds the posting table. Documents keep
/// the order in which they were supplied.
pub fn build_index<I, K, V>(corpus: I, config: NormalizationConfig) -> Result<CorpusIndex, QuoteError>
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<String>,
{
    let mut seen = HashSet::new();
    let mut docs = Vec::new();

    for (doc_id, text) in corpus {
        let doc_id = doc_id.into();
        let original = text.into();
        if !seen.insert(doc_id.clone()) {
            return Err(QuoteError::DuplicateDocId(doc_id));
        }
        if original.is_empty() {
            return Err(QuoteError::EmptyDocument(doc_id));
        }
        let n = normalize(&original, &config);
        docs.push(IndexedDocument {
            doc_id,
            original,
            normalized: n.text.chars().collect(),
            map: n.map,
        });
    }

    let mut index = CorpusIndex {
        config,
        docs,
        postings: Vec::new(),
    };
    let mut postings: Vec<(u32, u32)> = index
        .docs
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.normalized.len() as u32).map(move |p| (d as u32, p)))
        .collect();
    postings.sort_unstable_by_key(|&p| (index.key_at(p), p));
    index.postings = postings;
    Ok(index)
}

//! Exact and approximate quote lookup.
//!
//! A quote is first looked up verbatim. Failing that, the quote is cut into
//! pieces, one more than the edit budget; regions of the corpus holding a
//! piece on the right diagonal are scanned with a bit-parallel edit
//! distance, and the ends it flags are scored exactly.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::bitpar::BitPattern;
use super::index::{CorpusIndex, IndexedDocument, NGRAM};
use super::normalize::normalize;
use super::QuoteError;

/// Default acceptance threshold on normalized edit distance.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Upper bound on the number of matches reported in one verdict.
pub const MAX_REPORTED: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteStatus {
    Exact,
    Near,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteMatch {
    pub doc_id: String,
    /// Code-point offsets into the original document text.
    pub start: usize,
    pub end: usize,
    pub normalized_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteVerdict {
    pub status: QuoteStatus,
    /// Best match first.
    pub matches: Vec<QuoteMatch>,
}

impl QuoteVerdict {
    pub fn best_distance(&self) -> Option<f64> {
        self.matches.first().map(|m| m.normalized_distance)
    }

    fn not_found() -> Self {
        QuoteVerdict {
            status: QuoteStatus::NotFound,
            matches: Vec::new(),
        }
    }
}

/// Largest edit count any window can have while staying within `threshold`
/// of an `m`-character quote. Windows are at most `m + edits` long, so
/// `edits <= threshold * (m + edits)`.
pub fn edit_budget(m: usize, threshold: f64) -> usize {
    ((threshold * m as f64) / (1.0 - threshold) + 1e-9).floor() as usize
}

/// Normalized distance of a window of length `window_len` at edit distance
/// `edits` from an `m`-character quote.
pub fn window_distance(edits: usize, m: usize, window_len: usize) -> f64 {
    edits as f64 / m.max(window_len).max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    doc: usize,
    start: usize,
    end: usize,
    edits: usize,
    denom: usize,
}

impl Window {
    fn cmp_quality(&self, other: &Window) -> Ordering {
        (self.edits * other.denom)
            .cmp(&(other.edits * self.denom))
            .then(self.doc.cmp(&other.doc))
            .then(self.start.cmp(&other.start))
            .then(self.end.cmp(&other.end))
    }
}

/// Looks `quote` up in `index`.
///
/// `threshold` bounds the normalized edit distance of near matches and must
/// lie in `[0, 1)`. Surrounding whitespace in the normalized quote is
/// ignored.
pub fn verify_quote(
    index: &CorpusIndex,
    quote: &str,
    threshold: f64,
) -> Result<QuoteVerdict, QuoteError> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(QuoteError::InvalidThreshold(threshold));
    }
    let normalized = normalize(quote, &index.config);
    let q: Vec<char> = normalized.text.trim_matches(' ').chars().collect();
    if q.is_empty() {
        return Err(QuoteError::EmptyQuote);
    }

    let exact = find_exact(index, &q);
    if !exact.is_empty() {
        let matches = exact
            .into_iter()
            .map(|(doc, start)| to_match(&index.docs[doc], start, start + q.len(), 0.0))
            .collect();
        return Ok(QuoteVerdict {
            status: QuoteStatus::Exact,
            matches,
        });
    }

    let budget = edit_budget(q.len(), threshold);
    if budget == 0 {
        return Ok(QuoteVerdict::not_found());
    }

    let pattern = BitPattern::new(&q);
    let mut windows = Vec::new();
    for (doc_idx, ranges) in candidate_starts(index, &q, budget).into_iter().enumerate() {
        let doc = &index.docs[doc_idx].normalized;
        let first = windows.len();
        for range in ranges {
            windows_in_region(doc, &pattern, &q, range, budget, threshold, &mut windows);
        }
        for w in &mut windows[first..] {
            w.doc = doc_idx;
        }
    }
    if windows.is_empty() {
        return Ok(QuoteVerdict::not_found());
    }

    windows.sort_by(Window::cmp_quality);
    let mut kept: Vec<Window> = Vec::new();
    for w in windows {
        let clashes = kept
            .iter()
            .any(|k| k.doc == w.doc && k.start < w.end && w.start < k.end);
        if !clashes {
            kept.push(w);
        }
        if kept.len() == MAX_REPORTED {
            break;
        }
    }
    let matches = kept
        .into_iter()
        .map(|w| {
            let d = window_distance(w.edits, q.len(), w.end - w.start);
            to_match(&index.docs[w.doc], w.start, w.end, d)
        })
        .collect();
    Ok(QuoteVerdict {
        status: QuoteStatus::Near,
        matches,
    })
}

fn to_match(doc: &IndexedDocument, start: usize, end: usize, distance: f64) -> QuoteMatch {
    let (s, e) = doc.map.to_original(start, end);
    QuoteMatch {
        doc_id: doc.doc_id.clone(),
        start: s,
        end: e,
        normalized_distance: distance,
    }
}

/// Every verbatim occurrence as (document index, normalized start).
fn find_exact(index: &CorpusIndex, q: &[char]) -> Vec<(usize, usize)> {
    let mut hits: Vec<(usize, usize)> = index
        .positions_with_prefix(&q[..q.len().min(NGRAM)])
        .iter()
        .map(|&(doc, pos)| (doc as usize, pos as usize))
        .filter(|&(doc, pos)| index.docs[doc].normalized.get(pos..pos + q.len()) == Some(q))
        .collect();
    hits.sort_unstable();
    hits
}

/// Per document, merged inclusive ranges of window start positions that can
/// host a window within `budget` edits of `q`.
///
/// Cut `q` into `budget + 1` disjoint pieces: a window within `budget` edits
/// leaves at least one piece untouched, so that piece occurs verbatim in the
/// window, displaced from its offset in `q` by at most `budget`. Pieces are
/// looked up as n-gram prefixes. When pieces would be empty every start is
/// kept.
fn candidate_starts(index: &CorpusIndex, q: &[char], budget: usize) -> Vec<Vec<(usize, usize)>> {
    let mut per_doc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); index.docs.len()];
    let stride = q.len() / (budget + 1);
    if stride == 0 {
        for (doc, d) in index.docs.iter().enumerate() {
            per_doc[doc].push((0, d.normalized.len() - 1));
        }
        return per_doc;
    }

    let piece_len = stride.min(NGRAM);
    for offset in (0..=budget).map(|i| i * stride) {
        let piece = &q[offset..offset + piece_len];
        for &(doc, pos) in index.positions_with_prefix(piece) {
            let doc = doc as usize;
            let len = index.docs[doc].normalized.len();
            let diagonal = pos as isize - offset as isize;
            let lo = diagonal - budget as isize;
            let hi = diagonal + budget as isize;
            if hi < 0 || lo >= len as isize {
                continue;
            }
            per_doc[doc].push((lo.max(0) as usize, (hi as usize).min(len - 1)));
        }
    }

    for ranges in &mut per_doc {
        ranges.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
        for &(lo, hi) in ranges.iter() {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        *ranges = merged;
    }
    per_doc
}

const INF: usize = usize::MAX / 4;

/// Windows within `threshold` of `q` that start at or after `lo` and end
/// before `hi + m + budget`, the best one for each end position.
///
/// A bit-parallel pass finds the ends that admit a window of at most
/// `budget` edits; each such end is then scanned backwards to score every
/// start. Every window starting in `[lo, hi]` is covered.
fn windows_in_region(
    doc: &[char],
    pattern: &BitPattern,
    q: &[char],
    (lo, hi): (usize, usize),
    budget: usize,
    threshold: f64,
    out: &mut Vec<Window>,
) {
    let text_end = doc.len().min(hi + q.len() + budget);
    pattern.scan(&doc[lo..text_end], budget, |j, _| {
        if let Some(w) = best_ending_at(doc, q, lo + j, lo, budget, threshold) {
            out.push(w);
        }
    });
}

/// Best window `doc[start..end]` with `start >= lo`.
fn best_ending_at(doc: &[char], q: &[char], end: usize, lo: usize, k: usize, threshold: f64) -> Option<Window> {
    let m = q.len();
    let max_len = (m + k).min(end - lo);
    let min_len = m.saturating_sub(k).max(1);
    if min_len > max_len {
        return None;
    }

    // rows walk the quote backwards, columns the text backwards from `end`
    let width = max_len + 1;
    let mut prev: Vec<usize> = (0..width).map(|l| if l <= k { l } else { INF }).collect();
    let mut cur = vec![INF; width];
    for i in 1..=m {
        let qc = q[m - i];
        let l_lo = i.saturating_sub(k);
        let l_hi = (i + k).min(max_len);
        cur.iter_mut().for_each(|c| *c = INF);
        if l_lo == 0 {
            cur[0] = i;
        }
        for l in l_lo.max(1)..=l_hi {
            let sub = prev[l - 1] + usize::from(qc != doc[end - l]);
            cur[l] = sub
                .min(prev[l].saturating_add(1))
                .min(cur[l - 1].saturating_add(1))
                .min(INF);
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut best: Option<Window> = None;
    for (len, &edits) in prev.iter().enumerate().take(max_len + 1).skip(min_len) {
        if edits > k || window_distance(edits, m, len) > threshold {
            continue;
        }
        let w = Window {
            doc: 0,
            start: end - len,
            end,
            edits,
            denom: m.max(len),
        };
        if best.is_none_or(|b| w.cmp_quality(&b) == Ordering::Less) {
            best = Some(w);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::{build_index, NormalizationConfig};
    use super::*;

    fn index(docs: &[(&str, &str)]) -> CorpusIndex {
        build_index(docs.iter().copied(), NormalizationConfig::default()).unwrap()
    }

    #[test]
    fn budget_bounds() {
        assert_eq!(edit_budget(60, 0.2), 15);
        assert_eq!(edit_budget(4, 0.2), 1);
        assert_eq!(edit_budget(3, 0.2), 0);
        assert_eq!(edit_budget(10, 0.0), 0);
    }

    #[test]
    fn exact_substring_with_original_offsets() {
        let idx = index(&[("a", "Les géographes, les archéologues nous conduisent bien dans l’île de Calypso.")]);
        let v = verify_quote(&idx, "l'île de calypso", 0.2).unwrap();
        assert_eq!(v.status, QuoteStatus::Exact);
        assert_eq!(v.matches.len(), 1);
        let m = &v.matches[0];
        let orig: String = idx.docs[0].original.chars().skip(m.start).take(m.end - m.start).collect();
        assert_eq!(orig, "l’île de Calypso");
    }

    #[test]
    fn single_character_document() {
        let idx = index(&[("x", "Z")]);
        assert_eq!(verify_quote(&idx, "z", 0.2).unwrap().status, QuoteStatus::Exact);
    }

    #[test]
    fn empty_corpus_finds_nothing() {
        let idx = index(&[]);
        let v = verify_quote(&idx, "Seulement Calypso n'est plus qu'une femme", 0.2).unwrap();
        assert_eq!(v, QuoteVerdict::not_found());
    }

    #[test]
    fn near_match_after_substitution() {
        let sentence = "Seulement Calypso n’est plus qu’une femme, Minos, qu’un roi sans rien de divin.";
        let idx = index(&[("p", sentence)]);
        let v = verify_quote(&idx, "Seulement Calypso n'est plus qu'une reine, Minos, qu'un roi sans rien de divin.", 0.2).unwrap();
        assert_eq!(v.status, QuoteStatus::Near);
        assert!(v.best_distance().unwrap() > 0.0 && v.best_distance().unwrap() <= 0.2);
    }

    #[test]
    fn rejects_bad_input() {
        let idx = index(&[("p", "texte")]);
        assert!(matches!(verify_quote(&idx, "  \u{00A0} ", 0.2), Err(QuoteError::EmptyQuote)));
        assert!(matches!(verify_quote(&idx, "texte", 1.0), Err(QuoteError::InvalidThreshold(_))));
        assert!(matches!(verify_quote(&idx, "texte", -0.1), Err(QuoteError::InvalidThreshold(_))));
    }

    #[test]
    fn duplicate_ids_are_refused() {
        assert!(matches!(
            build_index([("a", "x"), ("a", "y")], NormalizationConfig::default()),
            Err(QuoteError::DuplicateDocId(id)) if id == "a"
        ));
    }

    #[test]
    fn short_quote_near_match_by_scan() {
        let idx = index(&[("p", "le dieu Zeus tonne")]);
        let v = verify_quote(&idx, "Zeas", 0.25).unwrap();
        assert_eq!(v.status, QuoteStatus::Near);
        assert_eq!(v.best_distance(), Some(0.25));
    }
}

//! Checks that a model gave back the passage it was asked to annotate.
//!
//! The model's plain text (its output with the tags stripped) is aligned to
//! the original at code-point level with a longest-common-subsequence
//! alignment. Differences are grouped into hunks, pure insertions and
//! deletions are slid to a canonical position, and hunks that cut through a
//! word are widened to the word's edges. The edit ratio is computed
//! independently, as Levenshtein distance over the longer length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::levenshtein;
use crate::schema::Annotation;
use crate::text::{is_word_char, CodePoints};

/// Remapping gate used by the pipeline unless configured otherwise.
pub const DEFAULT_MAX_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlterationKind {
    Insertion,
    Deletion,
    Substitution,
}

/// One localized difference. `orig_*` offsets index the original, `new_*`
/// offsets the model's plain text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alteration {
    pub kind: AlterationKind,
    pub orig_start: usize,
    pub orig_end: usize,
    pub new_start: usize,
    pub new_end: usize,
    pub orig_text: String,
    pub new_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreservationStatus {
    Identical,
    Altered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreservationVerdict {
    pub status: PreservationStatus,
    pub alterations: Vec<Alteration>,
    pub edit_ratio: f64,
}

impl PreservationVerdict {
    pub fn is_identical(&self) -> bool {
        self.status == PreservationStatus::Identical
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreservationError {
    #[error("annotation [{start}, {end}) exceeds model text length {len}")]
    InconsistentInput { start: usize, end: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hunk {
    os: usize,
    oe: usize,
    ns: usize,
    ne: usize,
}

/// Compares `original` with the model's tag-stripped output.
pub fn check_preservation(original: &str, model_plain: &str) -> PreservationVerdict {
    let a: Vec<char> = original.chars().collect();
    let b: Vec<char> = model_plain.chars().collect();
    if a == b {
        return PreservationVerdict {
            status: PreservationStatus::Identical,
            alterations: Vec::new(),
            edit_ratio: 0.0,
        };
    }

    let hunks = canonical_hunks(&a, &b);
    let alterations = hunks
        .iter()
        .map(|h| {
            let orig_text: String = a[h.os..h.oe].iter().collect();
            let new_text: String = b[h.ns..h.ne].iter().collect();
            let kind = match (orig_text.is_empty(), new_text.is_empty()) {
                (true, _) => AlterationKind::Insertion,
                (_, true) => AlterationKind::Deletion,
                _ => AlterationKind::Substitution,
            };
            Alteration {
                kind,
                orig_start: h.os,
                orig_end: h.oe,
                new_start: h.ns,
                new_end: h.ne,
                orig_text,
                new_text,
            }
        })
        .collect();

    let denom = a.len().max(b.len()).max(1);
    PreservationVerdict {
        status: PreservationStatus::Altered,
        alterations,
        edit_ratio: levenshtein(&a, &b) as f64 / denom as f64,
    }
}

fn canonical_hunks(a: &[char], b: &[char]) -> Vec<Hunk> {
    let mut hunks = lcs_hunks(a, b);
    slide_pure_hunks(&mut hunks, a, b);
    merge_touching(&mut hunks);
    loop {
        let before = hunks.clone();
        widen_to_words(&mut hunks, a, b);
        merge_touching(&mut hunks);
        if hunks == before {
            return hunks;
        }
    }
}

/// Maximal runs of non-matching positions in an LCS alignment.
fn lcs_hunks(a: &[char], b: &[char]) -> Vec<Hunk> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let ma = &a[prefix..a.len() - suffix];
    let mb = &b[prefix..b.len() - suffix];
    let (n, m) = (ma.len(), mb.len());

    // suffix LCS lengths, row-major (n + 1) x (m + 1)
    let width = m + 1;
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if ma[i] == mb[j] {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }

    let mut hunks = Vec::new();
    let mut open: Option<Hunk> = None;
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && ma[i] == mb[j] {
            if let Some(h) = open.take() {
                hunks.push(h);
            }
            i += 1;
            j += 1;
            continue;
        }
        let h = open.get_or_insert(Hunk {
            os: prefix + i,
            oe: prefix + i,
            ns: prefix + j,
            ne: prefix + j,
        });
        if j == m || (i < n && lcs[(i + 1) * width + j] >= lcs[i * width + j + 1]) {
            i += 1;
            h.oe = prefix + i;
        } else {
            j += 1;
            h.ne = prefix + j;
        }
    }
    hunks.extend(open);
    hunks
}

/// Places each pure insertion or deletion at its best position within the
/// surrounding equal runs. Equivalent alignments then come out the same,
/// hunks sit on word boundaries where the text allows, and a separator
/// travels with the word it follows.
fn slide_pure_hunks(hunks: &mut [Hunk], a: &[char], b: &[char]) {
    for idx in 0..hunks.len() {
        let lower = if idx == 0 { 0 } else { hunks[idx - 1].oe };
        let upper = hunks.get(idx + 1).map_or(a.len(), |n| n.os);
        let h = hunks[idx];
        let insertion = h.os == h.oe;
        if !insertion && h.ns != h.ne {
            continue;
        }
        // the moving content and the text it slides through, as one sequence
        let (seq, s, e) = if insertion { (b, h.ns, h.ne) } else { (a, h.os, h.oe) };
        let ctx_limit_lo = if insertion { h.ns - (h.os - lower) } else { lower };
        let ctx_limit_hi = if insertion { h.ne + (upper - h.oe) } else { upper };

        let mut left = 0usize;
        while s - left > ctx_limit_lo && seq[s - left - 1] == seq[e - left - 1] {
            left += 1;
        }
        let mut right = 0usize;
        while e + right < ctx_limit_hi && seq[e + right] == seq[s + right] {
            right += 1;
        }

        let score = |shift: isize| -> u32 {
            let s = (s as isize + shift) as usize;
            let e = (e as isize + shift) as usize;
            let before = s.checked_sub(1).map(|i| seq[i]);
            let after = seq.get(e).copied();
            let first = seq[s];
            let last = seq[e - 1];
            let start_ok = before.is_none_or(|c| !is_word_char(c) || !is_word_char(first));
            let end_ok = after.is_none_or(|c| !is_word_char(c) || !is_word_char(last));
            let touches = (s == ctx_limit_lo && idx > 0) || (e == ctx_limit_hi && idx + 1 < hunks.len());
            2 * u32::from(start_ok)
                + 2 * u32::from(end_ok)
                + u32::from(!first.is_whitespace())
                + u32::from(touches)
        };
        let mut best = -(left as isize);
        for shift in -(left as isize)..=(right as isize) {
            if score(shift) >= score(best) {
                best = shift;
            }
        }
        let h = &mut hunks[idx];
        h.os = (h.os as isize + best) as usize;
        h.oe = (h.oe as isize + best) as usize;
        h.ns = (h.ns as isize + best) as usize;
        h.ne = (h.ne as isize + best) as usize;
    }
}

fn merge_touching(hunks: &mut Vec<Hunk>) {
    let mut merged: Vec<Hunk> = Vec::with_capacity(hunks.len());
    for h in hunks.drain(..) {
        match merged.last_mut() {
            Some(last) if h.os <= last.oe => {
                last.oe = last.oe.max(h.oe);
                last.ne = last.ne.max(h.ne);
            }
            _ => merged.push(h),
        }
    }
    *hunks = merged;
}

fn widen_to_words(hunks: &mut [Hunk], a: &[char], b: &[char]) {
    let word_at = |side: &[char], idx: Option<usize>| {
        idx.and_then(|i| side.get(i)).is_some_and(|&c| is_word_char(c))
    };
    for idx in 0..hunks.len() {
        let lower = if idx == 0 { 0 } else { hunks[idx - 1].oe };
        let upper = hunks.get(idx + 1).map_or(a.len(), |n| n.os);
        let h = &mut hunks[idx];
        loop {
            let first_is_word = (h.oe > h.os && word_at(a, Some(h.os)))
                || (h.ne > h.ns && word_at(b, Some(h.ns)));
            if h.os > lower && word_at(a, h.os.checked_sub(1)) && first_is_word {
                h.os -= 1;
                h.ns -= 1;
            } else {
                break;
            }
        }
        loop {
            let last_is_word = (h.oe > h.os && word_at(a, h.oe.checked_sub(1)))
                || (h.ne > h.ns && word_at(b, h.ne.checked_sub(1)));
            if h.oe < upper && word_at(a, Some(h.oe)) && last_is_word {
                h.oe += 1;
                h.ne += 1;
            } else {
                break;
            }
        }
    }
}

/// Annotations sorted into those that survive on the original and those
/// that touch altered text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remapped {
    pub remapped: Vec<Annotation>,
    pub unmappable: Vec<Annotation>,
}

/// Carries annotations made on the model's text back onto `original`.
///
/// An annotation survives only when its span lies entirely in unaltered
/// text. When the verdict's edit ratio exceeds `max_ratio` nothing
/// survives.
pub fn remap_annotations(
    annotations: &[Annotation],
    verdict: &PreservationVerdict,
    original: &str,
    max_ratio: f64,
) -> Result<Remapped, PreservationError> {
    let orig = CodePoints::new(original);
    let delta_total: isize = verdict
        .alterations
        .iter()
        .map(|h| (h.new_end - h.new_start) as isize - (h.orig_end - h.orig_start) as isize)
        .sum();
    let model_len = (orig.len() as isize + delta_total).max(0) as usize;
    if let Some(a) = annotations.iter().find(|a| a.end > model_len || a.start > a.end) {
        return Err(PreservationError::InconsistentInput {
            start: a.start,
            end: a.end,
            len: model_len,
        });
    }

    let mut out = Remapped::default();
    if verdict.edit_ratio > max_ratio {
        out.unmappable = annotations.to_vec();
        return Ok(out);
    }

    for ann in annotations {
        let touches = verdict.alterations.iter().any(|h| {
            if h.new_start == h.new_end {
                ann.start < h.new_start && h.new_start < ann.end
            } else {
                ann.start < h.new_end && h.new_start < ann.end
            }
        });
        if touches {
            out.unmappable.push(ann.clone());
            continue;
        }
        let shift: isize = verdict
            .alterations
            .iter()
            .filter(|h| h.new_end <= ann.start)
            .map(|h| (h.new_end - h.new_start) as isize - (h.orig_end - h.orig_start) as isize)
            .sum();
        let moved = ann.shifted(-shift);
        if orig.slice(moved.start, moved.end) == Some(ann.surface.as_str()) {
            out.remapped.push(moved);
        } else {
            out.unmappable.push(ann.clone());
        }
    }
    Ok(out)
}

/// Rebuilds the model text by applying `alterations` to `original`.
pub fn apply_alterations(original: &str, alterations: &[Alteration]) -> String {
    let orig = CodePoints::new(original);
    let mut out = String::with_capacity(original.len());
    let mut pos = 0;
    for alt in alterations {
        out.push_str(orig.slice(pos, alt.orig_start).unwrap_or_default());
        out.push_str(&alt.new_text);
        pos = alt.orig_end;
    }
    out.push_str(orig.slice(pos, orig.len()).unwrap_or_default());
    out
}

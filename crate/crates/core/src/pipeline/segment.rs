use serde::{Deserialize, Serialize};

use super::PipelineError;

pub const DEFAULT_MAX_LEN: usize = 1200;
pub const MIN_MAX_LEN: usize = 200;

/// A slice of a document sent to the model on its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Splits `text` into paragraphs at blank lines, and paragraphs longer than
/// `max_len` code points at sentence ends. Passages never start or end with
/// whitespace; everything between them is whitespace.
pub fn segment(doc_id: &str, text: &str, max_len: usize) -> Result<Vec<Passage>, PipelineError> {
    if max_len < MIN_MAX_LEN {
        return Err(PipelineError::MaxLenTooSmall(max_len));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut ranges = Vec::new();
    for (s, e) in paragraphs(&chars) {
        if e - s <= max_len {
            ranges.push((s, e));
        } else {
            pack(&chars, s, e, max_len, &mut ranges);
        }
    }
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| Passage {
            doc_id: doc_id.to_string(),
            index,
            start,
            end,
            text: chars[start..end].iter().collect(),
        })
        .collect())
}

/// Trimmed ranges of runs of non-blank lines.
fn paragraphs(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut para: Option<(usize, usize)> = None;
    let mut line_start = 0;
    while line_start <= chars.len() {
        let line_end = chars[line_start..]
            .iter()
            .position(|&c| c == '\n')
            .map_or(chars.len(), |p| line_start + p);
        let line = &chars[line_start..line_end];
        match line.iter().position(|c| !c.is_whitespace()) {
            Some(first) => {
                let last = line.iter().rposition(|c| !c.is_whitespace()).unwrap();
                let (s, e) = (line_start + first, line_start + last + 1);
                para = Some(para.map_or((s, e), |(ps, _)| (ps, e)));
            }
            None => out.extend(para.take()),
        }
        line_start = line_end + 1;
    }
    out.extend(para);
    out
}

fn is_sentence_start(c: char) -> bool {
    c.is_uppercase() || c == '«'
}

/// Start offsets of the sentences of `chars[s..e]` after the first.
fn sentence_starts(chars: &[char], s: usize, e: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut i = s;
    while i < e {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut j = i + 1;
            while j < e && chars[j].is_whitespace() {
                j += 1;
            }
            if j > i + 1 && j < e && is_sentence_start(chars[j]) {
                starts.push(j);
                i = j;
                continue;
            }
        }
        i += 1;
    }
    starts
}

fn trim(chars: &[char], mut s: usize, mut e: usize) -> Option<(usize, usize)> {
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    (s < e).then_some((s, e))
}

/// Greedy packing of whole sentences into passages of at most `max_len`;
/// a sentence that alone is too long is cut at whitespace.
fn pack(chars: &[char], s: usize, e: usize, max_len: usize, out: &mut Vec<(usize, usize)>) {
    let mut bounds = vec![s];
    bounds.extend(sentence_starts(chars, s, e));
    bounds.push(e);

    let mut cur: Option<(usize, usize)> = None;
    for w in bounds.windows(2) {
        let Some((ss, se)) = trim(chars, w[0], w[1]) else { continue };
        match cur {
            Some((cs, _)) if se - cs <= max_len => cur = Some((cs, se)),
            _ => {
                out.extend(cur.take());
                if se - ss <= max_len {
                    cur = Some((ss, se));
                } else {
                    hard_split(chars, ss, se, max_len, out);
                }
            }
        }
    }
    out.extend(cur);
}

fn hard_split(chars: &[char], mut s: usize, e: usize, max_len: usize, out: &mut Vec<(usize, usize)>) {
    while e - s > max_len {
        let limit = s + max_len;
        // cut at the last whitespace that keeps the piece within bounds
        let cut = (s + 1..=limit)
            .rev()
            .find(|&i| chars[i].is_whitespace())
            .unwrap_or(limit);
        if let Some(r) = trim(chars, s, cut) {
            out.push(r);
        }
        s = cut;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
    }
    if let Some(r) = trim(chars, s, e) {
        out.push(r);
    }
}

/// Passages plus the separators between them rebuild the document.
pub fn reconstruct(text: &str, passages: &[Passage]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for p in passages {
        out.extend(&chars[pos..p.start]);
        out.push_str(&p.text);
        pos = p.end;
    }
    out.extend(&chars[pos..]);
    out
}

//! Reference answers for quote lookup, computed without the n-gram index.
//!
//! `brute_force` scores every window of every document. `oracle` returns the
//! same answer faster: a window within the threshold has at most
//! `floor(t*m/(1-t))` edits, so a bit-parallel semi-global pass first finds
//! every end position that admits such a window, and each of those ends is
//! then scored against every possible start.

#![allow(dead_code)]

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Exact,
    Near,
    NotFound,
}

/// Status plus the best window's (edits, max(m, len)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Answer {
    pub status: Status,
    pub best: Option<(usize, usize)>,
}

impl Answer {
    pub fn distance(&self) -> Option<f64> {
        self.best.map(|(e, d)| e as f64 / d as f64)
    }
}

fn better(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

fn finish(best: Option<(usize, usize)>, threshold: f64) -> Answer {
    match best {
        Some((0, d)) => Answer { status: Status::Exact, best: Some((0, d)) },
        Some((e, d)) if e as f64 / d as f64 <= threshold => Answer { status: Status::Near, best: Some((e, d)) },
        _ => Answer { status: Status::NotFound, best: None },
    }
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            cur[j] = (prev[j - 1] + usize::from(a[i - 1] != b[j - 1]))
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Every window, every document. Cubic; small inputs only.
pub fn brute_force(docs: &[Vec<char>], q: &[char], threshold: f64) -> Answer {
    let m = q.len();
    let mut best: Option<(usize, usize)> = None;
    for d in docs {
        for s in 0..d.len() {
            for e in s + 1..=d.len() {
                let cand = (levenshtein(q, &d[s..e]), m.max(e - s));
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    finish(best, threshold)
}

/// `D[e]` = least edit distance between `q` and any window ending at `e`,
/// for `e` in `0..=t.len()` (Myers' bit-vector algorithm, blocked).
pub fn semi_global_scores(q: &[char], t: &[char]) -> Vec<usize> {
    const HIGH: u64 = 1 << 63;
    let m = q.len();
    assert!(m > 0);
    let blocks = m.div_ceil(64);
    let last_bit = (m - 1) % 64;

    let mut peq: HashMap<char, Vec<u64>> = HashMap::new();
    for (i, &c) in q.iter().enumerate() {
        peq.entry(c).or_insert_with(|| vec![0; blocks])[i / 64] |= 1 << (i % 64);
    }
    let zero = vec![0u64; blocks];

    let mut pv = vec![u64::MAX; blocks];
    let mut mv = vec![0u64; blocks];
    let mut score = m;
    let mut out = Vec::with_capacity(t.len() + 1);
    out.push(score);
    for &c in t {
        let eqs = peq.get(&c).unwrap_or(&zero);
        let mut hin: i32 = 0;
        for b in 0..blocks {
            let (p, n) = (pv[b], mv[b]);
            let mut eq = eqs[b];
            let hin_neg = u64::from(hin < 0);
            let xv = eq | n;
            eq |= hin_neg;
            let xh = ((eq & p).wrapping_add(p) ^ p) | eq;
            let mut ph = n | !(xh | p);
            let mut mh = p & xh;
            if b == blocks - 1 {
                score = score + ((ph >> last_bit) & 1) as usize - ((mh >> last_bit) & 1) as usize;
            }
            let hout = ((ph & HIGH) >> 63) as i32 - ((mh & HIGH) >> 63) as i32;
            ph <<= 1;
            mh <<= 1;
            mh |= hin_neg;
            ph |= u64::from(hin > 0);
            pv[b] = mh | !(xv | ph);
            mv[b] = ph & xv;
            hin = hout;
        }
        out.push(score);
    }
    out
}

/// Same as [`brute_force`], pruned to ends that can host a window within
/// the edit budget.
pub fn oracle(docs: &[Vec<char>], q: &[char], threshold: f64) -> Answer {
    let m = q.len();
    let k = ((threshold * m as f64) / (1.0 - threshold) + 1e-9).floor() as usize;
    let mut best: Option<(usize, usize)> = None;
    for d in docs {
        let scores = semi_global_scores(q, d);
        for (e, &s) in scores.iter().enumerate().skip(1) {
            if s > k {
                continue;
            }
            // columns walk the text backwards from e, rows the quote backwards
            let mut col: Vec<usize> = (0..=m).collect();
            let mut next = vec![0; m + 1];
            for j in 1..=e.min(m + k) {
                next[0] = j;
                let tc = d[e - j];
                for i in 1..=m {
                    next[i] = (col[i - 1] + usize::from(q[m - i] != tc))
                        .min(col[i] + 1)
                        .min(next[i - 1] + 1);
                }
                std::mem::swap(&mut col, &mut next);
                let cand = (col[m], m.max(j));
                if best.is_none_or(|b| better(cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    finish(best, threshold)
}

//! Myers' bit-vector edit distance, blocked for patterns longer than 64.

use std::collections::HashMap;

const HIGH: u64 = 1 << 63;

/// Match masks of a pattern, one bit per pattern position.
pub(crate) struct BitPattern {
    m: usize,
    blocks: usize,
    // direct table for code points below 256, the bulk of French text
    latin: Vec<u64>,
    other: HashMap<char, Vec<u64>>,
    zero: Vec<u64>,
}

impl BitPattern {
    pub(crate) fn new(pattern: &[char]) -> Self {
        let m = pattern.len();
        let blocks = m.div_ceil(64).max(1);
        let mut latin = vec![0u64; 256 * blocks];
        let mut other: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in pattern.iter().enumerate() {
            let bit = 1u64 << (i % 64);
            if (c as u32) < 256 {
                latin[c as usize * blocks + i / 64] |= bit;
            } else {
                other.entry(c).or_insert_with(|| vec![0; blocks])[i / 64] |= bit;
            }
        }
        BitPattern {
            m,
            blocks,
            latin,
            other,
            zero: vec![0; blocks],
        }
    }

    fn masks(&self, c: char) -> &[u64] {
        if (c as u32) < 256 {
            let at = c as usize * self.blocks;
            &self.latin[at..at + self.blocks]
        } else {
            self.other.get(&c).map_or(&self.zero, |v| v.as_slice())
        }
    }

    /// Calls `f(end, edits)` for each end offset `1..=text.len()` where some
    /// window `text[s..end]` is within `k` edits of the pattern; `edits` is
    /// the least such distance.
    pub(crate) fn scan(&self, text: &[char], k: usize, mut f: impl FnMut(usize, usize)) {
        if self.m == 0 {
            return;
        }
        let last_bit = (self.m - 1) % 64;
        let mut pv = vec![u64::MAX; self.blocks];
        let mut mv = vec![0u64; self.blocks];
        let mut score = self.m;
        for (j, &c) in text.iter().enumerate() {
            let masks = self.masks(c);
            let mut hin: i32 = 0;
            for b in 0..self.blocks {
                let (p, n) = (pv[b], mv[b]);
                let hin_neg = u64::from(hin < 0);
                let xv = masks[b] | n;
                let eq = masks[b] | hin_neg;
                let xh = ((eq & p).wrapping_add(p) ^ p) | eq;
                let mut ph = n | !(xh | p);
                let mut mh = p & xh;
                if b + 1 == self.blocks {
                    score = score + ((ph >> last_bit) & 1) as usize - ((mh >> last_bit) & 1) as usize;
                }
                let hout = ((ph & HIGH) >> 63) as i32 - ((mh & HIGH) >> 63) as i32;
                ph = (ph << 1) | u64::from(hin > 0);
                mh = (mh << 1) | hin_neg;
                pv[b] = mh | !(xv | ph);
                mv[b] = ph & xv;
                hin = hout;
            }
            if score <= k {
                f(j + 1, score);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(q: &[char], t: &[char]) -> Vec<usize> {
        let mut prev: Vec<usize> = (0..=q.len()).collect();
        let mut out = Vec::new();
        for &c in t {
            let mut cur = vec![0; q.len() + 1];
            for i in 1..=q.len() {
                cur[i] = (prev[i - 1] + usize::from(q[i - 1] != c)).min(prev[i] + 1).min(cur[i - 1] + 1);
            }
            out.push(cur[q.len()]);
            prev = cur;
        }
        out
    }

    #[test]
    fn agrees_with_plain_dp_across_blocks() {
        let alphabet = ['a', 'b', 'œ', ' '];
        let mut seed = 7u64;
        let mut next = |n: usize| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as usize % n
        };
        for _ in 0..200 {
            let q: Vec<char> = (0..1 + next(150)).map(|_| alphabet[next(4)]).collect();
            let t: Vec<char> = (0..next(200)).map(|_| alphabet[next(4)]).collect();
            let want = plain(&q, &t);
            let mut got = vec![usize::MAX; t.len()];
            BitPattern::new(&q).scan(&t, usize::MAX, |e, d| got[e - 1] = d);
            assert_eq!(got, want);
        }
    }
}

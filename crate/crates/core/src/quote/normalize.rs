use serde::{Deserialize, Serialize};
use unicode_normalization::char::canonical_combining_class;
use unicode_normalization::UnicodeNormalization;

/// Which folding steps [`normalize`] applies. All are on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub unicode_nfc: bool,
    /// Lowercasing; accents are kept.
    pub casefold: bool,
    /// Any whitespace run, no-break spaces included, becomes one ASCII space.
    pub collapse_whitespace: bool,
    /// Typographic apostrophes become `'`; guillemets and curly double
    /// quotes become `"`.
    pub unify_quotes: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            unicode_nfc: true,
            casefold: true,
            collapse_whitespace: true,
            unify_quotes: true,
        }
    }
}

/// For each normalized code point, the original code-point range
/// `[start, end)` it was produced from. Ranges are non-decreasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OffsetMap {
    spans: Vec<(usize, usize)>,
    original_len: usize,
}

impl OffsetMap {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Original range contributing to normalized position `index`.
    pub fn source(&self, index: usize) -> Option<(usize, usize)> {
        self.spans.get(index).copied()
    }

    /// Translates a normalized range to the original range covering every
    /// contributing character.
    pub fn to_original(&self, start: usize, end: usize) -> (usize, usize) {
        if start >= end || start >= self.spans.len() {
            let at = self
                .spans
                .get(start)
                .map_or(self.original_len, |&(s, _)| s);
            return (at, at);
        }
        let end = end.min(self.spans.len());
        (self.spans[start].0, self.spans[end - 1].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub map: OffsetMap,
}

fn unify_quote(c: char) -> char {
    match c {
        '\u{2019}' | '\u{2018}' | '\u{02BC}' | '\u{201B}' => '\'',
        '«' | '»' | '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' => '"',
        other => other,
    }
}

/// Folds `text` for matching and records where each output character came
/// from.
///
/// Work happens per cluster (a starter plus its combining marks), so a
/// composed or case-expanded character maps back to the whole cluster.
pub fn normalize(text: &str, config: &NormalizationConfig) -> Normalized {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(chars.len());
    let mut in_space = false;

    let mut start = 0;
    while start < chars.len() {
        let mut end = start + 1;
        if config.unicode_nfc {
            while end < chars.len() && canonical_combining_class(chars[end]) != 0 {
                end += 1;
            }
        }
        let cluster = &chars[start..end];
        let folded: Vec<char> = match (config.unicode_nfc, config.casefold) {
            (true, true) => cluster
                .iter()
                .copied()
                .nfc()
                .flat_map(char::to_lowercase)
                .nfc()
                .collect(),
            (true, false) => cluster.iter().copied().nfc().collect(),
            (false, true) => cluster.iter().flat_map(|c| c.to_lowercase()).collect(),
            (false, false) => cluster.to_vec(),
        };
        for c in folded {
            let c = if config.unify_quotes { unify_quote(c) } else { c };
            if config.collapse_whitespace && c.is_whitespace() {
                if in_space {
                    if let Some(last) = spans.last_mut() {
                        last.1 = end;
                    }
                } else {
                    out.push(' ');
                    spans.push((start, end));
                    in_space = true;
                }
                continue;
            }
            in_space = false;
            out.push(c);
            spans.push((start, end));
        }
        start = end;
    }

    Normalized {
        text: out,
        map: OffsetMap {
            spans,
            original_len: chars.len(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> String {
        normalize(s, &NormalizationConfig::default()).text
    }

    #[test]
    fn ascii_is_lowercased_with_identity_map() {
        let n = normalize("Zeus", &NormalizationConfig::default());
        assert_eq!(n.text, "zeus");
        for i in 0..4 {
            assert_eq!(n.map.source(i), Some((i, i + 1)));
        }
    }

    #[test]
    fn apostrophe_and_double_space() {
        assert_eq!(norm("n\u{2019}est  pas"), "n'est pas");
    }

    #[test]
    fn guillemets_and_no_break_spaces() {
        assert_eq!(norm("«\u{00A0}Minos\u{00A0}»"), "\" minos \"");
    }

    #[test]
    fn accents_survive_and_decomposed_input_composes() {
        assert_eq!(norm("Érymanthos"), "érymanthos");
        let n = normalize("E\u{0301}rymanthos", &NormalizationConfig::default());
        assert_eq!(n.text, "érymanthos");
        assert_eq!(n.map.source(0), Some((0, 2)));
        assert_eq!(n.map.to_original(0, 3), (0, 4));
    }

    #[test]
    fn whitespace_run_maps_to_whole_run() {
        let n = normalize("a \t\n b", &NormalizationConfig::default());
        assert_eq!(n.text, "a b");
        assert_eq!(n.map.source(1), Some((1, 5)));
        assert_eq!(n.map.to_original(2, 3), (5, 6));
    }

    #[test]
    fn flags_can_be_disabled() {
        let cfg = NormalizationConfig {
            unicode_nfc: false,
            casefold: false,
            collapse_whitespace: false,
            unify_quotes: false,
        };
        assert_eq!(normalize("«A  b»", &cfg).text, "«A  b»");
    }
}

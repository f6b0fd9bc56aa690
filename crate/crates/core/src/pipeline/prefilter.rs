use std::path::Path;

use super::{Passage, PipelineError};
use crate::quote::{normalize, NormalizationConfig};
use crate::text::is_word_char;

/// Known names, compared under the quote verifier's normalization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    names: Vec<Vec<char>>,
}

impl Gazetteer {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let config = NormalizationConfig::default();
        let mut names: Vec<Vec<char>> = names
            .into_iter()
            .map(|n| normalize(n.as_ref().trim(), &config).text.chars().collect::<Vec<_>>())
            .filter(|n| !n.is_empty())
            .collect();
        names.sort();
        names.dedup();
        Gazetteer { names }
    }

    /// One name per line; `#` starts a comment line.
    pub fn parse(source: &str) -> Self {
        Gazetteer::new(
            source
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Gazetteer::parse(&raw))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// True when some name occurs in `text` as whole words. An empty
    /// gazetteer matches everything.
    pub fn matches(&self, text: &str) -> bool {
        if self.names.is_empty() {
            return true;
        }
        let hay: Vec<char> = normalize(text, &NormalizationConfig::default()).text.chars().collect();
        self.names.iter().any(|name| occurs_as_word(&hay, name))
    }
}

fn occurs_as_word(hay: &[char], needle: &[char]) -> bool {
    if needle.len() > hay.len() {
        return false;
    }
    (0..=hay.len() - needle.len()).any(|i| {
        hay[i..i + needle.len()] == *needle
            && (i == 0 || !is_word_char(hay[i - 1]) || !is_word_char(needle[0]))
            && hay
                .get(i + needle.len())
                .is_none_or(|&c| !is_word_char(c) || !is_word_char(needle[needle.len() - 1]))
    })
}

/// Marks which passages are worth sending to the model.
pub fn prefilter(passages: &[Passage], gazetteer: &Gazetteer) -> Vec<(Passage, bool)> {
    passages
        .iter()
        .map(|p| (p.clone(), gazetteer.matches(&p.text)))
        .collect()
}

//! Code-point addressing over UTF-8 strings.
//!
//! Every offset exchanged by this crate counts Unicode scalar values, not
//! bytes. [`CodePoints`] precomputes the byte position of each scalar so
//! slicing by code-point range stays O(1).

use sha2::{Digest, Sha256};

/// A borrowed string with a code-point to byte offset table.
#[derive(Debug, Clone)]
pub struct CodePoints<'a> {
    text: &'a str,
    // byte offset of every code point, plus text.len() as a sentinel
    bytes: Vec<usize>,
}

impl<'a> CodePoints<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        bytes.push(text.len());
        CodePoints { text, bytes }
    }

    /// Number of code points.
    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_str(&self) -> &'a str {
        self.text
    }

    /// The substring covering code points `start..end`, or `None` when the
    /// range is reversed or out of bounds.
    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len() {
            return None;
        }
        Some(&self.text[self.bytes[start]..self.bytes[end]])
    }

    /// Byte offset of code point `index` (`index == len()` is allowed).
    pub fn byte_offset(&self, index: usize) -> Option<usize> {
        self.bytes.get(index).copied()
    }
}

/// Number of code points in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by code-point range; `None` when out of bounds.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    CodePoints::new(text).slice(start, end)
}

/// Lowercase hex SHA-256 of the UTF-8 bytes of `text`.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Word characters for boundary tests: letters and digits in any script.
pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

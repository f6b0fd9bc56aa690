//! Inline `<mythEntity type="...">...</mythEntity>` markup.
//!
//! This is the format a chat model produces when asked to annotate a
//! passage. [`parse_inline`] turns it into plain text plus stand-off
//! [`Annotation`]s, [`render_inline`] goes the other way and always emits
//! the canonical grammar:
//!
//! ```text
//! <mythEntity type="deity">Minerve</mythEntity>
//! ```
//!
//! Tags are flat; a `mythEntity` opened inside another one is an error.
//! A `<` that does not start something tag-like is ordinary text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{parse_entity_type, validate_annotations, Annotation, EntityType};
use crate::text::char_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Exactly the canonical grammar. Used for stored and exchanged data.
    Strict,
    /// Tolerates typographic quotes, stray whitespace inside tags and
    /// escaped-underscore labels. Tags with unknown types are dropped with a
    /// warning instead of failing the passage.
    #[default]
    Lenient,
}

/// Errors carry the code-point offset of the offending tag in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("tag opened at {at} is never closed")]
    UnclosedTag { at: usize },
    #[error("tag at {at} opens inside the tag opened at {outer}")]
    NestedTag { at: usize, outer: usize },
    #[error("closing tag at {at} has no opening tag")]
    UnmatchedClose { at: usize },
    #[error("malformed tag at {at}: {snippet:?}")]
    MalformedAttribute { at: usize, snippet: String },
    #[error("unknown entity type {label:?} at {at}")]
    UnknownType { at: usize, label: String },
    #[error("tag at {at} encloses no text")]
    EmptyTag { at: usize },
    #[error("passage cannot be rendered: {0}")]
    InvalidPassage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    /// Code-point offset of the dropped tag in the tagged input.
    pub at: usize,
    pub message: String,
}

/// Plain text plus annotations whose offsets point into it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedPassage {
    pub plain_text: String,
    pub annotations: Vec<Annotation>,
}

static TAG_LIKE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^<\s*/?\s*mythentity\b").unwrap());
static TAG_LIKE_ANYWHERE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<\s*/?\s*mythentity\b").unwrap());
static STRICT_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"^<mythEntity type="([^"<>]*)">"#).unwrap());
static STRICT_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^</mythEntity>").unwrap());
static LENIENT_OPEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)^<\s*mythentity\s+type\s*=\s*["“”„«»]\s*([^"“”„«»<>]*?)\s*["“”„«»]\s*>"#)
        .unwrap()
});
static LENIENT_CLOSE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^<\s*/\s*mythentity\s*>").unwrap());

struct OpenTag {
    at: usize,
    plain_chars: usize,
    plain_bytes: usize,
    // None when the label was unknown and the tag is being dropped
    entity_type: Option<EntityType>,
}

/// Parses tagged text, discarding lenient-mode warnings.
pub fn parse_inline(tagged: &str, mode: ParseMode) -> Result<ParsedPassage, TagError> {
    parse_inline_with_warnings(tagged, mode).map(|(p, _)| p)
}

/// Parses tagged text and reports the tags lenient mode had to drop.
pub fn parse_inline_with_warnings(
    tagged: &str,
    mode: ParseMode,
) -> Result<(ParsedPassage, Vec<ParseWarning>), TagError> {
    let (open_re, close_re): (&Regex, &Regex) = match mode {
        ParseMode::Strict => (&STRICT_OPEN, &STRICT_CLOSE),
        ParseMode::Lenient => (&LENIENT_OPEN, &LENIENT_CLOSE),
    };
    let at_of = |byte: usize| char_len(&tagged[..byte]);

    let mut plain = String::with_capacity(tagged.len());
    let mut plain_chars = 0usize;
    let mut annotations = Vec::new();
    let mut warnings = Vec::new();
    let mut open: Option<OpenTag> = None;
    let mut pos = 0usize;

    while let Some(rel) = tagged[pos..].find('<') {
        let lt = pos + rel;
        let before = &tagged[pos..lt];
        plain.push_str(before);
        plain_chars += char_len(before);
        let rest = &tagged[lt..];

        if !TAG_LIKE.is_match(rest) {
            plain.push('<');
            plain_chars += 1;
            pos = lt + 1;
            continue;
        }

        if let Some(caps) = open_re.captures(rest) {
            let whole = caps.get(0).unwrap();
            if let Some(outer) = &open {
                return Err(TagError::NestedTag {
                    at: at_of(lt),
                    outer: outer.at,
                });
            }
            let label = caps.get(1).unwrap().as_str();
            let entity_type = match (parse_entity_type(label), mode) {
                (Ok(t), ParseMode::Strict) if t.as_str() == label => Some(t),
                (Ok(t), ParseMode::Lenient) => Some(t),
                (_, ParseMode::Strict) => {
                    return Err(TagError::UnknownType {
                        at: at_of(lt),
                        label: label.to_string(),
                    })
                }
                (Err(_), ParseMode::Lenient) => {
                    warnings.push(ParseWarning {
                        at: at_of(lt),
                        message: format!("dropped tag with unknown type {label:?}"),
                    });
                    None
                }
            };
            open = Some(OpenTag {
                at: at_of(lt),
                plain_chars,
                plain_bytes: plain.len(),
                entity_type,
            });
            pos = lt + whole.end();
        } else if let Some(m) = close_re.find(rest) {
            let Some(tag) = open.take() else {
                return Err(TagError::UnmatchedClose { at: at_of(lt) });
            };
            if tag.plain_chars == plain_chars {
                match mode {
                    ParseMode::Strict => return Err(TagError::EmptyTag { at: tag.at }),
                    ParseMode::Lenient => warnings.push(ParseWarning {
                        at: tag.at,
                        message: "dropped tag enclosing no text".to_string(),
                    }),
                }
            } else if let Some(entity_type) = tag.entity_type {
                annotations.push(Annotation {
                    start: tag.plain_chars,
                    end: plain_chars,
                    entity_type,
                    surface: plain[tag.plain_bytes..].to_string(),
                });
            }
            pos = lt + m.end();
        } else {
            let snippet: String = rest.chars().take(48).collect();
            return Err(TagError::MalformedAttribute {
                at: at_of(lt),
                snippet,
            });
        }
    }
    plain.push_str(&tagged[pos..]);

    if let Some(tag) = open {
        return Err(TagError::UnclosedTag { at: tag.at });
    }
    Ok((
        ParsedPassage {
            plain_text: plain,
            annotations,
        },
        warnings,
    ))
}

/// Renders a passage in the canonical inline grammar.
pub fn render_inline(passage: &ParsedPassage) -> Result<String, TagError> {
    let report = validate_annotations(&passage.plain_text, &passage.annotations);
    if let Some(v) = report.violations.first() {
        return Err(TagError::InvalidPassage(format!(
            "annotation {}: {}",
            v.index, v.detail
        )));
    }
    if let Some(m) = TAG_LIKE_ANYWHERE.find(&passage.plain_text) {
        return Err(TagError::InvalidPassage(format!(
            "plain text contains tag-like markup {:?}",
            m.as_str()
        )));
    }

    let mut out = String::with_capacity(passage.plain_text.len() + 48 * passage.annotations.len());
    let mut anns = passage.annotations.iter().peekable();
    for (i, c) in passage.plain_text.chars().enumerate() {
        if let Some(a) = anns.peek() {
            if a.end == i {
                out.push_str("</mythEntity>");
                anns.next();
            }
        }
        if let Some(a) = anns.peek() {
            if a.start == i {
                out.push_str("<mythEntity type=\"");
                out.push_str(a.entity_type.as_str());
                out.push_str("\">");
            }
        }
        out.push(c);
    }
    if anns.next().is_some() {
        out.push_str("</mythEntity>");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_tag() {
        let p = parse_inline(
            r#"belle et légère comme <mythEntity type="deity">Diane</mythEntity>, laissant"#,
            ParseMode::Strict,
        )
        .unwrap();
        assert_eq!(p.plain_text, "belle et légère comme Diane, laissant");
        assert_eq!(
            p.annotations,
            vec![Annotation {
                start: 22,
                end: 27,
                entity_type: EntityType::Deity,
                surface: "Diane".into()
            }]
        );
    }

    #[test]
    fn untagged_text_is_identity() {
        for mode in [ParseMode::Strict, ParseMode::Lenient] {
            let p = parse_inline("aucune balise ici", mode).unwrap();
            assert_eq!(p.plain_text, "aucune balise ici");
            assert!(p.annotations.is_empty());
        }
    }

    #[test]
    fn nesting_is_rejected() {
        let t = r#"<mythEntity type="deity">a <mythEntity type="hero">b</mythEntity></mythEntity>"#;
        for mode in [ParseMode::Strict, ParseMode::Lenient] {
            assert_eq!(
                parse_inline(t, mode),
                Err(TagError::NestedTag { at: 27, outer: 0 })
            );
        }
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            parse_inline(r#"x <mythEntity type="deity">Zeus"#, ParseMode::Strict),
            Err(TagError::UnclosedTag { at: 2 })
        );
        assert_eq!(
            parse_inline("Zeus</mythEntity>", ParseMode::Strict),
            Err(TagError::UnmatchedClose { at: 4 })
        );
        assert!(matches!(
            parse_inline("<mythEntity type=deity>Zeus</mythEntity>", ParseMode::Lenient),
            Err(TagError::MalformedAttribute { at: 0, .. })
        ));
        assert!(matches!(
            parse_inline("<mythEntity>Zeus</mythEntity>", ParseMode::Lenient),
            Err(TagError::MalformedAttribute { .. })
        ));
        assert_eq!(
            parse_inline(r#"<mythEntity type="deity"></mythEntity>"#, ParseMode::Strict),
            Err(TagError::EmptyTag { at: 0 })
        );
    }

    #[test]
    fn strict_rejects_lenient_quirks() {
        for t in [
            r#"<mythEntity type= "deity">Minos</mythEntity>"#,
            "<mythEntity type=“deity”>Minos</mythEntity>",
            r#"<mythEntity type="deity">Minos</ mythEntity>"#,
        ] {
            assert!(
                matches!(
                    parse_inline(t, ParseMode::Strict),
                    Err(TagError::MalformedAttribute { .. })
                ),
                "{t}"
            );
            let p = parse_inline(t, ParseMode::Lenient).unwrap();
            assert_eq!(p.plain_text, "Minos");
            assert_eq!(p.annotations[0].entity_type, EntityType::Deity);
        }
        assert!(matches!(
            parse_inline(r#"<mythEntity type="Deity">Minos</mythEntity>"#, ParseMode::Strict),
            Err(TagError::UnknownType { .. })
        ));
        assert!(matches!(
            parse_inline(
                r#"<mythEntity type="half\_creature">centaure</mythEntity>"#,
                ParseMode::Strict
            ),
            Err(TagError::UnknownType { .. })
        ));
    }

    #[test]
    fn lenient_drops_unknown_types_with_warning() {
        let (p, warnings) = parse_inline_with_warnings(
            r#"<mythEntity type="god">Zeus</mythEntity> et <mythEntity type="half\_creature">Chiron</mythEntity>"#,
            ParseMode::Lenient,
        )
        .unwrap();
        assert_eq!(p.plain_text, "Zeus et Chiron");
        assert_eq!(p.annotations.len(), 1);
        assert_eq!(p.annotations[0].surface, "Chiron");
        assert_eq!(p.annotations[0].entity_type, EntityType::HalfCreature);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].at, 0);
    }

    #[test]
    fn stray_angle_bracket_is_text() {
        let p = parse_inline("a < b", ParseMode::Strict).unwrap();
        assert_eq!(p.plain_text, "a < b");
    }

    #[test]
    fn renders_canonical_grammar() {
        let plain = "frangée de Minerve.";
        let p = ParsedPassage {
            plain_text: plain.into(),
            annotations: vec![Annotation::from_text(plain, 11, 18, EntityType::Deity).unwrap()],
        };
        assert_eq!(
            render_inline(&p).unwrap(),
            r#"frangée de <mythEntity type="deity">Minerve</mythEntity>."#
        );
        assert_eq!(render_inline(&ParsedPassage::default()).unwrap(), "");
    }

    #[test]
    fn render_refuses_invalid_passages() {
        let p = ParsedPassage {
            plain_text: "abc".into(),
            annotations: vec![Annotation {
                start: 1,
                end: 4,
                entity_type: EntityType::Deity,
                surface: "bc".into(),
            }],
        };
        assert!(matches!(render_inline(&p), Err(TagError::InvalidPassage(_))));
        let p = ParsedPassage {
            plain_text: "x <mythEntity y".into(),
            annotations: vec![],
        };
        assert!(matches!(render_inline(&p), Err(TagError::InvalidPassage(_))));
    }

    #[test]
    fn adjacent_tags_round_trip() {
        let t = r#"<mythEntity type="object">l’égide étincelante et frangée</mythEntity><mythEntity type="deity">Minerve</mythEntity>"#;
        let p = parse_inline(t, ParseMode::Strict).unwrap();
        assert_eq!(p.annotations.len(), 2);
        assert_eq!(p.annotations[0].end, p.annotations[1].start);
        assert_eq!(render_inline(&p).unwrap(), t);
    }
}

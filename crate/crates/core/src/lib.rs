//! Annotation of Greco-Roman mythological references in French literary
//! text: inline tag parsing, text preservation checks, an LLM gateway, the
//! annotation pipeline, evaluation and quote verification.

pub mod distance;
pub mod eval;
pub mod gateway;
pub mod inline;
pub mod pipeline;
pub mod preservation;
pub mod quote;
pub mod schema;
pub mod text;

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/annotations.md")]
    mod annotations {}
    #[doc = include_str!("../../../book/src/inline.md")]
    mod inline {}
    #[doc = include_str!("../../../book/src/preservation.md")]
    mod preservation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/lint.md")]
    mod lint {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/quotes.md")]
    mod quotes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

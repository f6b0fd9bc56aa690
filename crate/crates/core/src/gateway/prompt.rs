use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::schema::{Annotation, EntityType};

/// Wording of the annotation prompt. The default is the plain English
/// prompt: the schema, one line per type, then the instruction followed
/// directly by the passage. No examples, no extra guidance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub header: String,
    /// Text placed immediately before the passage.
    pub instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            header: "This is the annotation schema:".to_string(),
            instruction: "Please annotate the following sentence using this schema -> ".to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn annotation_prompt(&self, passage: &str) -> Result<String, GatewayError> {
        if passage.is_empty() {
            return Err(GatewayError::EmptyPassage);
        }
        let mut out = String::with_capacity(1024 + passage.len());
        out.push_str(&self.header);
        out.push('\n');
        for t in EntityType::ALL {
            out.push_str(&format!("<mythEntity type=\"{}\">: {}\n", t.as_str(), t.gloss()));
        }
        out.push_str(&self.instruction);
        out.push_str(passage);
        Ok(out)
    }

    /// The passage of a prompt produced by [`PromptTemplate::annotation_prompt`].
    pub fn extract_passage<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        if !prompt.starts_with(&self.header) {
            return None;
        }
        prompt
            .find(&self.instruction)
            .map(|i| &prompt[i + self.instruction.len()..])
    }
}

/// The annotation prompt with the default wording.
pub fn build_annotation_prompt(passage: &str) -> Result<String, GatewayError> {
    PromptTemplate::default().annotation_prompt(passage)
}

/// Asks for a commentary on the mythological references of a passage.
/// Repeated (surface, type) pairs are listed once.
pub fn build_interpretation_prompt(
    passage: &str,
    annotations: &[Annotation],
) -> Result<String, GatewayError> {
    if passage.is_empty() {
        return Err(GatewayError::EmptyPassage);
    }
    let mut out = String::from("The following passage comes from a French literary text:\n\n");
    out.push_str(passage);
    out.push_str("\n\n");

    let mut listed: Vec<(&str, EntityType)> = Vec::new();
    for a in annotations {
        if !listed.contains(&(a.surface.as_str(), a.entity_type)) {
            listed.push((a.surface.as_str(), a.entity_type));
        }
    }
    if listed.is_empty() {
        out.push_str(
            "Does this passage contain any allusion to Greco-Roman mythology? \
             If so, comment on the role the allusion plays in the passage.",
        );
    } else {
        out.push_str("It contains the following references to Greco-Roman mythology:\n");
        for (surface, t) in listed {
            out.push_str(&format!("- {surface} ({t})\n"));
        }
        out.push_str("\nFor each reference, comment on the role it plays in the passage.");
    }
    Ok(out)
}

//! Sentence parsing, template classification and slot extraction.

pub mod chunker;
mod slots;
mod template;
mod tree;

use thiserror::Error;

use crate::knowledge::ResolveError;

pub use slots::{
    extract_intent, extract_slots, matching_values, resolve_selector, selector_precedence, Condition, QueryIntent,
    Selector,
};
pub use template::{classify, QueryTemplate, TemplateVariant};
pub use tree::ParseTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("cannot parse sentence: {0}")]
    UnparsableSentence(String),
    #[error("sentence matches no query template")]
    NoTemplateMatch,
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("no attribute of `{concept}` holds {values:?}")]
    SelectorUnresolved { concept: String, values: Vec<String> },
}

impl FrontendError {
    pub fn name(&self) -> &'static str {
        match self {
            FrontendError::UnparsableSentence(_) => "UnparsableSentence",
            FrontendError::NoTemplateMatch => "NoTemplateMatch",
            FrontendError::Resolve(e) => e.name(),
            FrontendError::SelectorUnresolved { .. } => "SelectorUnresolved",
        }
    }
}

/// Parses a sentence, or echoes a tree given in bracketed notation.
pub fn parse(sentence: &str) -> Result<ParseTree, FrontendError> {
    let text = sentence.trim();
    if text.is_empty() {
        return Err(FrontendError::UnparsableSentence("empty sentence".into()));
    }
    if text.starts_with('(') {
        ParseTree::parse_bracketed(text)
    } else {
        chunker::chunk(text)
    }
}

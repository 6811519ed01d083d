//! Corpus construction and evaluation for insertion-only text expansion.
//!
//! The crate derives (source, expansion) pairs from raw text by constituency
//! tree pruning and Hearst-pattern extraction, prepares masked-infilling
//! templates, filters noisy pairs, and scores system outputs (fidelity,
//! fertility, BLEU, perplexity, entailment, Info-Gain).

pub mod align;
pub mod construct;
pub mod error;
pub mod hearst;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod ngram;
pub mod oracle;
pub mod template;
pub mod treebank;

pub use error::{Error, Result};
pub use model::{
    read_pairs, surface_modifiers, write_pairs, ExpansionPair, Language, Provenance, Span,
    TaggedRecord, TaggedText, TokenSeq,
};
pub use ngram::{LmScore, NgramModel};
pub use oracle::{ScorerHandle, ScorerKind};
pub use template::{InfillTemplatePair, MaskFormat, Segment, TemplateRecord};

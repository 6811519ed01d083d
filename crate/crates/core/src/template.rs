//! Infilling templates: token runs interleaved with numbered mask slots.
//!
//! A template pair has an `input` and a `target`. Splicing fills the k-th slot
//! of one side with the k-th literal run of the other side, so both the
//! T5-style target (`<M1> run <M2> run`) and the dual templates used for
//! infill perplexity reconstruct the full sentence the same way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TokenSeq;

/// One piece of a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Literal(TokenSeq),
    /// 1-based slot number.
    Slot(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfillTemplatePair {
    pub input: Vec<Segment>,
    pub target: Vec<Segment>,
}

/// Surface form of a slot, e.g. `<M{i}>` rendering slot 3 as `<M3>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskFormat(String);

impl MaskFormat {
    pub const PLACEHOLDER: &'static str = "{i}";

    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        if pattern.matches(Self::PLACEHOLDER).count() != 1 {
            return Err(Error::validation(
                "mask_format",
                format!("{pattern:?} must contain exactly one {{i}} placeholder"),
            ));
        }
        if pattern.chars().any(char::is_whitespace) {
            return Err(Error::validation("mask_format", "mask tokens cannot contain whitespace"));
        }
        Ok(MaskFormat(pattern))
    }

    pub fn render(&self, slot: usize) -> String {
        self.0.replacen(Self::PLACEHOLDER, &slot.to_string(), 1)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for MaskFormat {
    fn default() -> Self {
        MaskFormat("<M{i}>".to_owned())
    }
}

impl TryFrom<String> for MaskFormat {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        MaskFormat::new(s)
    }
}

impl From<MaskFormat> for String {
    fn from(m: MaskFormat) -> Self {
        m.0
    }
}

/// Appends `tokens` to the segment list, extending a trailing literal if there is one.
pub(crate) fn push_literal(segments: &mut Vec<Segment>, tokens: &[String]) {
    if tokens.is_empty() {
        return;
    }
    if let Some(Segment::Literal(last)) = segments.last_mut() {
        let mut v = std::mem::take(last).into_inner();
        v.extend_from_slice(tokens);
        *last = TokenSeq::from_vec_unchecked(v);
    } else {
        segments.push(Segment::Literal(TokenSeq::from_vec_unchecked(tokens.to_vec())));
    }
}

fn slots(segments: &[Segment]) -> impl Iterator<Item = usize> + '_ {
    segments.iter().filter_map(|s| match s {
        Segment::Slot(i) => Some(*i),
        Segment::Literal(_) => None,
    })
}

fn literals(segments: &[Segment]) -> impl Iterator<Item = &TokenSeq> + '_ {
    segments.iter().filter_map(|s| match s {
        Segment::Literal(t) => Some(t),
        Segment::Slot(_) => None,
    })
}

impl InfillTemplatePair {
    pub fn input_slot_count(&self) -> usize {
        slots(&self.input).count()
    }

    pub fn target_slot_count(&self) -> usize {
        slots(&self.target).count()
    }

    /// Literal runs of the target, in order.
    pub fn target_literals(&self) -> impl Iterator<Item = &TokenSeq> + '_ {
        literals(&self.target)
    }

    pub fn input_literals(&self) -> impl Iterator<Item = &TokenSeq> + '_ {
        literals(&self.input)
    }

    /// Checks that slots on each side are numbered 1..K in order.
    pub fn validate(&self) -> Result<()> {
        for (side, segs) in [("input", &self.input), ("target", &self.target)] {
            for (expect, got) in slots(segs).enumerate() {
                if got != expect + 1 {
                    return Err(Error::invalid(format!(
                        "malformed template: {side} slot {got} where {} expected",
                        expect + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fills the input's slots with the target's literal runs.
    ///
    /// A literal consisting of exactly `null_token` fills its slot with nothing.
    /// Returns the full token sequence plus, for each token, whether it came
    /// from the target.
    pub fn splice_with_origin(&self, null_token: Option<&str>) -> Result<(Vec<String>, Vec<bool>)> {
        self.validate()?;
        let mut fills = literals(&self.target);
        let mut tokens = Vec::new();
        let mut from_target = Vec::new();
        for seg in &self.input {
            match seg {
                Segment::Literal(t) => {
                    tokens.extend_from_slice(t);
                    from_target.extend(std::iter::repeat_n(false, t.len()));
                }
                Segment::Slot(i) => {
                    let Some(fill) = fills.next() else {
                        return Err(Error::invalid(format!(
                            "malformed template: no target run for slot {i}"
                        )));
                    };
                    let is_null = matches!(null_token, Some(n) if fill.len() == 1 && fill[0] == n);
                    if !is_null {
                        tokens.extend_from_slice(fill);
                        from_target.extend(std::iter::repeat_n(true, fill.len()));
                    }
                }
            }
        }
        if fills.next().is_some() {
            return Err(Error::invalid(
                "malformed template: more target runs than input slots",
            ));
        }
        Ok((tokens, from_target))
    }

    /// Target runs spliced into input slots.
    pub fn splice(&self, null_token: Option<&str>) -> Result<TokenSeq> {
        self.splice_with_origin(null_token)
            .map(|(t, _)| TokenSeq::from_vec_unchecked(t))
    }

    /// Input runs spliced into target slots (the dual direction).
    pub fn splice_reverse(&self) -> Result<TokenSeq> {
        InfillTemplatePair {
            input: self.target.clone(),
            target: self.input.clone(),
        }
        .splice(None)
    }

    pub fn render_input(&self, fmt: &MaskFormat) -> Vec<String> {
        render(&self.input, fmt)
    }

    pub fn render_target(&self, fmt: &MaskFormat) -> Vec<String> {
        render(&self.target, fmt)
    }
}

/// Flattens segments into tokens with slots written in their surface form.
pub fn render(segments: &[Segment], fmt: &MaskFormat) -> Vec<String> {
    let mut out = Vec::new();
    for seg in segments {
        match seg {
            Segment::Literal(t) => out.extend_from_slice(t),
            Segment::Slot(i) => out.push(fmt.render(*i)),
        }
    }
    out
}

/// Wire/file form of a template: `{"id", "input": [str], "target": [str]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub id: String,
    pub input: Vec<String>,
    pub target: Vec<String>,
}

impl TemplateRecord {
    pub fn new(id: impl Into<String>, t: &InfillTemplatePair, fmt: &MaskFormat) -> Self {
        TemplateRecord {
            id: id.into(),
            input: t.render_input(fmt),
            target: t.render_target(fmt),
        }
    }
}

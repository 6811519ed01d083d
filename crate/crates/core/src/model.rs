//! Canonical data model shared by every pipeline stage.
//!
//! Token sequences are pre-tokenized: English on whitespace with punctuation
//! already split, Chinese one segment per token. Pairs are exchanged as JSON
//! lines; see [`read_pairs`] and [`write_pairs`].

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// An ordered run of surface tokens. Tokens are non-empty and carry no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::validation("tokens", format!("token {i} is empty")));
            }
            if t.chars().any(char::is_whitespace) {
                return Err(Error::validation(
                    "tokens",
                    format!("token {i} contains whitespace: {t:?}"),
                ));
            }
        }
        Ok(TokenSeq(tokens))
    }

    /// Splits on Unicode whitespace. Never fails: whitespace runs cannot produce empty tokens.
    pub fn from_whitespace(text: &str) -> Self {
        TokenSeq(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }

    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        TokenSeq::new(v)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(t: TokenSeq) -> Self {
        t.0
    }
}

impl AsRef<[String]> for TokenSeq {
    fn as_ref(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

/// Half-open token range `[start, end)`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::validation(
                "span",
                format!("empty or reversed span [{start}, {end}]"),
            ));
        }
        Ok(Span { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.start <= idx && idx < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl TryFrom<(usize, usize)> for Span {
    type Error = Error;

    fn try_from((s, e): (usize, usize)) -> Result<Self> {
        Span::new(s, e)
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

/// Collapses a set of indices into sorted, maximal, non-adjacent runs.
pub fn runs_from_mask(mask: &[bool]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let start = i;
            while i < mask.len() && mask[i] {
                i += 1;
            }
            out.push(Span { start, end: i });
        } else {
            i += 1;
        }
    }
    out
}

/// Sorts spans, rejects overlaps and out-of-range spans, and merges adjacent ones.
pub fn normalize_spans(mut spans: Vec<Span>, len: usize, field: &'static str) -> Result<Vec<Span>> {
    spans.sort();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        if s.end > len {
            return Err(Error::validation(
                field,
                format!("span [{}, {}] out of range for length {len}", s.start, s.end),
            ));
        }
        match out.last_mut() {
            Some(prev) if s.start < prev.end => {
                return Err(Error::validation(field, "overlapping spans"));
            }
            Some(prev) if s.start == prev.end => prev.end = s.end,
            _ => out.push(s),
        }
    }
    Ok(out)
}

/// Checks that spans are sorted, disjoint and index within `len`.
pub fn check_disjoint(spans: &[Span], len: usize, field: &'static str) -> Result<()> {
    let mut prev_end = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.end > len {
            return Err(Error::validation(field, "span out of range"));
        }
        if i > 0 && s.start < prev_end {
            return Err(Error::validation(field, "overlapping spans"));
        }
        prev_end = s.end;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
        }
    }
}

impl std::str::FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            other => Err(Error::invalid(format!("unknown language {other:?}"))),
        }
    }
}

/// Where a pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    /// Neural sentence compression output.
    #[serde(rename = "NSC")]
    Nsc,
    /// Constituency tree pruning.
    #[serde(rename = "CTP")]
    Ctp,
    /// IsA (Hearst pattern) relationship.
    #[serde(rename = "IAR")]
    Iar,
    /// Masked modifier prediction.
    #[serde(rename = "MMP")]
    Mmp,
    #[serde(rename = "MODEL")]
    Model,
    #[serde(rename = "REF")]
    Ref,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

#[derive(Deserialize)]
struct RawPair {
    id: String,
    language: Language,
    source: TokenSeq,
    expansion: TokenSeq,
    #[serde(default)]
    modifier_spans: Vec<Span>,
    provenance: Provenance,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

/// A source text `X` and an expansion `Y` obtained from it purely by insertion.
///
/// `modifier_spans` index into the expansion. When populated they are sorted,
/// disjoint and never adjacent, and deleting them from `expansion` yields
/// `source`. An empty list on a pair whose source differs from its expansion
/// means the spans are unknown; [`crate::align::canonical_spans`] recovers them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct ExpansionPair {
    pub id: String,
    pub language: Language,
    pub source: TokenSeq,
    pub expansion: TokenSeq,
    pub modifier_spans: Vec<Span>,
    pub provenance: Provenance,
    /// Unrecognized fields, carried through a read/write round trip.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TryFrom<RawPair> for ExpansionPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        let mut pair = ExpansionPair::new(
            raw.id,
            raw.language,
            raw.source,
            raw.expansion,
            raw.modifier_spans,
            raw.provenance,
        )?;
        pair.extra = raw.extra;
        Ok(pair)
    }
}

impl ExpansionPair {
    /// Builds a pair, merging adjacent spans and checking the reconstruction invariant.
    pub fn new(
        id: impl Into<String>,
        language: Language,
        source: TokenSeq,
        expansion: TokenSeq,
        modifier_spans: Vec<Span>,
        provenance: Provenance,
    ) -> Result<Self> {
        let spans = normalize_spans(modifier_spans, expansion.len(), "modifier_spans")?;
        if !spans.is_empty() {
            let rest = remove_spans(&expansion, &spans);
            if rest.as_slice() != source.as_slice() {
                return Err(Error::validation(
                    "modifier_spans",
                    "removing the spans from the expansion does not reproduce the source",
                ));
            }
        }
        Ok(ExpansionPair {
            id: id.into(),
            language,
            source,
            expansion,
            modifier_spans: spans,
            provenance,
            extra: Map::new(),
        })
    }

    /// Whether the spans describe the pair: either populated or trivially empty (X == Y).
    pub fn has_spans(&self) -> bool {
        !self.modifier_spans.is_empty() || self.source == self.expansion
    }
}

/// Copies `tokens` with every token covered by `spans` removed.
pub fn remove_spans(tokens: &[String], spans: &[Span]) -> TokenSeq {
    let mut out = Vec::with_capacity(tokens.len());
    let mut next = 0;
    for s in spans {
        out.extend_from_slice(&tokens[next..s.start]);
        next = s.end;
    }
    out.extend_from_slice(&tokens[next.min(tokens.len())..]);
    TokenSeq(out)
}

/// The token runs of the expansion covered by each modifier span, in order.
pub fn surface_modifiers(pair: &ExpansionPair) -> Vec<TokenSeq> {
    pair.modifier_spans
        .iter()
        .map(|s| TokenSeq(pair.expansion[s.range()].to_vec()))
        .collect()
}

/// Reads one pair per line. Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<ExpansionPair>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // Decode the raw shape first so pair-level validation keeps its field name.
        let raw: RawPair = parse_jsonl_line(&line, idx + 1)?;
        out.push(ExpansionPair::try_from(raw)?);
    }
    Ok(out)
}

/// Writes one compact JSON object per line.
pub fn write_pairs<W: Write>(pairs: &[ExpansionPair], mut writer: W) -> Result<()> {
    for p in pairs {
        write_jsonl_line(&mut writer, p)?;
    }
    writer.flush()?;
    Ok(())
}

/// Generic JSONL reader used for pairs, tagged text and pattern files.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_jsonl_line(&line, idx + 1)?);
    }
    Ok(out)
}

/// Parses one line, splitting schema violations from syntax errors.
pub fn parse_jsonl_line<T: serde::de::DeserializeOwned>(line: &str, line_no: usize) -> Result<T> {
    match serde_json::from_str::<T>(line) {
        Ok(v) => Ok(v),
        Err(e) if e.is_syntax() || e.is_eof() => Err(Error::Json {
            line: line_no,
            source: e,
        }),
        Err(e) => Err(Error::Validation {
            field: "record",
            message: format!("line {line_no}: {e}"),
        }),
    }
}

pub fn write_jsonl_line<W: Write, T: Serialize>(writer: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *writer, value).map_err(|e| Error::Io(e.into()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Tokens with optional annotation layers consumed by the Hearst and MMP stages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTagged")]
pub struct TaggedText {
    pub tokens: TokenSeq,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub np_chunks: Option<Vec<Span>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<Span>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hq_modifiers: Option<Vec<Span>>,
}

#[derive(Deserialize)]
struct RawTagged {
    tokens: TokenSeq,
    #[serde(default)]
    pos: Option<Vec<String>>,
    #[serde(default)]
    np_chunks: Option<Vec<Span>>,
    #[serde(default)]
    entities: Option<Vec<Span>>,
    #[serde(default)]
    hq_modifiers: Option<Vec<Span>>,
}

impl TryFrom<RawTagged> for TaggedText {
    type Error = Error;

    fn try_from(r: RawTagged) -> Result<Self> {
        let t = TaggedText {
            tokens: r.tokens,
            pos: r.pos,
            np_chunks: r.np_chunks,
            entities: r.entities,
            hq_modifiers: r.hq_modifiers,
        };
        t.validate()?;
        Ok(t)
    }
}

impl TaggedText {
    pub fn new(tokens: TokenSeq) -> Self {
        TaggedText {
            tokens,
            ..Default::default()
        }
    }

    pub fn with_pos(mut self, pos: Vec<String>) -> Result<Self> {
        self.pos = Some(pos);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if let Some(pos) = &self.pos {
            if pos.len() != n {
                return Err(Error::validation(
                    "pos",
                    format!("{} tags for {n} tokens", pos.len()),
                ));
            }
        }
        if let Some(chunks) = &self.np_chunks {
            if let Some(s) = chunks.iter().find(|s| s.end > n) {
                return Err(Error::validation(
                    "np_chunks",
                    format!("span [{}, {}] out of range", s.start, s.end),
                ));
            }
        }
        if let Some(ents) = &self.entities {
            let mut sorted = ents.clone();
            sorted.sort();
            check_disjoint(&sorted, n, "entities")?;
        }
        if let Some(hq) = &self.hq_modifiers {
            let mut sorted = hq.clone();
            sorted.sort();
            check_disjoint(&sorted, n, "hq_modifiers")?;
        }
        Ok(())
    }
}

/// A [`TaggedText`] with its record id, as read from JSONL input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<Language>,
    #[serde(flatten)]
    pub text: TaggedText,
}

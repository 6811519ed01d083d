//! IsA extraction with Hearst patterns.
//!
//! A match excises the hypernym phrase plus its clue words from Y, leaving the
//! hyponyms in place; the remainder becomes X.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{read_jsonl, remove_spans, ExpansionPair, Language, Provenance, Span, TaggedText};

/// One position of a pattern template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Element {
    NpSup,
    NpSub,
    /// Lowercase clue words; each alternative may span several tokens.
    Words {
        alternatives: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        optional: bool,
    },
}

impl Element {
    fn words(alts: &[&str]) -> Element {
        Element::Words {
            alternatives: alts
                .iter()
                .map(|a| a.split_whitespace().map(str::to_owned).collect())
                .collect(),
            optional: false,
        }
    }

    fn optional(alts: &[&str]) -> Element {
        match Element::words(alts) {
            Element::Words { alternatives, .. } => Element::Words {
                alternatives,
                optional: true,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HearstPattern {
    pub pattern_id: String,
    pub template: Vec<Element>,
    /// Half-open range of template elements forming the modifier.
    pub modifier_elements: [usize; 2],
    /// Whether a trailing `NP , NP , and NP` list extends the hyponyms.
    #[serde(default)]
    pub list_hyponyms: bool,
}

impl HearstPattern {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::validation("pattern", format!("{}: {m}", self.pattern_id)));
        let sup = self.template.iter().filter(|e| **e == Element::NpSup).count();
        let sub = self.template.iter().filter(|e| **e == Element::NpSub).count();
        if sup != 1 || sub == 0 {
            return fail("needs exactly one NP_SUP and at least one NP_SUB");
        }
        let [lo, hi] = self.modifier_elements;
        if lo >= hi || hi > self.template.len() {
            return fail("modifier range out of bounds");
        }
        for (i, e) in self.template.iter().enumerate() {
            let inside = (lo..hi).contains(&i);
            match e {
                Element::NpSub if inside => return fail("modifier range covers NP_SUB"),
                Element::NpSup | Element::Words { .. } if !inside => {
                    return fail("modifier range must cover NP_SUP and every clue word")
                }
                Element::Words { alternatives, .. }
                    if alternatives.is_empty() || alternatives.iter().any(Vec::is_empty) =>
                {
                    return fail("empty clue alternative")
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HearstMatch {
    pub pattern_id: String,
    pub hypernym_span: Span,
    pub hyponym_spans: Vec<Span>,
    pub modifier_span: Span,
}

/// The eight built-in English patterns, in priority order.
pub fn builtin_patterns() -> Vec<HearstPattern> {
    use Element::{NpSub, NpSup};
    let w = Element::words;
    let opt = Element::optional;
    let p = |id: &str, template: Vec<Element>, lo: usize, hi: usize, list: bool| HearstPattern {
        pattern_id: id.to_owned(),
        template,
        modifier_elements: [lo, hi],
        list_hyponyms: list,
    };
    vec![
        p(
            "1",
            vec![
                NpSub,
                w(&["is"]),
                w(&["a", "an"]),
                w(&["part", "field", "kind", "type"]),
                w(&["of"]),
                NpSup,
                w(&["that"]),
            ],
            1,
            7,
            false,
        ),
        p(
            "2",
            vec![NpSub, w(&["and", "or"]), opt(&["some", "any"]), w(&["other"]), NpSup],
            1,
            5,
            false,
        ),
        p(
            "3",
            vec![NpSup, opt(&[","]), w(&["especially", "particularly", "notably"]), NpSub],
            0,
            3,
            true,
        ),
        p(
            "4",
            vec![NpSub, w(&[","]), w(&["known", "famous"]), w(&["as"]), NpSup],
            1,
            5,
            false,
        ),
        p(
            "5",
            vec![NpSup, opt(&[","]), w(&["such as", "including"]), NpSub],
            0,
            3,
            true,
        ),
        p("6", vec![w(&["such"]), NpSup, w(&["as"]), NpSub], 0, 3, true),
        p(
            "7",
            vec![
                NpSup,
                opt(&[","]),
                w(&["e.g.", "i.e.", "for instance", "for example"]),
                NpSub,
            ],
            0,
            3,
            true,
        ),
        p(
            "8",
            vec![w(&["known", "famous"]), w(&["as"]), NpSup, w(&[","]), NpSub],
            0,
            4,
            false,
        ),
    ]
}

/// Reads a JSONL pattern file, validating every pattern.
pub fn read_patterns<R: BufRead>(reader: R) -> Result<Vec<HearstPattern>> {
    let patterns: Vec<HearstPattern> = read_jsonl(reader)?;
    for p in &patterns {
        p.validate()?;
    }
    Ok(patterns)
}

fn is_noun(tag: &str) -> bool {
    tag.starts_with("NN")
}

fn is_np_prefix(tag: &str) -> bool {
    matches!(tag, "DT" | "PRP$" | "CD") || tag.starts_with("JJ")
}

/// Naive NP chunker over POS tags.
///
/// Base NPs are runs of determiners, possessives, adjectives and numbers
/// followed by nouns; a new base NP starts when such a prefix tag follows a
/// noun. `NP of NP` is then merged once into an extended NP.
pub fn chunk_naive(tagged: &TaggedText) -> Result<Vec<Span>> {
    let pos = tagged
        .pos
        .as_ref()
        .ok_or_else(|| Error::invalid("pos required for naive chunking"))?;

    let mut base = Vec::new();
    let mut i = 0;
    while i < pos.len() {
        let start = i;
        while i < pos.len() && is_np_prefix(&pos[i]) {
            i += 1;
        }
        let nouns = i;
        while i < pos.len() && is_noun(&pos[i]) {
            i += 1;
        }
        if i > nouns {
            base.push(Span { start, end: i });
        } else if i == start {
            i += 1;
        }
    }

    let mut out: Vec<Span> = Vec::with_capacity(base.len());
    let mut k = 0;
    while k < base.len() {
        let a = base[k];
        if let Some(b) = base.get(k + 1) {
            if b.start == a.end + 1 && tagged.tokens[a.end].eq_ignore_ascii_case("of") {
                out.push(Span { start: a.start, end: b.end });
                k += 2;
                continue;
            }
        }
        out.push(a);
        k += 1;
    }
    Ok(out)
}

struct Matcher {
    lower: Vec<String>,
    /// Possible NP ends for an NP starting at each position, longest first.
    np_ends: Vec<Vec<usize>>,
}

impl Matcher {
    /// An NP may start at a chunk's first token or at any later token other
    /// than an `of`, so `other method` matches inside `any other method`.
    fn new(tokens: &[String], chunks: &[Span]) -> Matcher {
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut np_ends = vec![Vec::new(); tokens.len()];
        for c in chunks {
            for p in c.range() {
                if p == c.start || lower[p] != "of" {
                    np_ends[p].push(c.end);
                }
            }
        }
        for ends in &mut np_ends {
            ends.sort_unstable_by(|a, b| b.cmp(a));
            ends.dedup();
        }
        Matcher { lower, np_ends }
    }

    fn words_at(&self, pos: usize, words: &[String]) -> bool {
        self.lower.get(pos..pos + words.len()) == Some(words)
    }

    /// Backtracking match of `template[elem..]` at `pos`, recording each element's token range.
    fn run(
        &self,
        pattern: &HearstPattern,
        elem: usize,
        pos: usize,
        ranges: &mut Vec<(usize, usize)>,
    ) -> bool {
        let Some(e) = pattern.template.get(elem) else {
            return true;
        };
        let mut candidates: Vec<usize> = Vec::new();
        match e {
            Element::NpSup | Element::NpSub => {
                if let Some(ends) = self.np_ends.get(pos) {
                    candidates.extend(ends);
                }
            }
            Element::Words { alternatives, optional } => {
                for alt in alternatives {
                    if self.words_at(pos, alt) {
                        candidates.push(pos + alt.len());
                    }
                }
                if *optional {
                    candidates.push(pos);
                }
            }
        }
        for end in candidates {
            ranges.push((pos, end));
            if self.run(pattern, elem + 1, end, ranges) {
                return true;
            }
            ranges.pop();
        }
        false
    }

    fn np_at(&self, pos: usize) -> Option<usize> {
        self.np_ends.get(pos).and_then(|e| e.first().copied())
    }

    /// Extends a hyponym list: `, NP`, repeated, optionally closed by `,? (and|or) NP`.
    fn list_tail(&self, mut pos: usize, spans: &mut Vec<Span>) {
        loop {
            let comma = self.words_at(pos, &[",".to_owned()]);
            let after_comma = pos + usize::from(comma);
            let conj = self.lower.get(after_comma).is_some_and(|t| t == "and" || t == "or");
            if conj {
                if let Some(end) = self.np_at(after_comma + 1) {
                    spans.push(Span { start: after_comma + 1, end });
                }
                return;
            }
            if !comma {
                return;
            }
            match self.np_at(after_comma) {
                Some(end) => {
                    spans.push(Span { start: after_comma, end });
                    pos = end;
                }
                None => return,
            }
        }
    }
}

/// Left-to-right scan for non-overlapping pattern matches.
pub fn find_matches(tagged: &TaggedText, patterns: &[HearstPattern]) -> Result<Vec<HearstMatch>> {
    let n = tagged.tokens.len();
    let chunks = match &tagged.np_chunks {
        Some(c) => c.clone(),
        None => chunk_naive(tagged)?,
    };
    let m = Matcher::new(&tagged.tokens, &chunks);

    let mut out = Vec::new();
    let mut pos = 0;
    'scan: while pos < n {
        for pattern in patterns {
            let mut ranges = Vec::new();
            if !m.run(pattern, 0, pos, &mut ranges) {
                continue;
            }
            let [lo, hi] = pattern.modifier_elements;
            let modifier_span = Span {
                start: ranges[lo].0,
                end: ranges[hi - 1].1,
            };
            let mut hypernym_span = modifier_span;
            let mut hyponym_spans = Vec::new();
            for (e, &(s, t)) in pattern.template.iter().zip(&ranges) {
                match e {
                    Element::NpSup => hypernym_span = Span { start: s, end: t },
                    Element::NpSub => hyponym_spans.push(Span { start: s, end: t }),
                    Element::Words { .. } => {}
                }
            }
            if pattern.list_hyponyms && matches!(pattern.template.last(), Some(Element::NpSub)) {
                let end = ranges.last().map_or(pos, |r| r.1);
                m.list_tail(end, &mut hyponym_spans);
            }
            pos = modifier_span.end;
            out.push(HearstMatch {
                pattern_id: pattern.pattern_id.clone(),
                hypernym_span,
                hyponym_spans,
                modifier_span,
            });
            continue 'scan;
        }
        pos += 1;
    }
    Ok(out)
}

/// Pair with X = Y minus the match's modifier.
pub fn match_to_pair(
    tagged: &TaggedText,
    m: &HearstMatch,
    id: impl Into<String>,
    language: Language,
) -> Result<ExpansionPair> {
    let spans = vec![m.modifier_span];
    if m.modifier_span.end > tagged.tokens.len() {
        return Err(Error::validation("modifier_span", "out of range"));
    }
    let x = remove_spans(&tagged.tokens, &spans);
    if x.is_empty() {
        return Err(Error::EmptySource);
    }
    ExpansionPair::new(id, language, x, tagged.tokens.clone(), spans, Provenance::Iar)
}

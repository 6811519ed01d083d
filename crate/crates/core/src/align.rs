//! Fidelity checking, span recovery by monotone alignment, and the
//! Locate&Infill training formats.

use crate::error::{Error, Result};
use crate::model::{runs_from_mask, ExpansionPair, Language, Provenance, Span, TokenSeq};
use crate::template::{push_literal, InfillTemplatePair, Segment};

/// Default placeholder for slots where nothing is inserted.
pub const DEFAULT_NULL_TOKEN: &str = "<null>";

/// A monotone embedding of `x` into `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `map[i]` is the index in `y` matched by `x[i]`; strictly increasing.
    pub map: Vec<usize>,
    /// Maximal runs of `y` indices not in `map`.
    pub slots: Vec<Span>,
}

/// One boolean per insertion position: before each source token, plus the end (`</S>`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationLabels {
    pub labels: Vec<bool>,
}

impl LocationLabels {
    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// True iff `x` is an in-order subsequence of `y`.
pub fn check_fidelity(x: &[String], y: &[String]) -> bool {
    let mut it = y.iter();
    x.iter().all(|t| it.any(|u| u == t))
}

fn slots_of(map: &[usize], y_len: usize) -> Vec<Span> {
    let mut inserted = vec![true; y_len];
    for &j in map {
        inserted[j] = false;
    }
    runs_from_mask(&inserted)
}

const UNREACHABLE: u32 = u32::MAX;

/// Embedding of `x` into `y` with the fewest insertion gaps, leftmost on ties.
///
/// `best[i][j]` is the fewest gaps from position `j` onward when `x[i]` is
/// matched at `y[j]`. Each row needs the minimum of the next row over
/// `j' > j + 1`, kept as a suffix minimum, so the table fills in O(|x|·|y|).
pub fn align_min_gaps(x: &[String], y: &[String]) -> Result<Alignment> {
    let (n, m) = (x.len(), y.len());
    if !check_fidelity(x, y) {
        return Err(Error::NotSubsequence);
    }
    if n == 0 {
        return Ok(Alignment {
            map: Vec::new(),
            slots: slots_of(&[], m),
        });
    }

    let mut best = vec![vec![UNREACHABLE; m]; n];
    for j in 0..m {
        if y[j] == x[n - 1] {
            best[n - 1][j] = u32::from(j + 1 < m);
        }
    }
    // suffix_min[k] = min over j' >= k of best[i + 1][j'].
    let mut suffix_min = vec![UNREACHABLE; m + 1];
    for i in (0..n - 1).rev() {
        for k in (0..m).rev() {
            suffix_min[k] = suffix_min[k + 1].min(best[i + 1][k]);
        }
        for j in 0..m {
            if y[j] != x[i] {
                continue;
            }
            let adjacent = if j + 1 < m { best[i + 1][j + 1] } else { UNREACHABLE };
            let jump = if j + 2 <= m { suffix_min[(j + 2).min(m)] } else { UNREACHABLE };
            best[i][j] = adjacent.min(jump.saturating_add(1));
        }
    }

    let mut map = Vec::with_capacity(n);
    let mut chosen = (0..m)
        .filter(|&j| best[0][j] != UNREACHABLE)
        .min_by_key(|&j| (best[0][j] + u32::from(j > 0), j))
        .ok_or(Error::NotSubsequence)?;
    map.push(chosen);
    for i in 0..n - 1 {
        let target = best[i][chosen];
        let next = (chosen + 1..m)
            .find(|&k| {
                let cost = best[i + 1][k];
                cost != UNREACHABLE && cost + u32::from(k > chosen + 1) == target
            })
            .ok_or(Error::NotSubsequence)?;
        map.push(next);
        chosen = next;
    }
    Ok(Alignment {
        slots: slots_of(&map, m),
        map,
    })
}

/// Pair whose modifier spans are the alignment's insertion gaps.
pub fn pair_from_alignment(
    x: TokenSeq,
    y: TokenSeq,
    id: impl Into<String>,
    language: Language,
    provenance: Provenance,
) -> Result<ExpansionPair> {
    let alignment = align_min_gaps(&x, &y)?;
    ExpansionPair::new(id, language, x, y, alignment.slots, provenance)
}

/// The pair's spans, recovered by alignment when they were not supplied.
pub fn canonical_spans(pair: &ExpansionPair) -> Result<Vec<Span>> {
    if pair.has_spans() {
        Ok(pair.modifier_spans.clone())
    } else {
        Ok(align_min_gaps(&pair.source, &pair.expansion)?.slots)
    }
}

/// The pair with spans filled in by alignment if they were missing.
pub fn canonicalize(pair: &ExpansionPair) -> Result<ExpansionPair> {
    if pair.has_spans() {
        return Ok(pair.clone());
    }
    let mut out = pair.clone();
    out.modifier_spans = canonical_spans(pair)?;
    Ok(out)
}

/// Y positions of the source tokens, i.e. the complement of the spans.
fn source_positions(pair: &ExpansionPair, spans: &[Span]) -> Vec<usize> {
    let mut inserted = vec![false; pair.expansion.len()];
    for s in spans {
        inserted[s.range()].iter_mut().for_each(|b| *b = true);
    }
    (0..pair.expansion.len()).filter(|&j| !inserted[j]).collect()
}

/// For each insertion position, the span inserted there (if any).
fn spans_by_position(pair: &ExpansionPair) -> Result<Vec<Option<Span>>> {
    let spans = canonical_spans(pair)?;
    let positions = source_positions(pair, &spans);
    let mut out = vec![None; positions.len() + 1];
    for s in spans {
        let slot = positions.iter().position(|&p| p == s.end).unwrap_or(positions.len());
        out[slot] = Some(s);
    }
    Ok(out)
}

/// Insertion-position labels for the pipelined locator.
pub fn location_labels(pair: &ExpansionPair) -> Result<LocationLabels> {
    Ok(LocationLabels {
        labels: spans_by_position(pair)?.iter().map(Option::is_some).collect(),
    })
}

/// Joint format: a slot before every source token and at the end; each target
/// slot carries either the inserted run or `null_token`.
pub fn joint_format(pair: &ExpansionPair, null_token: &str) -> Result<InfillTemplatePair> {
    let by_pos = spans_by_position(pair)?;
    let mut input = Vec::with_capacity(2 * by_pos.len());
    let mut target = Vec::with_capacity(2 * by_pos.len());
    for (i, span) in by_pos.iter().enumerate() {
        input.push(Segment::Slot(i + 1));
        if let Some(tok) = pair.source.get(i) {
            input.push(Segment::Literal(TokenSeq::from_vec_unchecked(vec![tok.clone()])));
        }
        target.push(Segment::Slot(i + 1));
        let fill = match span {
            Some(s) => pair.expansion[s.range()].to_vec(),
            None => vec![null_token.to_owned()],
        };
        target.push(Segment::Literal(TokenSeq::from_vec_unchecked(fill)));
    }
    Ok(InfillTemplatePair { input, target })
}

/// Pipelined format: source with a slot at each labelled position; the target
/// lists the inserted runs after their slot markers.
pub fn pipelined_format(pair: &ExpansionPair) -> Result<InfillTemplatePair> {
    let by_pos = spans_by_position(pair)?;
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut k = 0;
    for (i, span) in by_pos.iter().enumerate() {
        if let Some(s) = span {
            k += 1;
            input.push(Segment::Slot(k));
            target.push(Segment::Slot(k));
            target.push(Segment::Literal(TokenSeq::from_vec_unchecked(
                pair.expansion[s.range()].to_vec(),
            )));
        }
        if let Some(tok) = pair.source.get(i) {
            push_literal(&mut input, std::slice::from_ref(tok));
        }
    }
    Ok(InfillTemplatePair { input, target })
}

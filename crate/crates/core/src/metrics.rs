//! Evaluation metrics: fidelity, fertility (Len, N-Pos), corpus BLEU,
//! perplexity, entailment, Diff-Distinct and Info-Gain.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::align::{canonical_spans, check_fidelity};
use crate::error::{Error, Result};
use crate::model::{ExpansionPair, Span, TokenSeq};
use crate::oracle::ScorerHandle;
use crate::template::{push_literal, InfillTemplatePair, MaskFormat, Segment};

/// Total inserted length and number of insertion positions.
pub fn metric_len_npos(pair: &ExpansionPair) -> Result<(usize, usize)> {
    let spans = canonical_spans(pair)?;
    Ok((spans.iter().map(Span::len).sum(), spans.len()))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU-4 with one reference per candidate.
///
/// Clipped n-gram matches and totals are pooled over the corpus. A corpus with
/// no unigram match scores 0; otherwise the k-th zero precision is replaced by
/// `1 / (2^k · total)`. Orders longer than every candidate are left out of the
/// geometric mean, so `corpus_bleu(c, c) == 1` holds for short sentences too.
pub fn corpus_bleu<C: AsRef<[String]>, R: AsRef<[String]>>(candidates: &[C], references: &[R]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        let (cand, reference) = (cand.as_ref(), reference.as_ref());
        c_len += cand.len();
        r_len += reference.len();
        for n in 1..=4 {
            let ref_counts = ngram_counts(reference, n);
            for (g, c) in ngram_counts(cand, n) {
                matches[n - 1] += c.min(ref_counts.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }
    if c_len == 0 {
        return Ok(if r_len == 0 { 1.0 } else { 0.0 });
    }
    if matches[0] == 0 {
        return Ok(0.0);
    }
    let mut zeros = 0;
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..4 {
        if totals[n] == 0 {
            continue;
        }
        let p = if matches[n] == 0 {
            zeros += 1;
            1.0 / (2f64.powi(zeros) * totals[n] as f64)
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_sum += p.ln();
        orders += 1;
    }
    log_sum /= orders as f64;
    let bp = (1.0 - r_len as f64 / c_len as f64).min(0.0).exp();
    Ok(bp * log_sum.exp())
}

/// Mean over n = 1..4 of the share of distinct modifier n-grams absent from X.
/// N-grams are taken within each span and pooled as a set.
pub fn diff_distinct(pair: &ExpansionPair) -> Result<f64> {
    let spans = canonical_spans(pair)?;
    let mut proportions = Vec::with_capacity(4);
    for n in 1..=4 {
        let modifier: BTreeSet<&[String]> = spans
            .iter()
            .flat_map(|s| pair.expansion[s.range()].windows(n))
            .collect();
        if modifier.is_empty() {
            continue;
        }
        let source: HashSet<&[String]> = pair.source.windows(n).collect();
        let novel = modifier.iter().filter(|g| !source.contains(*g)).count();
        proportions.push(novel as f64 / modifier.len() as f64);
    }
    if proportions.is_empty() {
        return Ok(0.0);
    }
    Ok(proportions.iter().sum::<f64>() / proportions.len() as f64)
}

/// The dual templates behind Info-Gain.
///
/// `infill` keeps the modifiers as context and asks for the source fragments;
/// `inherent` asks for the whole source from a single empty slot.
pub fn infill_templates_for_infogain(pair: &ExpansionPair) -> Result<(InfillTemplatePair, InfillTemplatePair)> {
    let spans = canonical_spans(pair)?;
    if spans.is_empty() {
        return Err(Error::NoModifiers);
    }
    let y = &pair.expansion;
    let mut input = Vec::new();
    let mut target = Vec::new();
    let (mut in_slots, mut out_slots) = (0, 0);
    let mut cursor = 0;
    let mut fragment = |input: &mut Vec<Segment>, target: &mut Vec<Segment>, range: std::ops::Range<usize>| {
        if !range.is_empty() {
            in_slots += 1;
            input.push(Segment::Slot(in_slots));
            push_literal(target, &y[range]);
        }
    };
    for s in &spans {
        fragment(&mut input, &mut target, cursor..s.start);
        push_literal(&mut input, &y[s.range()]);
        out_slots += 1;
        target.push(Segment::Slot(out_slots));
        cursor = s.end;
    }
    fragment(&mut input, &mut target, cursor..y.len());
    let inherent = InfillTemplatePair {
        input: vec![Segment::Slot(1)],
        target: vec![Segment::Slot(1), Segment::Literal(pair.source.clone())],
    };
    Ok((InfillTemplatePair { input, target }, inherent))
}

pub fn score_ppl(tokens: &[String], lm: &ScorerHandle) -> Result<f64> {
    Ok(lm.lm(tokens)?.perplexity())
}

pub fn score_nli(premise: &[String], hypothesis: &[String], nli: &ScorerHandle) -> Result<f64> {
    nli.nli(premise, hypothesis)
}

/// (Inherent-PPL / Infill-PPL) × Diff-Distinct; 0 for a pair with no modifiers.
pub fn info_gain(pair: &ExpansionPair, infill: &ScorerHandle, fmt: &MaskFormat) -> Result<f64> {
    let dd = diff_distinct(pair)?;
    let (infill_tpl, inherent_tpl) = match infill_templates_for_infogain(pair) {
        Ok(t) => t,
        Err(Error::NoModifiers) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    if pair.source.is_empty() {
        return Ok(0.0);
    }
    let inherent = infill.infill(&inherent_tpl, fmt)?.perplexity();
    let infill_ppl = infill.infill(&infill_tpl, fmt)?.perplexity();
    Ok(inherent / infill_ppl * dd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub fidelity: bool,
    pub len: Option<usize>,
    pub n_pos: Option<usize>,
    pub ppl: Option<f64>,
    pub nli_e: Option<f64>,
    pub diff_distinct: Option<f64>,
    pub info_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub fidelity_rate: f64,
    pub mean_len: Option<f64>,
    pub mean_n_pos: Option<f64>,
    pub mean_ppl: Option<f64>,
    pub mean_nli_e: Option<f64>,
    pub mean_diff_distinct: Option<f64>,
    pub mean_info_gain: Option<f64>,
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_pair: Vec<PairMetrics>,
    pub corpus: CorpusMetrics,
}

/// Scorers used by [`evaluate_corpus`]; a missing scorer leaves its metric undefined.
#[derive(Debug, Clone, Default)]
pub struct MetricHandles {
    pub lm: Option<ScorerHandle>,
    pub nli: Option<ScorerHandle>,
    pub infill: Option<ScorerHandle>,
}

/// Metrics for one system pair. Span metrics are computed only when X is a subsequence of Y.
pub fn evaluate_pair(pair: &ExpansionPair, handles: &MetricHandles, fmt: &MaskFormat) -> Result<PairMetrics> {
    let (x, y) = (&pair.source, &pair.expansion);
    let fidelity = check_fidelity(x, y);
    let ppl = match &handles.lm {
        Some(lm) if !y.is_empty() => Some(score_ppl(y, lm)?),
        _ => None,
    };
    let nli_e = match &handles.nli {
        Some(nli) => Some(score_nli(y, x, nli)?),
        None => None,
    };
    let mut m = PairMetrics {
        id: pair.id.clone(),
        fidelity,
        len: None,
        n_pos: None,
        ppl,
        nli_e,
        diff_distinct: None,
        info_gain: None,
    };
    if fidelity {
        let canonical = crate::align::canonicalize(pair)?;
        let (len, n_pos) = metric_len_npos(&canonical)?;
        m.len = Some(len);
        m.n_pos = Some(n_pos);
        m.diff_distinct = Some(diff_distinct(&canonical)?);
        if let Some(h) = &handles.infill {
            m.info_gain = Some(info_gain(&canonical, h, fmt)?);
        }
    }
    Ok(m)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Corpus aggregates over per-pair metrics.
pub fn summarize(per_pair: Vec<PairMetrics>, bleu: f64) -> MetricReport {
    let total = per_pair.len().max(1) as f64;
    let corpus = CorpusMetrics {
        fidelity_rate: per_pair.iter().filter(|m| m.fidelity).count() as f64 / total,
        mean_len: mean(per_pair.iter().map(|m| m.len.map(|v| v as f64))),
        mean_n_pos: mean(per_pair.iter().map(|m| m.n_pos.map(|v| v as f64))),
        mean_ppl: mean(per_pair.iter().map(|m| m.ppl)),
        mean_nli_e: mean(per_pair.iter().map(|m| m.nli_e)),
        mean_diff_distinct: mean(per_pair.iter().map(|m| m.diff_distinct)),
        mean_info_gain: mean(per_pair.iter().map(|m| m.info_gain)),
        bleu,
    };
    MetricReport { per_pair, corpus }
}

/// Orders references by the system stream's ids. Every id must appear exactly once on each side.
pub fn match_references<'a>(
    system: &[ExpansionPair],
    reference: &'a [ExpansionPair],
) -> Result<Vec<&'a ExpansionPair>> {
    let mut by_id: HashMap<&str, &ExpansionPair> = HashMap::with_capacity(reference.len());
    for r in reference {
        if by_id.insert(&r.id, r).is_some() {
            return Err(Error::invalid(format!("duplicate reference id {:?}", r.id)));
        }
    }
    let mut seen = HashSet::with_capacity(system.len());
    let mut ordered = Vec::with_capacity(system.len());
    let mut orphans = Vec::new();
    for s in system {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::invalid(format!("duplicate system id {:?}", s.id)));
        }
        match by_id.get(s.id.as_str()) {
            Some(r) => ordered.push(*r),
            None => orphans.push(format!("system:{}", s.id)),
        }
    }
    orphans.extend(
        reference
            .iter()
            .filter(|r| !seen.contains(r.id.as_str()))
            .map(|r| format!("reference:{}", r.id)),
    );
    if !orphans.is_empty() {
        return Err(Error::invalid(format!("unmatched ids: {}", orphans.join(", "))));
    }
    Ok(ordered)
}

pub fn evaluate_corpus(
    system: &[ExpansionPair],
    reference: &[ExpansionPair],
    handles: &MetricHandles,
    fmt: &MaskFormat,
) -> Result<MetricReport> {
    let refs = match_references(system, reference)?;
    let per_pair = system
        .iter()
        .map(|p| evaluate_pair(p, handles, fmt))
        .collect::<Result<Vec<_>>>()?;
    let cands: Vec<&TokenSeq> = system.iter().map(|p| &p.expansion).collect();
    let ys: Vec<&TokenSeq> = refs.iter().map(|p| &p.expansion).collect();
    let bleu = corpus_bleu(&cands, &ys)?;
    Ok(summarize(per_pair, bleu))
}

/// Report columns in presentation order.
pub const REPORT_COLUMNS: [&str; 7] = ["Len", "N-Pos", "PPL", "Nli-E (%)", "Info-Gain", "BLEU (%)", "Fidelity (%)"];

/// Renders corpus aggregates as a fixed-width table; undefined values print as `-`.
pub fn render_report(report: &MetricReport) -> Result<String> {
    if report.per_pair.is_empty() {
        return Err(Error::invalid("empty report"));
    }
    let c = &report.corpus;
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"));
    let cells = [
        cell(c.mean_len),
        cell(c.mean_n_pos),
        cell(c.mean_ppl),
        cell(c.mean_nli_e.map(|v| v * 100.0)),
        cell(c.mean_info_gain),
        cell(Some(c.bleu * 100.0)),
        cell(Some(c.fidelity_rate * 100.0)),
    ];
    let widths: Vec<usize> = REPORT_COLUMNS
        .iter()
        .zip(&cells)
        .map(|(h, v)| h.len().max(v.len()))
        .collect();
    let mut out = String::new();
    let row = |out: &mut String, items: &[&str]| {
        let line: Vec<String> = items
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    };
    row(&mut out, &REPORT_COLUMNS);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    row(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    row(&mut out, &cells.iter().map(String::as_str).collect::<Vec<_>>());
    let _ = writeln!(out, "pairs: {}", report.per_pair.len());
    Ok(out)
}

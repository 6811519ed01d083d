//! Corpus construction: the pair filters, masked-modifier-prediction slot
//! sampling, pretraining masks, and best-candidate selection.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::canonical_spans;
use crate::error::{Error, Result};
use crate::lexicon::{is_punct, Stopwords};
use crate::model::{runs_from_mask, ExpansionPair, Language, Provenance, Span, TaggedText};
use crate::oracle::ScorerHandle;
use crate::template::{push_literal, InfillTemplatePair, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub ppl_threshold: f64,
    pub min_source_len: usize,
    pub max_modifier_len: usize,
    pub total_len_range: [usize; 2],
    pub max_consecutive_punct: usize,
    pub banned_substrings: Vec<String>,
    pub min_positions: usize,
    pub nli_threshold: f64,
    /// Overrides the built-in list for the pair's language.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<Vec<String>>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            ppl_threshold: 200.0,
            min_source_len: 3,
            max_modifier_len: 20,
            total_len_range: [3, 20],
            max_consecutive_punct: 3,
            banned_substrings: vec!["http".into(), "@".into()],
            min_positions: 2,
            nli_threshold: 0.5,
            stopwords: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ppl_threshold.is_finite() && self.ppl_threshold > 0.0) {
            return Err(Error::validation("ppl_threshold", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.nli_threshold) {
            return Err(Error::validation("nli_threshold", "must lie in [0, 1]"));
        }
        let [lo, hi] = self.total_len_range;
        if lo > hi {
            return Err(Error::validation("total_len_range", "min exceeds max"));
        }
        if self.max_modifier_len == 0 {
            return Err(Error::validation("max_modifier_len", "must be positive"));
        }
        Ok(())
    }

    pub fn stopwords_for(&self, language: Language) -> Stopwords {
        match &self.stopwords {
            Some(words) => Stopwords::from_words(words),
            None => Stopwords::builtin(language),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    /// Ids 1..8 of the filters that fired, ascending.
    pub failed_filters: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl_source: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl_expansion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nli_e: Option<f64>,
}

fn longest_punct_run(tokens: &[String]) -> usize {
    let (mut best, mut cur) = (0, 0);
    for t in tokens {
        cur = if is_punct(t) { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

/// Runs all eight filters; every filter is evaluated so the verdict lists all failures.
pub fn apply_filters(
    pair: &ExpansionPair,
    cfg: &FilterConfig,
    stopwords: &Stopwords,
    lm: &ScorerHandle,
    nli: &ScorerHandle,
) -> Result<FilterVerdict> {
    let spans = canonical_spans(pair)?;
    let (x, y) = (&pair.source, &pair.expansion);
    let modifiers: Vec<&[String]> = spans.iter().map(|s| &y[s.range()]).collect();
    let mut failed = BTreeSet::new();

    let ppl_source = if x.is_empty() { None } else { Some(lm.lm(x)?.perplexity()) };
    let ppl_expansion = Some(lm.lm(y)?.perplexity());
    if [ppl_source, ppl_expansion].iter().flatten().any(|&p| p > cfg.ppl_threshold) {
        failed.insert(1);
    }
    if modifiers.iter().any(|m| !m.iter().any(|t| stopwords.is_content(t))) {
        failed.insert(2);
    }
    if x.len() < cfg.min_source_len {
        failed.insert(3);
    }
    if modifiers.iter().any(|m| m.len() > cfg.max_modifier_len) {
        failed.insert(4);
    }
    let banned = |t: &String| {
        let lower = t.to_lowercase();
        cfg.banned_substrings.iter().any(|b| lower.contains(&b.to_lowercase()))
    };
    if modifiers
        .iter()
        .any(|m| longest_punct_run(m) > cfg.max_consecutive_punct || m.iter().any(banned))
    {
        failed.insert(5);
    }
    let total: usize = spans.iter().map(Span::len).sum();
    let [lo, hi] = cfg.total_len_range;
    if !(lo..=hi).contains(&total) {
        failed.insert(6);
    }
    if pair.provenance != Provenance::Iar && !spans.is_empty() && spans.len() < cfg.min_positions {
        failed.insert(7);
    }
    let nli_e = if x.is_empty() { None } else { Some(nli.nli(y, x)?) };
    if nli_e.is_some_and(|p| p < cfg.nli_threshold) {
        failed.insert(8);
    }

    let failed_filters: Vec<u8> = failed.into_iter().collect();
    Ok(FilterVerdict {
        keep: failed_filters.is_empty(),
        failed_filters,
        ppl_source,
        ppl_expansion,
        nli_e,
    })
}

/// Which side of an anchor token counts as adjacent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorSide {
    #[default]
    Before,
    After,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub repeats: usize,
    pub anchor_weight: f64,
    pub base_weight: f64,
    pub anchor_side: AnchorSide,
    /// POS prefixes marking anchors; defaults depend on the language.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_prefixes: Option<Vec<String>>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            k_min: 3,
            k_max: 5,
            repeats: 5,
            anchor_weight: 4.0,
            base_weight: 1.0,
            anchor_side: AnchorSide::Before,
            anchor_prefixes: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::validation("k", "need 1 <= k_min <= k_max"));
        }
        if self.repeats == 0 {
            return Err(Error::validation("repeats", "must be at least 1"));
        }
        for (field, w) in [("anchor_weight", self.anchor_weight), ("base_weight", self.base_weight)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::validation(field, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn prefixes(&self, language: Language) -> Vec<String> {
        match (&self.anchor_prefixes, language) {
            (Some(p), _) => p.clone(),
            (None, Language::En) => vec!["NN".into(), "VB".into()],
            (None, Language::Zh) => vec!["n".into(), "v".into()],
        }
    }
}

/// Per-record generator derived from the run seed, a purpose tag, and the record id.
pub fn record_rng(seed: u64, purpose: &str, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update([0]);
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Weight of each of the |tokens| + 1 insertion slots.
pub fn slot_weights(text: &TaggedText, cfg: &SamplerConfig, language: Language) -> Result<Vec<f64>> {
    let pos = text
        .pos
        .as_ref()
        .ok_or_else(|| Error::invalid("pos required for slot sampling"))?;
    let prefixes = cfg.prefixes(language);
    let anchor = |i: usize| pos.get(i).is_some_and(|t| prefixes.iter().any(|p| t.starts_with(p.as_str())));
    let n = text.tokens.len();
    let entities = text.entities.as_deref().unwrap_or(&[]);
    Ok((0..=n)
        .map(|slot| {
            if entities.iter().any(|e| e.start < slot && slot < e.end) {
                return 0.0;
            }
            let before = anchor(slot);
            let after = slot > 0 && anchor(slot - 1);
            let adjacent = match cfg.anchor_side {
                AnchorSide::Before => before,
                AnchorSide::After => after,
                AnchorSide::Both => before || after,
            };
            if adjacent {
                cfg.anchor_weight
            } else {
                cfg.base_weight
            }
        })
        .collect())
}

/// Chooses `k` distinct indices, each draw proportional to the remaining weights.
fn weighted_without_replacement<R: Rng>(rng: &mut R, weights: &[f64], k: usize) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &wi) in w.iter().enumerate() {
            if wi <= 0.0 {
                continue;
            }
            pick = Some(i);
            if r < wi {
                break;
            }
            r -= wi;
        }
        let i = pick.expect("positive total implies a positive weight");
        out.push(i);
        w[i] = 0.0;
    }
    out.sort_unstable();
    out
}

/// Source tokens with mask slots at the given insertion positions; the target lists the slots.
pub fn template_with_slots(tokens: &[String], slots: &[usize]) -> InfillTemplatePair {
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut next = 0;
    for (k, &s) in slots.iter().enumerate() {
        push_literal(&mut input, &tokens[next..s]);
        input.push(Segment::Slot(k + 1));
        target.push(Segment::Slot(k + 1));
        next = s;
    }
    push_literal(&mut input, &tokens[next..]);
    InfillTemplatePair { input, target }
}

/// Samples `cfg.repeats` slot layouts for masked modifier prediction.
pub fn sample_mmp_templates(
    text: &TaggedText,
    id: &str,
    language: Language,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<Vec<InfillTemplatePair>> {
    cfg.validate()?;
    let weights = slot_weights(text, cfg, language)?;
    let insertable = weights.iter().filter(|&&w| w > 0.0).count();
    if insertable < cfg.k_min {
        return Err(Error::invalid("not enough insertable positions"));
    }
    let mut rng = record_rng(seed, "mmp", id);
    Ok((0..cfg.repeats)
        .map(|_| {
            let k = rng.random_range(cfg.k_min..=cfg.k_max).min(insertable);
            let slots = weighted_without_replacement(&mut rng, &weights, k);
            template_with_slots(&text.tokens, &slots)
        })
        .collect())
}

/// Index of the lowest-perplexity candidate; the first one wins ties.
pub fn select_best_expansion<S: AsRef<[String]>>(candidates: &[S], lm: &ScorerHandle) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let ppl = lm.lm(c.as_ref())?.perplexity();
        if ppl < best.1 {
            best = (i, ppl);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub rate: f64,
    pub span_len: [usize; 2],
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            rate: 0.25,
            span_len: [1, 10],
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::validation("rate", "must lie in [0, 1]"));
        }
        let [lo, hi] = self.span_len;
        if lo == 0 || lo > hi {
            return Err(Error::validation("span_len", "need 1 <= min <= max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainMask {
    pub template: InfillTemplatePair,
    /// Masked runs over the original tokens.
    pub masked: Vec<Span>,
    /// Spans taken from `hq_modifiers`, in the order they were masked.
    pub hq_masked: Vec<Span>,
}

impl PretrainMask {
    pub fn masked_tokens(&self) -> usize {
        self.masked.iter().map(Span::len).sum()
    }
}

fn free_runs(mask: &[bool]) -> Vec<Span> {
    runs_from_mask(&mask.iter().map(|m| !m).collect::<Vec<_>>())
}

/// Masks high-quality modifier spans first, then random spans, up to `ceil(rate · N)` tokens.
///
/// Random span lengths are drawn from `span_len` and clamped to the remaining
/// budget. A span is placed uniformly among the starts where it fits; if none
/// exists it shrinks into the largest free run.
pub fn mask_for_pretraining(text: &TaggedText, id: &str, seed: u64, cfg: &PretrainConfig) -> Result<PretrainMask> {
    cfg.validate()?;
    let tokens = &text.tokens;
    let n = tokens.len();
    if n == 0 {
        return Err(Error::invalid("empty input"));
    }
    let budget = (cfg.rate * n as f64).ceil() as usize;
    let mut mask = vec![false; n];
    let mut used = 0;
    let mut hq_masked = Vec::new();

    let mut hq = text.hq_modifiers.clone().unwrap_or_default();
    hq.sort();
    for s in hq {
        if used + s.len() <= budget && !mask[s.range()].iter().any(|&m| m) {
            mask[s.range()].iter_mut().for_each(|m| *m = true);
            used += s.len();
            hq_masked.push(s);
        }
    }

    let mut rng = record_rng(seed, "pretrain", id);
    let [lo, hi] = cfg.span_len;
    while used < budget {
        let len = rng.random_range(lo..=hi).min(budget - used);
        let runs = free_runs(&mask);
        let starts: Vec<usize> = runs
            .iter()
            .filter(|r| r.len() >= len)
            .flat_map(|r| r.start..=r.end - len)
            .collect();
        let span = if starts.is_empty() {
            match runs.iter().max_by_key(|r| (r.len(), std::cmp::Reverse(r.start))) {
                Some(r) => *r,
                None => break,
            }
        } else {
            let s = starts[rng.random_range(0..starts.len())];
            Span { start: s, end: s + len }
        };
        mask[span.range()].iter_mut().for_each(|m| *m = true);
        used += span.len();
    }

    let masked = runs_from_mask(&mask);
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut next = 0;
    for (k, s) in masked.iter().enumerate() {
        push_literal(&mut input, &tokens[next..s.start]);
        input.push(Segment::Slot(k + 1));
        target.push(Segment::Slot(k + 1));
        push_literal(&mut target, &tokens[s.range()]);
        next = s.end;
    }
    push_literal(&mut input, &tokens[next..]);
    Ok(PretrainMask {
        template: InfillTemplatePair { input, target },
        masked,
        hq_masked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TokenSeq;
    use crate::ngram::NgramModel;
    use crate::oracle::ScorerKind;
    use std::sync::Arc;

    fn t(s: &str) -> TokenSeq {
        TokenSeq::from_whitespace(s)
    }

    fn tagged(s: &str) -> TaggedText {
        let (toks, tags): (Vec<String>, Vec<String>) = s
            .split_whitespace()
            .map(|i| {
                let (a, b) = i.rsplit_once('/').unwrap();
                (a.to_owned(), b.to_owned())
            })
            .unzip();
        TaggedText::new(TokenSeq::new(toks).unwrap()).with_pos(tags).unwrap()
    }

    #[test]
    fn single_entity_has_two_slots() {
        let mut text = tagged("new/NNP york/NNP city/NNP");
        text.entities = Some(vec![Span { start: 0, end: 3 }]);
        let err = sample_mmp_templates(&text, "e", Language::En, 1, &SamplerConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "not enough insertable positions");
    }

    #[test]
    fn weights_follow_anchor_side() {
        let text = tagged("the/DT dog/NN runs/VBZ fast/RB");
        let cfg = SamplerConfig::default();
        assert_eq!(slot_weights(&text, &cfg, Language::En).unwrap(), vec![1.0, 4.0, 4.0, 1.0, 1.0]);
        let both = SamplerConfig {
            anchor_side: AnchorSide::Both,
            ..cfg
        };
        assert_eq!(slot_weights(&text, &both, Language::En).unwrap(), vec![1.0, 4.0, 4.0, 4.0, 1.0]);
    }

    #[test]
    fn replay_is_identical() {
        let text = tagged("the/DT dog/NN runs/VBZ fast/RB to/TO the/DT park/NN");
        let cfg = SamplerConfig::default();
        let a = sample_mmp_templates(&text, "r1", Language::En, 9, &cfg).unwrap();
        let b = sample_mmp_templates(&text, "r1", Language::En, 9, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for tpl in &a {
            assert!((3..=5).contains(&tpl.input_slot_count()));
        }
    }

    #[test]
    fn pretrain_hq_first_then_one_token() {
        let toks: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let mut text = TaggedText::new(TokenSeq::new(toks).unwrap());
        text.hq_modifiers = Some(vec![Span { start: 5, end: 9 }]);
        let m = mask_for_pretraining(&text, "x", 3, &PretrainConfig::default()).unwrap();
        assert_eq!(m.hq_masked, vec![Span { start: 5, end: 9 }]);
        assert_eq!(m.masked_tokens(), 5);
        assert_eq!(m.template.splice(None).unwrap(), text.tokens);
    }

    #[test]
    fn zero_rate_masks_nothing() {
        let text = TaggedText::new(t("a b c"));
        let cfg = PretrainConfig {
            rate: 0.0,
            ..Default::default()
        };
        let m = mask_for_pretraining(&text, "x", 0, &cfg).unwrap();
        assert!(m.masked.is_empty());
        assert!(m.template.target.is_empty());
        assert_eq!(m.template.input, vec![Segment::Literal(t("a b c"))]);
    }

    #[test]
    fn select_best_prefers_seen_sentence() {
        let lm = ScorerHandle::ngram(
            ScorerKind::Lm,
            Arc::new(NgramModel::train(&[t("the dog runs to the park")], 3, 0.01).unwrap()),
        );
        let cands = [t("park the to runs dog the"), t("the dog runs to the park")];
        assert_eq!(select_best_expansion(&cands, &lm).unwrap(), 1);
        assert_eq!(select_best_expansion(&[t("a"), t("a")], &lm).unwrap(), 0);
        assert!(select_best_expansion::<TokenSeq>(&[], &lm).is_err());
    }

    #[test]
    fn punct_only_modifier() {
        let m = [",", ",", ",", ","].map(String::from);
        assert_eq!(longest_punct_run(&m), 4);
        assert!(!Stopwords::builtin(Language::En).is_content(","));
    }

    #[test]
    fn unexpanded_pair_fails_length_not_positions() {
        let corpus = [t("the cat sat on the mat")];
        let lm = ScorerHandle::ngram(ScorerKind::Lm, Arc::new(NgramModel::train(&corpus, 2, 1.0).unwrap()));
        let sw = Stopwords::builtin(Language::En);
        let nli = ScorerHandle::overlap(sw.clone());
        let same = ExpansionPair::new("s", Language::En, corpus[0].clone(), corpus[0].clone(), vec![], Provenance::Nsc)
            .unwrap();
        let v = apply_filters(&same, &FilterConfig::default(), &sw, &lm, &nli).unwrap();
        assert_eq!(v.failed_filters, vec![6]);
        assert_eq!(v.nli_e, Some(1.0));
    }
}

//! Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero on any failure.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use expanse_core::align::{align_min_gaps, canonicalize, joint_format, location_labels, DEFAULT_NULL_TOKEN};
use expanse_core::construct::{
    apply_filters, mask_for_pretraining, sample_mmp_templates, FilterConfig, PretrainConfig, SamplerConfig,
};
use expanse_core::hearst::{builtin_patterns, find_matches, match_to_pair};
use expanse_core::lexicon::Stopwords;
use expanse_core::metrics::{
    corpus_bleu, diff_distinct, evaluate_corpus, info_gain, metric_len_npos, render_report, MetricHandles,
};
use expanse_core::model::{remove_spans, runs_from_mask, write_jsonl_line};
use expanse_core::oracle::ScoringBackend;
use expanse_core::treebank::{parse_tree, prune_english, tree_to_pair};
use expanse_core::*;

type Check = std::result::Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn ctp_golden() -> Check {
    let tree = parse_tree(HEART_TREE).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = prune_english(&tree, 10).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(out.skeleton.joined() == "i love you", "skeleton {:?}", out.skeleton.joined());
    let full = toks("i truly love you with all my heart");
    let pruned: Vec<String> = out.pruned_spans.iter().map(|s| full[s.range()].join(" ")).collect();
    ensure!(pruned == ["truly", "with all my heart"], "pruned {pruned:?}");
    ensure!(took < Duration::from_millis(1), "took {took:?}");
    Ok(())
}

fn hearst_golden() -> Check {
    let text = tagged(MEAT);
    let ms = find_matches(&text, &builtin_patterns()).map_err(|e| e.to_string())?;
    ensure!(ms.len() == 1, "{} matches", ms.len());
    let p = match_to_pair(&text, &ms[0], "meat", Language::En).map_err(|e| e.to_string())?;
    let modifier = surface_modifiers(&p).iter().map(|m| m.joined()).collect::<Vec<_>>();
    ensure!(modifier == ["a wide range of meat , including"], "modifier {modifier:?}");
    ensure!(p.source.joined() == "we offer our buyers pork , beef , and lamb .", "X {:?}", p.source.joined());
    Ok(())
}

/// Fewest gaps over every embedding of x in y.
fn exhaustive_gaps(x: &[u8], y: &[u8]) -> Option<usize> {
    fn go(x: &[u8], y: &[u8], from: usize, mask: &mut Vec<bool>, best: &mut Option<usize>) {
        if x.is_empty() {
            let mut m = mask.clone();
            m[from..].iter_mut().for_each(|b| *b = true);
            let g = runs_from_mask(&m).len();
            *best = Some(best.map_or(g, |b| b.min(g)));
            return;
        }
        for j in from..y.len() {
            if y[j] == x[0] {
                mask[from..j].iter_mut().for_each(|b| *b = true);
                mask[j] = false;
                go(&x[1..], y, j + 1, mask, best);
                mask[from..j].iter_mut().for_each(|b| *b = false);
            }
        }
    }
    let mut best = None;
    go(x, y, 0, &mut vec![false; y.len()], &mut best);
    best
}

fn alignment_exhaustive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    for case in 0..10_000 {
        let n = rng.random_range(0..=12);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let x: Vec<u8> = y.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        let ys: Vec<String> = y.iter().map(|c| c.to_string()).collect();
        let xs: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        let dp = align_min_gaps(&xs, &ys).map_err(|e| format!("case {case}: {e}"))?;
        let want = exhaustive_gaps(&x, &y).ok_or("no embedding")?;
        ensure!(dp.slots.len() == want, "case {case}: dp {} vs {want}", dp.slots.len());
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(())
}

fn worked_pair() -> Check {
    let p = worked_pair_pair();
    let (len, n_pos) = metric_len_npos(&p).map_err(|e| e.to_string())?;
    ensure!(n_pos == 4, "n_pos {n_pos}");
    ensure!(len == p.expansion.len() - p.source.len(), "len {len}");
    let labels = location_labels(&p).map_err(|e| e.to_string())?;
    ensure!(labels.count() == 4, "{} labels", labels.count());
    let joint = joint_format(&p, DEFAULT_NULL_TOKEN).map_err(|e| e.to_string())?;
    ensure!(joint.input_slot_count() == p.source.len() + 1, "{} slots", joint.input_slot_count());
    let filled = joint.target_literals().filter(|l| l.as_slice() != [DEFAULT_NULL_TOKEN]).count();
    ensure!(filled == 4, "{filled} non-null targets");
    Ok(())
}

/// Infill stub charging the same NLL to every target token.
struct FlatInfill;

impl ScoringBackend for FlatInfill {
    fn infill(&self, t: &InfillTemplatePair, _: &MaskFormat) -> Result<LmScore> {
        let n: usize = t.target_literals().map(|l| l.len()).sum();
        Ok(LmScore { nll_sum: 1.7 * n as f64, token_count: n })
    }
}

fn metric_identities() -> Check {
    let corpus = [toks(SPORT_Y), toks("a b c"), toks("the cat sat on the mat")];
    let b = corpus_bleu(&corpus, &corpus).map_err(|e| e.to_string())?;
    ensure!(close(b, 1.0, 1e-9), "bleu {b}");

    let pair = |x: &str, y: &str| {
        expanse_core::align::pair_from_alignment(toks(x), toks(y), "p", Language::En, Provenance::Ref).unwrap()
    };
    let disjoint = pair("a b c", "a x y b z c");
    let verbatim = pair("a b c", "a b a b c c");
    let dd1 = diff_distinct(&disjoint).map_err(|e| e.to_string())?;
    let dd0 = diff_distinct(&verbatim).map_err(|e| e.to_string())?;
    ensure!(dd1 == 1.0 && dd0 == 0.0, "diff_distinct {dd1} / {dd0}");

    let stub = ScorerHandle::custom(ScorerKind::Infill, Arc::new(FlatInfill));
    for p in [disjoint, verbatim, worked_pair_pair()] {
        let ig = info_gain(&p, &stub, &MaskFormat::default()).map_err(|e| e.to_string())?;
        let dd = diff_distinct(&p).map_err(|e| e.to_string())?;
        ensure!(close(ig, dd, 1e-9), "info_gain {ig} vs diff_distinct {dd}");
    }

    let u = NgramModel::uniform(["a", "b", "c", "d"], 3).map_err(|e| e.to_string())?;
    let ppl = u.nll(&toks("d a zz b")).map_err(|e| e.to_string())?.perplexity();
    ensure!(close(ppl, u.vocab_size() as f64, 1e-6), "uniform ppl {ppl} vs {}", u.vocab_size());
    Ok(())
}

fn lm_hand_values() -> Check {
    let k = 0.01;
    let m = NgramModel::train(&[toks("a b"), toks("a c")], 2, k).map_err(|e| e.to_string())?;
    // Vocabulary {a, b, c, <unk>, <eos>}.
    let v = 5.0;
    ensure!(m.vocab_size() == 5, "vocab {}", m.vocab_size());
    let want = [
        (vec!["a"], "b", (1.0 + k) / (2.0 + v * k)),
        (vec!["a"], "a", k / (2.0 + v * k)),
        (vec!["<bos>"], "a", (2.0 + k) / (2.0 + v * k)),
        (vec!["b"], "<eos>", (1.0 + k) / (1.0 + v * k)),
        (vec!["c"], "b", k / (1.0 + v * k)),
        (vec!["zz"], "a", 1.0 / v),
    ];
    for (ctx, next, p) in &want {
        let got = m.prob(ctx, next);
        ensure!(close(got, *p, 1e-12), "p({next} | {ctx:?}) = {got}, want {p}");
    }
    let single = NgramModel::train(&[toks("a b")], 2, k).map_err(|e| e.to_string())?;
    let got = single.prob(&["a"], "b");
    ensure!(close(got, (1.0 + k) / (1.0 + 4.0 * k), 1e-12), "single-sentence p(b | a) = {got}");
    let nll = m.nll(&toks("a c")).map_err(|e| e.to_string())?;
    let hand = -((2.0 + k) / (2.0 + v * k) * (1.0 + k) / (2.0 + v * k) * (1.0 + k) / (1.0 + v * k)).ln();
    ensure!(close(nll.nll_sum, hand, 1e-12) && nll.token_count == 3, "nll {nll:?}");

    let outcomes: Vec<&str> = m.outcomes().collect();
    let mut contexts: Vec<Vec<&str>> = m.contexts().collect();
    contexts.push(vec!["zz"]);
    for ctx in &contexts {
        let s: f64 = outcomes.iter().map(|o| m.prob(ctx, o)).sum();
        ensure!(close(s, 1.0, 1e-9), "context {ctx:?} sums to {s}");
    }
    Ok(())
}

/// LM stub: perplexity 1000 when "zzz" appears, 10 otherwise.
struct StubLm;

impl ScoringBackend for StubLm {
    fn lm(&self, tokens: &[String]) -> Result<LmScore> {
        let per = if tokens.iter().any(|t| t == "zzz") { 1000f64 } else { 10f64 };
        Ok(LmScore { nll_sum: per.ln() * tokens.len() as f64, token_count: tokens.len() })
    }
}

/// NLI stub: low entailment when the premise says "contradiction".
struct StubNli;

impl ScoringBackend for StubNli {
    fn nli(&self, premise: &[String], _: &[String]) -> Result<f64> {
        Ok(if premise.iter().any(|t| t == "contradiction") { 0.1 } else { 0.9 })
    }
}

fn filter_suite() -> Check {
    const X: &str = "the cat sat on the mat";
    let long: String = (0..21).map(|i| format!("w{i} ")).collect();
    let cases: Vec<(&str, String, Provenance, Vec<u8>)> = vec![
        (X, "the fat grey cat sat very quietly on the mat".into(), Provenance::Nsc, vec![]),
        (X, "the zzz grey cat sat very quietly on the mat".into(), Provenance::Nsc, vec![1]),
        (X, "the cat , which sat on , the mat".into(), Provenance::Nsc, vec![2]),
        ("cat sat", "the fat grey cat sat very quietly".into(), Provenance::Nsc, vec![3]),
        (X, format!("the cat {long}sat quietly on the mat"), Provenance::Nsc, vec![4, 6]),
        (X, "the fat http://x.com cat sat very quietly on the mat".into(), Provenance::Nsc, vec![5]),
        (X, "the fat cat sat quietly on the mat".into(), Provenance::Nsc, vec![6]),
        (X, "the fat grey old cat sat on the mat".into(), Provenance::Nsc, vec![7]),
        (X, "the fat grey old cat sat on the mat".into(), Provenance::Iar, vec![]),
        (X, "the contradiction grey cat sat very quietly on the mat".into(), Provenance::Nsc, vec![8]),
    ];
    let cfg = FilterConfig::default();
    let sw = Stopwords::builtin(Language::En);
    let lm = ScorerHandle::custom(ScorerKind::Lm, Arc::new(StubLm));
    let nli = ScorerHandle::custom(ScorerKind::Nli, Arc::new(StubNli));
    let mut fired = [false; 9];
    for (i, (x, y, prov, want)) in cases.iter().enumerate() {
        let p = expanse_core::align::pair_from_alignment(toks(x), toks(y), format!("f{i}"), Language::En, *prov)
            .map_err(|e| e.to_string())?;
        let v = apply_filters(&p, &cfg, &sw, &lm, &nli).map_err(|e| e.to_string())?;
        ensure!(&v.failed_filters == want, "pair {i}: failed {:?}, want {want:?}", v.failed_filters);
        ensure!(v.keep == want.is_empty(), "pair {i}: keep {}", v.keep);
        want.iter().for_each(|&f| fired[f as usize] = true);
    }
    ensure!(fired[1..].iter().all(|&f| f), "not every filter fired: {fired:?}");
    Ok(())
}

fn mmp_sampling() -> Check {
    let text = table5_zh();
    let cfg = SamplerConfig { repeats: 10_000, ..SamplerConfig::default() };
    let draw = || sample_mmp_templates(&text, "table5", Language::Zh, 42, &cfg).map_err(|e| e.to_string());
    let ts = draw()?;
    ensure!(ts.len() == 10_000, "{} templates", ts.len());
    // Slots before a noun or verb, excluding the one inside the place-name entity.
    let anchors = [0usize, 2, 4, 6, 8, 10];
    let plain = [1usize, 5, 7, 9, 11];
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &ts {
        let k = t.input_slot_count();
        ensure!((3..=5).contains(&k), "{k} masks");
        let mut at = 0;
        for seg in &t.input {
            match seg {
                Segment::Literal(l) => at += l.len(),
                Segment::Slot(_) => *freq.entry(at).or_default() += 1,
            }
        }
    }
    ensure!(!freq.contains_key(&3), "{} masks inside an entity", freq[&3]);
    let mean = |slots: &[usize]| slots.iter().map(|s| freq.get(s).copied().unwrap_or(0)).sum::<usize>() as f64 / slots.len() as f64;
    let ratio = mean(&anchors) / mean(&plain);
    ensure!(ratio >= 2.0, "anchor ratio {ratio:.3}");
    let bytes = |ts: &[InfillTemplatePair]| {
        let mut b = Vec::new();
        for (i, t) in ts.iter().enumerate() {
            write_jsonl_line(&mut b, &TemplateRecord::new(format!("table5#{i}"), t, &MaskFormat::default())).unwrap();
        }
        b
    };
    ensure!(bytes(&ts) == bytes(&draw()?), "replay differs");
    Ok(())
}

fn pretraining_masks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = PretrainConfig::default();
    for case in 0..1000 {
        let n = rng.random_range(1..80);
        let tokens: Vec<String> = (0..n).map(|i| format!("t{}", i % 13)).collect();
        let mut text = TaggedText::new(TokenSeq::new(tokens).unwrap());
        let mut hq: Vec<Span> = Vec::new();
        for _ in 0..rng.random_range(0..4) {
            let s = rng.random_range(0..n);
            let e = (s + rng.random_range(1..6)).min(n);
            let span = Span { start: s, end: e };
            if hq.iter().all(|h| !h.overlaps(&span)) {
                hq.push(span);
            }
        }
        text.hq_modifiers = Some(hq.clone());
        let m = mask_for_pretraining(&text, &format!("r{case}"), 3, &cfg).map_err(|e| e.to_string())?;
        let budget = (cfg.rate * n as f64).ceil() as usize;
        ensure!(m.masked_tokens() <= budget + 9, "case {case}: {} masked of {n}", m.masked_tokens());
        hq.sort();
        let mut used = 0;
        let mut expect = Vec::new();
        for s in hq {
            if used + s.len() <= budget {
                used += s.len();
                expect.push(s);
            }
        }
        ensure!(m.hq_masked == expect, "case {case}: hq {:?} vs {expect:?}", m.hq_masked);
        let spliced = m.template.splice(None).map_err(|e| e.to_string())?;
        ensure!(spliced == text.tokens, "case {case}: splice differs");
        ensure!(remove_spans(&text.tokens, &m.masked).len() == n - m.masked_tokens(), "case {case}: overlap");
    }
    Ok(())
}

/// A deterministic corpus of bracketed English trees.
fn fixture_trees(n: usize) -> Vec<String> {
    const NOUNS: [&str; 8] = ["cat", "dog", "teacher", "city", "river", "book", "garden", "song"];
    const VERBS: [&str; 6] = ["saw", "liked", "found", "painted", "read", "visited"];
    const ADJS: [&str; 5] = ["old", "quiet", "bright", "small", "famous"];
    const ADVS: [&str; 4] = ["often", "quickly", "never", "happily"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pick = |xs: &[&'static str]| xs[rng.random_range(0..xs.len())];
    (0..n)
        .map(|_| {
            let subj = format!("(NP (DT the) (NN {}))", pick(&NOUNS));
            let adv = if pick(&["y", "n"]) == "y" { format!("(ADVP (RB {})) ", pick(&ADVS)) } else { String::new() };
            let obj = if pick(&["y", "n"]) == "y" {
                format!("(NP (DT a) (ADJP (JJ {})) (NN {}))", pick(&ADJS), pick(&NOUNS))
            } else {
                format!("(NP (DT a) (NN {}))", pick(&NOUNS))
            };
            let pp = if pick(&["y", "n"]) == "y" {
                format!(" (PP (IN near) (NP (DT the) (NN {})))", pick(&NOUNS))
            } else {
                String::new()
            };
            format!("(ROOT (S {subj} {adv}(VP (VBD {}) {obj}{pp}) (. .)))", pick(&VERBS))
        })
        .collect()
}

fn pipeline_bytes(trees: &[String]) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut pairs = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        let tree = parse_tree(t).map_err(|e| e.to_string())?;
        let p = tree_to_pair(&tree, Language::En, format!("t{i}"), 10).map_err(|e| e.to_string())?;
        pairs.push(canonicalize(&p).map_err(|e| e.to_string())?);
    }
    let model = NgramModel::train(&pairs.iter().map(|p| p.expansion.clone()).collect::<Vec<_>>(), 3, 0.01)
        .map_err(|e| e.to_string())?;
    let model = Arc::new(model);
    let lm = ScorerHandle::ngram(ScorerKind::Lm, Arc::clone(&model));
    let nli = ScorerHandle::overlap(Stopwords::builtin(Language::En));
    let cfg = FilterConfig { min_positions: 1, ..FilterConfig::default() };
    let sw = cfg.stopwords_for(Language::En);
    let mut kept = Vec::new();
    for p in &pairs {
        let v = apply_filters(p, &cfg, &sw, &lm, &nli).map_err(|e| e.to_string())?;
        write_jsonl_line(&mut out, &v).map_err(|e| e.to_string())?;
        if v.keep {
            kept.push(p.clone());
        }
    }
    write_pairs(&kept, &mut out).map_err(|e| e.to_string())?;
    let handles = MetricHandles {
        lm: Some(lm),
        nli: Some(nli),
        infill: Some(ScorerHandle::ngram(ScorerKind::Infill, model)),
    };
    let report = evaluate_corpus(&pairs, &pairs, &handles, &MaskFormat::default()).map_err(|e| e.to_string())?;
    write_jsonl_line(&mut out, &report).map_err(|e| e.to_string())?;
    out.extend(render_report(&report).map_err(|e| e.to_string())?.bytes());
    Ok(out)
}

fn end_to_end() -> Check {
    let trees = fixture_trees(1000);
    let start = Instant::now();
    let first = pipeline_bytes(&trees)?;
    let took = start.elapsed();
    let second = pipeline_bytes(&trees)?;
    ensure!(first == second, "rerun differs");
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("ctp golden prune", ctp_golden),
        ("hearst meat golden match", hearst_golden),
        ("alignment dp vs exhaustive, 10k pairs", alignment_exhaustive),
        ("worked pair: n-pos, len, labels, joint format", worked_pair),
        ("metric identities", metric_identities),
        ("built-in lm hand values and normalization", lm_hand_values),
        ("filter suite: all eight filters and iar exemption", filter_suite),
        ("mmp sampling: mask counts, entities, anchor ratio, replay", mmp_sampling),
        ("pretraining masks: bound, hq priority, round trip", pretraining_masks),
        ("end-to-end determinism on 1000 records", end_to_end),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        match check() {
            Ok(()) => println!("PASS  {name}"),
            Err(why) => {
                failures += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

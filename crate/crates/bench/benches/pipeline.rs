use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use expanse_core::align::{align_min_gaps, joint_format, pair_from_alignment};
use expanse_core::construct::{mask_for_pretraining, sample_mmp_templates, PretrainConfig, SamplerConfig};
use expanse_core::hearst::{builtin_patterns, find_matches};
use expanse_core::metrics::corpus_bleu;
use expanse_core::treebank::{parse_tree, prune_english};
use expanse_core::{Language, NgramModel, Provenance, TaggedText, TokenSeq};

const TREE: &str = "(ROOT (S (NP (PRP i)) (ADVP (RB truly)) (VP (VBP love) (NP (PRP you)) \
     (PP (IN with) (NP (PDT all) (PRP$ my) (NN heart))))))";
const X: &str = "my favorite sport is basketball";
const Y: &str = "when it comes to sports , my absolute favorite sport of all time is basketball , \
     and i 'm a huge fan of james";

fn toks(s: &str) -> TokenSeq {
    TokenSeq::from_whitespace(s)
}

fn tagged(s: &str) -> TaggedText {
    let (t, p): (Vec<String>, Vec<String>) = s
        .split_whitespace()
        .map(|i| {
            let (a, b) = i.rsplit_once('/').unwrap();
            (a.to_owned(), b.to_owned())
        })
        .unzip();
    TaggedText::new(TokenSeq::new(t).unwrap()).with_pos(p).unwrap()
}

fn pruning(c: &mut Criterion) {
    c.bench_function("parse_and_prune_heart_sentence", |b| {
        b.iter(|| prune_english(&parse_tree(black_box(TREE)).unwrap(), 10).unwrap())
    });
}

fn alignment(c: &mut Criterion) {
    let (x, y) = (toks(X), toks(Y));
    c.bench_function("align_min_gaps_worked_pair", |b| b.iter(|| align_min_gaps(black_box(&x), black_box(&y)).unwrap()));
    let long_y: Vec<String> = (0..400).map(|i| format!("w{}", i % 17)).collect();
    let long_x: Vec<String> = long_y.iter().step_by(3).cloned().collect();
    c.bench_function("align_min_gaps_400", |b| b.iter(|| align_min_gaps(&long_x, &long_y).unwrap()));
    let pair = pair_from_alignment(x, y, "t", Language::En, Provenance::Ref).unwrap();
    c.bench_function("joint_format_worked_pair", |b| b.iter(|| joint_format(&pair, "<null>").unwrap()));
}

fn hearst(c: &mut Criterion) {
    let text = tagged(
        "we/PRP offer/VBP our/PRP$ buyers/NNS a/DT wide/JJ range/NN of/IN meat/NN ,/, \
         including/VBG pork/NN ,/, beef/NN ,/, and/CC lamb/NN ./.",
    );
    let patterns = builtin_patterns();
    c.bench_function("hearst_meat", |b| b.iter(|| find_matches(black_box(&text), &patterns).unwrap()));
}

fn language_model(c: &mut Criterion) {
    let corpus: Vec<TokenSeq> = (0..500)
        .map(|i| toks(&format!("the w{} saw a w{} near the w{} .", i % 31, i % 7, i % 13)))
        .collect();
    c.bench_function("ngram_train_500", |b| b.iter(|| NgramModel::train(&corpus, 3, 0.01).unwrap()));
    let m = NgramModel::train(&corpus, 3, 0.01).unwrap();
    let probe = toks(Y);
    c.bench_function("ngram_nll", |b| b.iter(|| m.nll(black_box(&probe)).unwrap()));
    c.bench_function("corpus_bleu_500", |b| b.iter(|| corpus_bleu(&corpus, &corpus).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let mut zh = tagged("林丹/nr 在/p 伦敦/ns 奥运会/n 击败/v 了/u 李宗伟/nr ，/w 获得/v 了/u 奥运冠军/n");
    zh.entities = Some(vec![
        expanse_core::Span { start: 0, end: 1 },
        expanse_core::Span { start: 2, end: 4 },
        expanse_core::Span { start: 6, end: 7 },
    ]);
    let cfg = SamplerConfig::default();
    c.bench_function("mmp_sample_5", |b| {
        b.iter(|| sample_mmp_templates(&zh, "zh", Language::Zh, black_box(1), &cfg).unwrap())
    });
    let text = TaggedText::new(toks(Y));
    let pc = PretrainConfig::default();
    c.bench_function("pretrain_mask", |b| b.iter(|| mask_for_pretraining(&text, "y", black_box(1), &pc).unwrap()));
}

criterion_group!(benches, pruning, alignment, hearst, language_model, sampling);
criterion_main!(benches);

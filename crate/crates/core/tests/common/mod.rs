#![allow(dead_code)]

use expanse_core::align::pair_from_alignment;
use expanse_core::{ExpansionPair, Language, Provenance, Span, TaggedText, TokenSeq};

pub const HEART_TREE: &str = "(ROOT (S (NP (PRP i)) (ADVP (RB truly)) (VP (VBP love) (NP (PRP you)) \
     (PP (IN with) (NP (PDT all) (PRP$ my) (NN heart))))))";

pub const SPORT_X: &str = "my favorite sport is basketball";
pub const SPORT_Y: &str = "when it comes to sports , my absolute favorite sport of all time is basketball , \
     and i 'm a huge fan of james";

pub const MEAT: &str = "we/PRP offer/VBP our/PRP$ buyers/NNS a/DT wide/JJ range/NN of/IN meat/NN ,/, \
     including/VBG pork/NN ,/, beef/NN ,/, and/CC lamb/NN ./.";

pub const TABLE5_ZH: &str = "林丹/nr 在/p 伦敦/ns 奥运会/n 击败/v 了/u 李宗伟/nr ，/w 获得/v 了/u 奥运冠军/n";

pub fn toks(s: &str) -> TokenSeq {
    TokenSeq::from_whitespace(s)
}

/// Tagged text from `token/TAG` items.
pub fn tagged(s: &str) -> TaggedText {
    let (t, p): (Vec<String>, Vec<String>) = s
        .split_whitespace()
        .map(|i| {
            let (a, b) = i.rsplit_once('/').unwrap();
            (a.to_owned(), b.to_owned())
        })
        .unzip();
    TaggedText::new(TokenSeq::new(t).unwrap()).with_pos(p).unwrap()
}

pub fn worked_pair_pair() -> ExpansionPair {
    pair_from_alignment(toks(SPORT_X), toks(SPORT_Y), "worked_pair", Language::En, Provenance::Ref).unwrap()
}

/// The Chinese source with its three named entities.
pub fn table5_zh() -> TaggedText {
    let mut t = tagged(TABLE5_ZH);
    t.entities = Some(vec![
        Span { start: 0, end: 1 },
        Span { start: 2, end: 4 },
        Span { start: 6, end: 7 },
    ]);
    t
}

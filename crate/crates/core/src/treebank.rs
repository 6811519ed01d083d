//! Bracketed constituency trees and rule-based modifier pruning.
//!
//! Pruning walks the tree in preorder and drops whole child subtrees by
//! constituent label. The dropped leaves become the modifier spans of a
//! (skeleton, full sentence) pair.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{runs_from_mask, ExpansionPair, Language, Provenance, Span, TokenSeq};

/// Default for the "more than N leaves" guard.
pub const DEFAULT_MAX_PRUNABLE_LEAVES: usize = 10;

const NONE_TAG: &str = "-NONE-";

/// A constituent. Preterminals (`(TAG token)`) are the leaves of this tree:
/// they have no children and carry the surface token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstNode {
    pub label: String,
    pub children: Vec<ConstNode>,
    pub leaf_token: Option<String>,
}

impl ConstNode {
    pub fn leaf(tag: impl Into<String>, token: impl Into<String>) -> Self {
        ConstNode {
            label: tag.into(),
            children: Vec::new(),
            leaf_token: Some(token.into()),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ConstNode>) -> Self {
        ConstNode {
            label: label.into(),
            children,
            leaf_token: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Label with functional suffixes removed (`NP-SBJ` → `NP`).
    pub fn base_label(&self) -> &str {
        normalize_label(&self.label)
    }

    fn is_empty_category(&self) -> bool {
        self.is_leaf() && self.label == NONE_TAG
    }

    /// Number of surface leaves (empty categories excluded).
    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            usize::from(!self.is_empty_category())
        } else {
            self.children.iter().map(ConstNode::leaf_count).sum()
        }
    }

    fn collect_yield(&self, out: &mut Vec<String>) {
        if self.is_leaf() {
            if !self.is_empty_category() {
                out.push(unescape_token(self.leaf_token.as_deref().unwrap_or_default()).to_owned());
            }
        } else {
            for c in &self.children {
                c.collect_yield(out);
            }
        }
    }

    /// Copy of the tree without empty-category leaves and the constituents left empty by their removal.
    fn without_empty_categories(&self) -> Option<ConstNode> {
        if self.is_leaf() {
            return (!self.is_empty_category()).then(|| self.clone());
        }
        let children: Vec<_> = self
            .children
            .iter()
            .filter_map(ConstNode::without_empty_categories)
            .collect();
        (!children.is_empty()).then(|| ConstNode::node(self.label.clone(), children))
    }

    /// Subtree keeping only the leaves whose yield index is not marked in `dropped`.
    pub fn retain_leaves(&self, dropped: &[bool]) -> Option<ConstNode> {
        let mut idx = 0;
        self.without_empty_categories()?.retain_inner(dropped, &mut idx)
    }

    fn retain_inner(&self, dropped: &[bool], idx: &mut usize) -> Option<ConstNode> {
        if self.is_leaf() {
            let keep = !dropped.get(*idx).copied().unwrap_or(false);
            *idx += 1;
            return keep.then(|| self.clone());
        }
        let children: Vec<_> = self
            .children
            .iter()
            .filter_map(|c| c.retain_inner(dropped, idx))
            .collect();
        (!children.is_empty()).then(|| ConstNode::node(self.label.clone(), children))
    }
}

impl fmt::Display for ConstNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.leaf_token {
            Some(tok) if self.is_leaf() => write!(f, "({} {})", self.label, tok),
            _ => {
                write!(f, "({}", self.label)?;
                for c in &self.children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Strips functional tags at the first `-` or `=`; labels that start with `-`
/// (`-LRB-`, `-RRB-`, `-NONE-`) are kept verbatim.
pub fn normalize_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) if i > 0 => &label[..i],
        _ => label,
    }
}

fn unescape_token(tok: &str) -> &str {
    match tok {
        "-LRB-" => "(",
        "-RRB-" => ")",
        "-LSB-" => "[",
        "-RSB-" => "]",
        "-LCB-" => "{",
        "-RCB-" => "}",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Lexeme<'_>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Lexeme::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Lexeme::Close));
                i += 1;
            }
            _ => {
                // Whitespace may be multi-byte; walk by char.
                let ch = text[i..].chars().next().unwrap_or(' ');
                if ch.is_whitespace() {
                    i += ch.len_utf8();
                    continue;
                }
                let start = i;
                while i < bytes.len() {
                    let ch = text[i..].chars().next().unwrap_or(' ');
                    if ch == '(' || ch == ')' || ch.is_whitespace() {
                        break;
                    }
                    i += ch.len_utf8();
                }
                out.push((start, Lexeme::Atom(&text[start..i])));
            }
        }
    }
    out
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct Frame {
    open_at: usize,
    label: String,
    children: Vec<ConstNode>,
    token: Option<String>,
}

/// Parses one S-expression tree such as `(ROOT (S (NP (PRP i)) (VP (VBP love))))`.
pub fn parse_tree(text: &str) -> Result<ConstNode> {
    let lexemes = lex(text);
    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<ConstNode> = None;
    let mut iter = lexemes.into_iter().peekable();

    while let Some((off, lx)) = iter.next() {
        if root.is_some() {
            let msg = if lx == Lexeme::Close {
                "unbalanced parentheses"
            } else {
                "trailing input after tree"
            };
            return Err(parse_err(off, msg));
        }
        match lx {
            Lexeme::Open => {
                let label = match iter.peek() {
                    Some((_, Lexeme::Atom(a))) => a.to_string(),
                    _ => return Err(parse_err(off, "empty label")),
                };
                iter.next();
                if let Some(top) = stack.last() {
                    if top.token.is_some() {
                        return Err(parse_err(off, "leaf mixes a token and subtrees"));
                    }
                }
                stack.push(Frame {
                    open_at: off,
                    label,
                    children: Vec::new(),
                    token: None,
                });
            }
            Lexeme::Atom(a) => {
                let Some(top) = stack.last_mut() else {
                    return Err(parse_err(off, "token outside of brackets"));
                };
                if top.token.is_some() {
                    return Err(parse_err(off, "leaf with more than one token"));
                }
                if !top.children.is_empty() {
                    return Err(parse_err(off, "leaf mixes a token and subtrees"));
                }
                top.token = Some(a.to_owned());
            }
            Lexeme::Close => {
                let Some(frame) = stack.pop() else {
                    return Err(parse_err(off, "unbalanced parentheses"));
                };
                let node = match frame.token {
                    Some(tok) => ConstNode::leaf(frame.label, tok),
                    None if frame.children.is_empty() => {
                        return Err(parse_err(frame.open_at, "leaf with zero tokens"));
                    }
                    None => ConstNode::node(frame.label, frame.children),
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => root = Some(node),
                }
            }
        }
    }

    if let Some(frame) = stack.last() {
        return Err(parse_err(frame.open_at, "unbalanced parentheses"));
    }
    let root = root.ok_or_else(|| parse_err(0, "empty input"))?;
    if root.leaf_count() == 0 {
        return Err(parse_err(0, "tree has an empty yield"));
    }
    Ok(root)
}

/// In-order surface tokens; bracket escapes are rendered as the bracket characters.
pub fn yield_tokens(node: &ConstNode) -> TokenSeq {
    let mut out = Vec::new();
    node.collect_yield(&mut out);
    TokenSeq::from_vec_unchecked(out)
}

/// Skeleton and the merged runs of pruned leaf positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneOutcome {
    pub skeleton: TokenSeq,
    pub pruned_spans: Vec<Span>,
}

fn mark(dropped: &mut [bool], start: usize, len: usize) {
    dropped[start..start + len].iter_mut().for_each(|d| *d = true);
}

struct Pruner {
    max_leaves: usize,
    dropped: Vec<bool>,
}

impl Pruner {
    fn fits(&self, leaves: usize) -> bool {
        leaves <= self.max_leaves
    }

    fn english(&mut self, node: &ConstNode, start: usize) {
        if node.is_leaf() {
            return;
        }
        let label = node.base_label();
        let leaves = node.leaf_count();

        if label == "SBAR"
            && node.children[0].base_label().starts_with("WH")
            && self.fits(leaves)
        {
            mark(&mut self.dropped, start, leaves);
            return;
        }

        let counts: Vec<usize> = node.children.iter().map(ConstNode::leaf_count).collect();
        let mut drop = vec![false; node.children.len()];
        let mut i = 0;
        while i < node.children.len() {
            let child = node.children[i].base_label();
            if label == "NP" && child == "-LRB-" {
                if let Some(j) = matching_rrb(&node.children, i) {
                    if self.fits(counts[i..=j].iter().sum()) {
                        drop[i..=j].iter_mut().for_each(|d| *d = true);
                        i = j + 1;
                        continue;
                    }
                }
            }
            let prunable = match label {
                "S" | "VP" => matches!(child, "PP" | "ADVP"),
                "NP" => matches!(child, "ADJP" | "JJ" | "CD" | "PP"),
                "ADJP" => child.starts_with("RB"),
                _ => false,
            };
            if prunable && self.fits(counts[i]) {
                drop[i] = true;
            }
            i += 1;
        }
        self.descend(node, start, &counts, &drop, Self::english);
    }

    fn chinese(&mut self, node: &ConstNode, start: usize) {
        if node.is_leaf() {
            return;
        }
        let counts: Vec<usize> = node.children.iter().map(ConstNode::leaf_count).collect();
        let drop: Vec<bool> = node
            .children
            .iter()
            .zip(&counts)
            .map(|(c, &n)| {
                matches!(c.base_label(), "DNP" | "CP" | "DVP" | "ADVP" | "QP" | "LCP" | "PP")
                    && self.fits(n)
            })
            .collect();
        self.descend(node, start, &counts, &drop, Self::chinese);
    }

    fn descend(
        &mut self,
        node: &ConstNode,
        start: usize,
        counts: &[usize],
        drop: &[bool],
        visit: fn(&mut Self, &ConstNode, usize),
    ) {
        let mut offset = start;
        for ((child, &n), &d) in node.children.iter().zip(counts).zip(drop) {
            if d {
                mark(&mut self.dropped, offset, n);
            } else {
                visit(self, child, offset);
            }
            offset += n;
        }
    }
}

/// Index of the `-RRB-` sibling closing the `-LRB-` at `open`, honoring nesting.
fn matching_rrb(children: &[ConstNode], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, c) in children.iter().enumerate().skip(open) {
        match c.base_label() {
            "-LRB-" => depth += 1,
            "-RRB-" => {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
            _ => {}
        }
    }
    None
}

fn run_pruner(
    tree: &ConstNode,
    max_prunable_leaves: usize,
    visit: fn(&mut Pruner, &ConstNode, usize),
) -> Result<PruneOutcome> {
    let clean = tree.without_empty_categories().ok_or(Error::EmptySkeleton)?;
    let full = yield_tokens(&clean);
    let mut pruner = Pruner {
        max_leaves: max_prunable_leaves,
        dropped: vec![false; full.len()],
    };
    visit(&mut pruner, &clean, 0);
    let skeleton: Vec<String> = full
        .iter()
        .zip(&pruner.dropped)
        .filter(|(_, &d)| !d)
        .map(|(t, _)| t.clone())
        .collect();
    if skeleton.is_empty() {
        return Err(Error::EmptySkeleton);
    }
    Ok(PruneOutcome {
        skeleton: TokenSeq::from_vec_unchecked(skeleton),
        pruned_spans: runs_from_mask(&pruner.dropped),
    })
}

/// English rules: S and VP drop PP/ADVP children; NP drops ADJP, JJ, CD, PP
/// and bracketed groups; ADJP drops RB* children; SBAR introduced by a WH
/// constituent is dropped whole. Subtrees with more than
/// `max_prunable_leaves` leaves are never dropped.
pub fn prune_english(tree: &ConstNode, max_prunable_leaves: usize) -> Result<PruneOutcome> {
    run_pruner(tree, max_prunable_leaves, Pruner::english)
}

/// Chinese rules: every node drops DNP, CP, DVP, ADVP, QP, LCP and PP children.
pub fn prune_chinese(tree: &ConstNode, max_prunable_leaves: usize) -> Result<PruneOutcome> {
    run_pruner(tree, max_prunable_leaves, Pruner::chinese)
}

pub fn prune(tree: &ConstNode, language: Language, max_prunable_leaves: usize) -> Result<PruneOutcome> {
    match language {
        Language::En => prune_english(tree, max_prunable_leaves),
        Language::Zh => prune_chinese(tree, max_prunable_leaves),
    }
}

/// Full yield as the expansion, skeleton as the source.
pub fn tree_to_pair(
    tree: &ConstNode,
    language: Language,
    id: impl Into<String>,
    max_prunable_leaves: usize,
) -> Result<ExpansionPair> {
    let outcome = prune(tree, language, max_prunable_leaves)?;
    ExpansionPair::new(
        id,
        language,
        outcome.skeleton,
        yield_tokens(tree),
        outcome.pruned_spans,
        Provenance::Ctp,
    )
}

/// One input tree with its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub id: String,
    pub tree: String,
}

/// Reads trees given either as JSONL `{"id", "tree"}` lines or as raw
/// bracketed text. Raw trees may span several lines; they are given ids
/// `L<line>` from the line where they start.
pub fn read_tree_records<R: BufRead>(reader: R) -> Result<Vec<TreeRecord>> {
    let mut out = Vec::new();
    let mut pending = String::new();
    let mut pending_line = 0;
    let mut depth: i64 = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if pending.is_empty() {
            if trimmed.is_empty() {
                continue;
            }
            if trimmed.starts_with('{') {
                out.push(crate::model::parse_jsonl_line(trimmed, idx + 1)?);
                continue;
            }
            pending_line = idx + 1;
        }
        depth += trimmed.matches('(').count() as i64 - trimmed.matches(')').count() as i64;
        pending.push_str(trimmed);
        pending.push(' ');
        if depth <= 0 {
            out.push(TreeRecord {
                id: format!("L{pending_line}"),
                tree: std::mem::take(&mut pending).trim_end().to_owned(),
            });
            depth = 0;
        }
    }
    if !pending.is_empty() {
        out.push(TreeRecord {
            id: format!("L{pending_line}"),
            tree: pending.trim_end().to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = "(ROOT (S (NP (PRP i)) (ADVP (RB truly)) (VP (VBP love) (NP (PRP you)) \
                        (PP (IN with) (NP (PDT all) (PRP$ my) (NN heart))))))";

    fn span(a: usize, b: usize) -> Span {
        Span::new(a, b).unwrap()
    }

    #[test]
    fn parses_minimal_tree() {
        let t = parse_tree("(ROOT (S (NP (PRP i)) (VP (VBP love) (NP (PRP you)))))").unwrap();
        assert_eq!(t.label, "ROOT");
        assert_eq!(yield_tokens(&t).joined(), "i love you");
    }

    #[test]
    fn unbalanced_is_an_error() {
        let err = parse_tree("(S (NP (PRP i))").unwrap_err();
        assert!(err.to_string().contains("unbalanced parentheses"), "{err}");
        let err = parse_tree("(S (NP (PRP i))))").unwrap_err();
        assert!(err.to_string().contains("unbalanced parentheses"), "{err}");
    }

    #[test]
    fn empty_label_and_empty_leaf_errors_carry_offsets() {
        match parse_tree("( (S (NN a)))") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 0);
                assert_eq!(message, "empty label");
            }
            other => panic!("{other:?}"),
        }
        match parse_tree("(S (NN a) (NN))") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 10);
                assert_eq!(message, "leaf with zero tokens");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn yields_and_escapes() {
        assert_eq!(yield_tokens(&parse_tree("(NN dog)").unwrap()).as_slice(), ["dog"]);
        assert_eq!(yield_tokens(&parse_tree("(-LRB- -LRB-)").unwrap()).as_slice(), ["("]);
        let t = parse_tree(FIG1).unwrap();
        assert_eq!(
            yield_tokens(&t).as_slice(),
            ["i", "truly", "love", "you", "with", "all", "my", "heart"]
        );
    }

    #[test]
    fn heart_sentence_pruning() {
        let t = parse_tree(FIG1).unwrap();
        let out = prune_english(&t, DEFAULT_MAX_PRUNABLE_LEAVES).unwrap();
        assert_eq!(out.skeleton.joined(), "i love you");
        assert_eq!(out.pruned_spans, vec![span(1, 2), span(4, 8)]);
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("NP-SBJ"), "NP");
        assert_eq!(normalize_label("NP-SBJ-1"), "NP");
        assert_eq!(normalize_label("PP=2"), "PP");
        assert_eq!(normalize_label("-LRB-"), "-LRB-");
        assert_eq!(normalize_label("-NONE-"), "-NONE-");
        let t = parse_tree("(S (NP-SBJ (PRP i)) (ADVP-TMP (RB now)) (VP (VBP go)))").unwrap();
        assert_eq!(prune_english(&t, 10).unwrap().skeleton.joined(), "i go");
    }

    #[test]
    fn empty_categories_are_dropped() {
        let t = parse_tree("(S (NP-SBJ (-NONE- *)) (VP (VBP go) (ADVP (RB home))))").unwrap();
        assert_eq!(yield_tokens(&t).joined(), "go home");
        let out = prune_english(&t, 10).unwrap();
        assert_eq!(out.skeleton.joined(), "go");
        assert_eq!(out.pruned_spans, vec![span(1, 2)]);
    }

    #[test]
    fn nothing_prunable_is_identity() {
        let t = parse_tree("(ROOT (S (NP (NN dogs)) (VP (VBP bark))))").unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert_eq!(out.skeleton, yield_tokens(&t));
        assert!(out.pruned_spans.is_empty());
    }

    #[test]
    fn np_modifiers_and_brackets() {
        let t = parse_tree(
            "(S (NP (DT the) (JJ big) (CD two) (NNS dogs) (-LRB- -LRB-) (NN see) (NN text) (-RRB- -RRB-)) \
             (VP (VBD ran)))",
        )
        .unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert_eq!(out.skeleton.joined(), "the dogs ran");
        assert_eq!(out.pruned_spans, vec![span(1, 3), span(4, 8)]);
    }

    #[test]
    fn unmatched_lrb_prunes_nothing() {
        let t = parse_tree("(S (NP (NNS dogs) (-LRB- -LRB-) (NN note)) (VP (VBD ran)))").unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert!(out.pruned_spans.is_empty());
    }

    #[test]
    fn adjp_drops_adverbs_and_sbar_wh_drops_whole() {
        let t = parse_tree(
            "(S (NP (NP (NN man)) (SBAR (WHNP (WP who)) (S (VP (VBD left))))) \
             (VP (VBZ is) (ADJP (RB very) (JJ tall))))",
        )
        .unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert_eq!(out.skeleton.joined(), "man is tall");
    }

    #[test]
    fn sbar_without_wh_is_kept() {
        let t = parse_tree("(S (NP (PRP i)) (VP (VBP think) (SBAR (IN that) (S (NP (PRP it)) (VP (VBZ works))))))")
            .unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert!(out.pruned_spans.is_empty());
    }

    #[test]
    fn everything_pruned_is_empty_skeleton() {
        let t = parse_tree("(S (ADVP (RB here)))").unwrap();
        assert!(matches!(prune_english(&t, 10), Err(Error::EmptySkeleton)));
    }

    #[test]
    fn guard_keeps_large_subtrees() {
        // Eleven-leaf PP with nothing prunable inside.
        let nouns: String = (0..10).map(|i| format!(" (NN w{i})")).collect();
        let tree = format!("(S (NP (PRP i)) (VP (VBP sat) (PP (IN on) (NP{nouns}))))");
        let t = parse_tree(&tree).unwrap();
        let out = prune_english(&t, 10).unwrap();
        assert!(out.pruned_spans.is_empty());
        let out = prune_english(&t, 11).unwrap();
        assert_eq!(out.pruned_spans, vec![span(2, 13)]);
    }

    #[test]
    fn chinese_rules() {
        let t = parse_tree("(IP (NP (NR 林丹)) (VP (ADVP (AD 终于)) (VP (VV 获得) (NP (NN 冠军)))))").unwrap();
        let out = prune_chinese(&t, 10).unwrap();
        assert_eq!(out.skeleton.joined(), "林丹 获得 冠军");
        assert_eq!(out.pruned_spans, vec![span(1, 2)]);

        let plain = parse_tree("(IP (NP (NR 林丹)) (VP (VV 赢)))").unwrap();
        let out = prune_chinese(&plain, 10).unwrap();
        assert!(out.pruned_spans.is_empty());
    }

    #[test]
    fn chinese_guard() {
        let leaves: String = (0..12).map(|i| format!(" (NN 字{i})")).collect();
        let t = parse_tree(&format!("(IP (NP (NR 他)) (VP (VV 说) (CP (IP{leaves}))))")).unwrap();
        assert!(prune_chinese(&t, 10).unwrap().pruned_spans.is_empty());
        assert_eq!(prune_chinese(&t, 12).unwrap().pruned_spans, vec![span(2, 14)]);
    }

    #[test]
    fn heart_sentence_pair() {
        let t = parse_tree(FIG1).unwrap();
        let p = tree_to_pair(&t, Language::En, "fig1", 10).unwrap();
        assert_eq!(p.source.joined(), "i love you");
        assert_eq!(p.modifier_spans.len(), 2);
        assert_eq!(p.provenance, Provenance::Ctp);
    }

    #[test]
    fn display_round_trips() {
        let t = parse_tree(FIG1).unwrap();
        assert_eq!(parse_tree(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn pruned_tree_reprunes_to_nothing() {
        let t = parse_tree(FIG1).unwrap();
        let out = prune_english(&t, 10).unwrap();
        let mut dropped = vec![false; 8];
        for s in &out.pruned_spans {
            dropped[s.range()].iter_mut().for_each(|d| *d = true);
        }
        let rest = t.retain_leaves(&dropped).unwrap();
        let again = prune_english(&parse_tree(&rest.to_string()).unwrap(), 10).unwrap();
        assert!(again.pruned_spans.is_empty());
        assert_eq!(again.skeleton.joined(), "i love you");
    }

    #[test]
    fn reads_raw_and_jsonl_trees() {
        let input = "(S (NP (PRP i))\n  (VP (VBP go)))\n{\"id\":\"x\",\"tree\":\"(NN a)\"}\n";
        let recs = read_tree_records(input.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "L1");
        assert_eq!(recs[1].id, "x");
        assert!(parse_tree(&recs[0].tree).is_ok());
    }
}

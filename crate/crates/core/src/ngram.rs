//! Add-k smoothed n-gram language model used as the built-in scoring oracle.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::template::InfillTemplatePair;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";
pub const BOS: &str = "<bos>";
pub const MAGIC: &str = "EXPANSE-NGLM-1";

const UNK_ID: u32 = 0;
const EOS_ID: u32 = 1;
const BOS_ID: u32 = 2;

/// Summed negative log-likelihood (natural log) over `token_count` predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmScore {
    pub nll_sum: f64,
    pub token_count: usize,
}

impl LmScore {
    pub fn perplexity(&self) -> f64 {
        (self.nll_sum / self.token_count as f64).exp()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    add_k: f64,
    /// Id-indexed: `<unk>`, `<eos>`, `<bos>`, then training tokens in sorted order.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    counts: BTreeMap<Vec<u32>, ContextCounts>,
}

type CountRows = Vec<(Vec<u32>, Vec<(u32, u64)>)>;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    order: usize,
    add_k: f64,
    vocab: Vec<String>,
    counts: CountRows,
}

fn check_params(order: usize, add_k: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::validation("order", "must be at least 1"));
    }
    if !(add_k.is_finite() && add_k > 0.0) {
        return Err(Error::validation("add_k", "must be a positive finite number"));
    }
    Ok(())
}

impl NgramModel {
    fn with_vocab<'a>(order: usize, add_k: f64, tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words: Vec<&str> = tokens
            .into_iter()
            .filter(|t| ![UNK, EOS, BOS].contains(t))
            .collect();
        words.sort_unstable();
        words.dedup();
        let vocab: Vec<String> = [UNK, EOS, BOS]
            .into_iter()
            .chain(words)
            .map(str::to_owned)
            .collect();
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        NgramModel {
            order,
            add_k,
            vocab,
            index,
            counts: BTreeMap::new(),
        }
    }

    /// Counts n-grams over `<bos>`-padded sentences terminated by `<eos>`.
    pub fn train<S: AsRef<[String]>>(corpus: &[S], order: usize, add_k: f64) -> Result<Self> {
        check_params(order, add_k)?;
        if corpus.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        let mut model = Self::with_vocab(
            order,
            add_k,
            corpus.iter().flat_map(|s| s.as_ref().iter().map(String::as_str)),
        );
        for sentence in corpus {
            let ids = model.encode(sentence.as_ref());
            let padded = model.pad(&ids, true);
            for w in padded.windows(order) {
                let (ctx, next) = w.split_at(order - 1);
                let entry = model.counts.entry(ctx.to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(next[0]).or_default() += 1;
            }
        }
        Ok(model)
    }

    /// Model with no counts: every prediction is uniform over the vocabulary.
    pub fn uniform<'a>(tokens: impl IntoIterator<Item = &'a str>, order: usize) -> Result<Self> {
        check_params(order, 1.0)?;
        Ok(Self::with_vocab(order, 1.0, tokens))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    /// Number of predictable outcomes: every token except `<bos>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// Predictable outcomes, `<unk>` and `<eos>` included.
    pub fn outcomes(&self) -> impl Iterator<Item = &str> + '_ {
        self.vocab
            .iter()
            .enumerate()
            .filter(|&(i, _)| i as u32 != BOS_ID)
            .map(|(_, t)| t.as_str())
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    fn pad(&self, ids: &[u32], eos: bool) -> Vec<u32> {
        let mut out = vec![BOS_ID; self.order - 1];
        out.extend_from_slice(ids);
        if eos {
            out.push(EOS_ID);
        }
        out
    }

    fn prob_ids(&self, ctx: &[u32], next: u32) -> f64 {
        let (total, count) = match self.counts.get(ctx) {
            Some(c) => (c.total, c.next.get(&next).copied().unwrap_or(0)),
            None => (0, 0),
        };
        (count as f64 + self.add_k) / (total as f64 + self.add_k * self.vocab_size() as f64)
    }

    /// p(next | context); the context is truncated or `<bos>`-padded to order − 1 tokens.
    pub fn prob(&self, context: &[&str], next: &str) -> f64 {
        let want = self.order - 1;
        let mut ctx: Vec<u32> = context.iter().map(|t| self.id(t)).collect();
        if ctx.len() > want {
            ctx.drain(..ctx.len() - want);
        }
        let mut padded = vec![BOS_ID; want - ctx.len()];
        padded.extend(ctx);
        self.prob_ids(&padded, self.id(next))
    }

    /// Scores `tokens` followed by `<eos>`.
    pub fn nll(&self, tokens: &[String]) -> Result<LmScore> {
        if tokens.is_empty() {
            return Err(Error::invalid("empty input"));
        }
        let padded = self.pad(&self.encode(tokens), true);
        let nll_sum = padded
            .windows(self.order)
            .map(|w| -self.prob_ids(&w[..self.order - 1], w[self.order - 1]).ln())
            .sum();
        Ok(LmScore {
            nll_sum,
            token_count: tokens.len() + 1,
        })
    }

    /// Scores the target's literal tokens in the spliced sentence, each
    /// conditioned on everything to its left. Slots and `<eos>` are not scored.
    pub fn infill_nll(&self, template: &InfillTemplatePair) -> Result<LmScore> {
        let (tokens, scored) = template.splice_with_origin(None)?;
        let padded = self.pad(&self.encode(&tokens), false);
        let mut nll_sum = 0.0;
        let mut token_count = 0;
        for (i, w) in padded.windows(self.order).enumerate() {
            if scored[i] {
                nll_sum -= self.prob_ids(&w[..self.order - 1], w[self.order - 1]).ln();
                token_count += 1;
            }
        }
        if token_count == 0 {
            return Err(Error::invalid("no scorable tokens"));
        }
        Ok(LmScore { nll_sum, token_count })
    }

    /// Every context with observed counts, as token strings.
    pub fn contexts(&self) -> impl Iterator<Item = Vec<&str>> + '_ {
        self.counts
            .keys()
            .map(|ctx| ctx.iter().map(|&i| self.vocab[i as usize].as_str()).collect())
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        let file = ModelFile {
            magic: MAGIC.to_owned(),
            order: self.order,
            add_k: self.add_k,
            vocab: self.vocab.clone(),
            counts: self
                .counts
                .iter()
                .map(|(ctx, c)| (ctx.clone(), c.next.iter().map(|(&t, &n)| (t, n)).collect()))
                .collect(),
        };
        serde_json::to_writer(&mut writer, &file).map_err(|e| Error::Io(e.into()))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_reader(reader).map_err(|source| Error::Json { line: 1, source })?;
        if file.magic != MAGIC {
            return Err(Error::validation("magic", format!("expected {MAGIC}, found {:?}", file.magic)));
        }
        check_params(file.order, file.add_k)?;
        let reserved = file.vocab.len() >= 3
            && file.vocab[UNK_ID as usize] == UNK
            && file.vocab[EOS_ID as usize] == EOS
            && file.vocab[BOS_ID as usize] == BOS;
        if !reserved {
            return Err(Error::validation("vocab", "reserved tokens missing or misplaced"));
        }
        let n = file.vocab.len() as u32;
        let mut counts = BTreeMap::new();
        for (ctx, next) in file.counts {
            if ctx.len() != file.order - 1 || ctx.iter().chain(next.iter().map(|(t, _)| t)).any(|&i| i >= n) {
                return Err(Error::validation("counts", "context of wrong length or unknown token id"));
            }
            let next: BTreeMap<u32, u64> = next.into_iter().collect();
            let total = next.values().sum();
            counts.insert(ctx, ContextCounts { total, next });
        }
        let index = file
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(NgramModel {
            order: file.order,
            add_k: file.add_k,
            vocab: file.vocab,
            index,
            counts,
        })
    }
}

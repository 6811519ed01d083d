use std::path::{Path, PathBuf};

use expanse_core::align::{canonicalize, joint_format, pipelined_format};
use expanse_core::construct::{apply_filters, mask_for_pretraining, sample_mmp_templates, slot_weights, FilterVerdict};
use expanse_core::hearst::{builtin_patterns, find_matches, match_to_pair, read_patterns};
use expanse_core::lexicon::Stopwords;
use expanse_core::metrics::{
    corpus_bleu, evaluate_pair, match_references, render_report, summarize, MetricHandles, MetricReport,
};
use expanse_core::model::{read_jsonl, write_jsonl_line};
use expanse_core::treebank::{parse_tree, read_tree_records, tree_to_pair};
use expanse_core::{
    read_pairs, write_pairs, Error, ExpansionPair, Language, NgramModel, Result, ScorerKind, Span, TaggedRecord,
    TemplateRecord, TokenSeq,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::io::{check_distinct, manifest_path, write_manifest, write_output, Input, Manifest, STDIO};
use crate::oracles::OracleFactory;
use crate::{AlignFormat, Cli, Command, Common, LmAction};

struct Counts {
    records_in: usize,
    records_out: usize,
    records_rejected: usize,
}

struct Ctx {
    name: &'static str,
    common: Common,
    cfg: PipelineConfig,
}

impl Ctx {
    /// Maps records on the worker pool; results keep input order.
    fn par_map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Result<Vec<U>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.common.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start workers: {e}")))?;
        Ok(pool.install(|| items.par_iter().map(f).collect()))
    }

    fn finish(&self, out: &Path, bytes: &[u8], inputs: &[&Input], counts: Counts) -> Result<()> {
        write_output(out, bytes)?;
        if let Some(path) = manifest_path(out, self.common.manifest.as_deref()) {
            write_manifest(
                &path,
                &Manifest {
                    tool_version: env!("CARGO_PKG_VERSION"),
                    subcommand: self.name.to_owned(),
                    config_sha256: self.cfg.sha256(),
                    seed: self.cfg.seed,
                    records_in: counts.records_in,
                    records_out: counts.records_out,
                    records_rejected: counts.records_rejected,
                    inputs: inputs.iter().map(|i| i.entry()).collect(),
                },
            )?;
        }
        eprintln!(
            "expanse {}: {} in, {} out, {} rejected",
            self.name, counts.records_in, counts.records_out, counts.records_rejected
        );
        Ok(())
    }
}

fn stopwords(cfg: &PipelineConfig) -> [Stopwords; 2] {
    [cfg.filter.stopwords_for(Language::En), cfg.filter.stopwords_for(Language::Zh)]
}

fn pick(sw: &[Stopwords; 2], lang: Language) -> &Stopwords {
    match lang {
        Language::En => &sw[0],
        Language::Zh => &sw[1],
    }
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        write_jsonl_line(&mut buf, &item)?;
    }
    Ok(buf)
}

/// Propagates the first error in input order.
fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn run(cli: Cli) -> Result<()> {
    let Cli { common, command } = cli;
    let mut cfg = PipelineConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(l) = common.lang {
        cfg.language = l;
    }
    let name = match &command {
        Command::Prune { .. } => "prune",
        Command::Hearst { .. } => "hearst",
        Command::Align { .. } => "align",
        Command::Filter { .. } => "filter",
        Command::MmpPrep { .. } => "mmp-prep",
        Command::PretrainMask { .. } => "pretrain-mask",
        Command::Lm { action: LmAction::Train { .. } } => "lm train",
        Command::Lm { action: LmAction::Score { .. } } => "lm score",
        Command::Metrics { .. } => "metrics",
        Command::Report { .. } => "report",
    };
    let set_mask = |cfg: &mut PipelineConfig, m: Option<String>| {
        if let Some(m) = m {
            cfg.mask_format = m;
        }
    };
    match command {
        Command::Prune { io, max_prunable_leaves } => {
            if let Some(m) = max_prunable_leaves {
                cfg.max_prunable_leaves = m;
            }
            cfg.validate()?;
            prune(&Ctx { name, common, cfg }, &io.input, &io.out)
        }
        Command::Hearst { io, patterns } => {
            cfg.validate()?;
            hearst(&Ctx { name, common, cfg }, &io.input, &io.out, patterns.as_deref())
        }
        Command::Align { io, format, mask_format, null_token } => {
            set_mask(&mut cfg, mask_format);
            if let Some(n) = null_token {
                cfg.null_token = n;
            }
            cfg.validate()?;
            align(&Ctx { name, common, cfg }, &io.input, &io.out, format)
        }
        Command::Filter { io, rejects, lm_oracle, nli_oracle } => {
            if let Some(o) = lm_oracle {
                cfg.oracles.lm = o;
            }
            if let Some(o) = nli_oracle {
                cfg.oracles.nli = o;
            }
            cfg.validate()?;
            filter(&Ctx { name, common, cfg }, &io.input, &io.out, rejects)
        }
        Command::MmpPrep { io, repeats, k, anchor_side, mask_format } => {
            if let Some(r) = repeats {
                cfg.sampler.repeats = r;
            }
            if let Some([lo, hi]) = k {
                cfg.sampler.k_min = lo;
                cfg.sampler.k_max = hi;
            }
            if let Some(s) = anchor_side {
                cfg.sampler.anchor_side = s.into();
            }
            set_mask(&mut cfg, mask_format);
            cfg.validate()?;
            mmp_prep(&Ctx { name, common, cfg }, &io.input, &io.out)
        }
        Command::PretrainMask { io, rate, span_len, mask_format } => {
            if let Some(r) = rate {
                cfg.pretrain.rate = r;
            }
            if let Some(s) = span_len {
                cfg.pretrain.span_len = s;
            }
            set_mask(&mut cfg, mask_format);
            cfg.validate()?;
            pretrain_mask(&Ctx { name, common, cfg }, &io.input, &io.out)
        }
        Command::Lm { action: LmAction::Train { corpus, order, add_k, out } } => {
            cfg.validate()?;
            lm_train(&Ctx { name, common, cfg }, &corpus, order, add_k, &out)
        }
        Command::Lm { action: LmAction::Score { model, io } } => {
            cfg.validate()?;
            lm_score(&Ctx { name, common, cfg }, &model, &io.input, &io.out)
        }
        Command::Metrics { sys, reference, lm_oracle, nli_oracle, infill_oracle, mask_format, report } => {
            for (slot, v) in [
                (&mut cfg.oracles.lm, lm_oracle),
                (&mut cfg.oracles.nli, nli_oracle),
                (&mut cfg.oracles.infill, infill_oracle),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            set_mask(&mut cfg, mask_format);
            cfg.validate()?;
            metrics(&Ctx { name, common, cfg }, &sys, &reference, &report)
        }
        Command::Report { io } => {
            cfg.validate()?;
            report(&Ctx { name, common, cfg }, &io.input, &io.out)
        }
    }
}

fn prune(ctx: &Ctx, input: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[input])?;
    let src = Input::read(input)?;
    let records = read_tree_records(src.bytes.as_slice())?;
    let (lang, max) = (ctx.cfg.language, ctx.cfg.max_prunable_leaves);
    let results = ctx.par_map(&records, |r| {
        let tree = parse_tree(&r.tree).map_err(|e| Error::invalid(format!("tree {}: {e}", r.id)))?;
        match tree_to_pair(&tree, lang, r.id.clone(), max) {
            Ok(p) => Ok(Some(p)),
            Err(Error::EmptySkeleton) => Ok(None),
            Err(e) => Err(Error::invalid(format!("tree {}: {e}", r.id))),
        }
    })?;
    let pairs: Vec<ExpansionPair> = collect(results)?.into_iter().flatten().collect();
    let mut bytes = Vec::new();
    write_pairs(&pairs, &mut bytes)?;
    let counts = Counts {
        records_in: records.len(),
        records_out: pairs.len(),
        records_rejected: records.len() - pairs.len(),
    };
    ctx.finish(out, &bytes, &[&src], counts)
}

fn hearst(ctx: &Ctx, input: &Path, out: &Path, patterns: Option<&Path>) -> Result<()> {
    check_distinct(out, &[input])?;
    let mut inputs = Vec::new();
    let patterns = match patterns {
        Some(p) => {
            let f = Input::read(p)?;
            let pats = read_patterns(f.bytes.as_slice())?;
            inputs.push(f);
            pats
        }
        None => builtin_patterns(),
    };
    let src = Input::read(input)?;
    let records: Vec<TaggedRecord> = read_jsonl(src.bytes.as_slice())?;
    let default_lang = ctx.cfg.language;
    let results = ctx.par_map(&records, |r| -> Result<Vec<ExpansionPair>> {
        r.text.validate()?;
        let lang = r.language.unwrap_or(default_lang);
        let mut pairs = Vec::new();
        for (k, m) in find_matches(&r.text, &patterns)?.iter().enumerate() {
            match match_to_pair(&r.text, m, format!("{}#{k}", r.id), lang) {
                Ok(p) => pairs.push(p),
                Err(Error::EmptySource) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(pairs)
    })?;
    let per_record = collect(results)?;
    let rejected = per_record.iter().filter(|p| p.is_empty()).count();
    let pairs: Vec<ExpansionPair> = per_record.into_iter().flatten().collect();
    let mut bytes = Vec::new();
    write_pairs(&pairs, &mut bytes)?;
    inputs.push(src);
    let counts = Counts {
        records_in: records.len(),
        records_out: pairs.len(),
        records_rejected: rejected,
    };
    ctx.finish(out, &bytes, &inputs.iter().collect::<Vec<_>>(), counts)
}

fn align(ctx: &Ctx, input: &Path, out: &Path, format: AlignFormat) -> Result<()> {
    check_distinct(out, &[input])?;
    let src = Input::read(input)?;
    let pairs = read_pairs(src.bytes.as_slice())?;
    let fmt = ctx.cfg.mask()?;
    let null = ctx.cfg.null_token.as_str();
    let results = ctx.par_map(&pairs, |p| -> Result<Option<Vec<u8>>> {
        let c = match canonicalize(p) {
            Ok(c) => c,
            Err(Error::NotSubsequence) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut line = Vec::new();
        match format {
            AlignFormat::Pairs => write_jsonl_line(&mut line, &c)?,
            AlignFormat::Joint => write_jsonl_line(&mut line, &TemplateRecord::new(&c.id, &joint_format(&c, null)?, &fmt))?,
            AlignFormat::Pipelined => {
                write_jsonl_line(&mut line, &TemplateRecord::new(&c.id, &pipelined_format(&c)?, &fmt))?
            }
        }
        Ok(Some(line))
    })?;
    let lines: Vec<Vec<u8>> = collect(results)?.into_iter().flatten().collect();
    let counts = Counts {
        records_in: pairs.len(),
        records_out: lines.len(),
        records_rejected: pairs.len() - lines.len(),
    };
    ctx.finish(out, &lines.concat(), &[&src], counts)
}

#[derive(Serialize)]
struct Reject<'a> {
    id: &'a str,
    #[serde(flatten)]
    verdict: &'a FilterVerdict,
}

fn filter(ctx: &Ctx, input: &Path, out: &Path, rejects: Option<PathBuf>) -> Result<()> {
    let rejects = rejects.or_else(|| {
        (out.as_os_str() != STDIO).then(|| {
            let mut name = out.as_os_str().to_owned();
            name.push(".rejects.jsonl");
            PathBuf::from(name)
        })
    });
    check_distinct(out, &[input])?;
    if let Some(r) = &rejects {
        check_distinct(r, &[input, out])?;
    }
    let src = Input::read(input)?;
    let pairs = read_pairs(src.bytes.as_slice())?;
    let corpus: Vec<&TokenSeq> = pairs.iter().map(|p| &p.expansion).collect();
    let sw = stopwords(&ctx.cfg);
    let mut factory = OracleFactory::new(&corpus, pick(&sw, ctx.cfg.language).clone());
    let lm = factory.required(ScorerKind::Lm, &ctx.cfg.oracles.lm)?;
    let nli = factory.required(ScorerKind::Nli, &ctx.cfg.oracles.nli)?;
    let fc = &ctx.cfg.filter;
    let results = ctx.par_map(&pairs, |p| apply_filters(p, fc, pick(&sw, p.language), &lm, &nli))?;
    let verdicts = collect(results)?;
    let kept: Vec<ExpansionPair> = pairs
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.keep)
        .map(|(p, _)| p.clone())
        .collect();
    let rejected = jsonl(
        pairs
            .iter()
            .zip(&verdicts)
            .filter(|(_, v)| !v.keep)
            .map(|(p, v)| Reject { id: &p.id, verdict: v }),
    )?;
    let mut bytes = Vec::new();
    write_pairs(&kept, &mut bytes)?;
    if let Some(r) = &rejects {
        write_output(r, &rejected)?;
    }
    let counts = Counts {
        records_in: pairs.len(),
        records_out: kept.len(),
        records_rejected: pairs.len() - kept.len(),
    };
    ctx.finish(out, &bytes, &[&src], counts)
}

fn mmp_prep(ctx: &Ctx, input: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[input])?;
    let src = Input::read(input)?;
    let records: Vec<TaggedRecord> = read_jsonl(src.bytes.as_slice())?;
    let fmt = ctx.cfg.mask()?;
    let (sampler, seed, default_lang) = (&ctx.cfg.sampler, ctx.cfg.seed, ctx.cfg.language);
    let results = ctx.par_map(&records, |r| -> Result<Option<Vec<TemplateRecord>>> {
        r.text.validate()?;
        let lang = r.language.unwrap_or(default_lang);
        let insertable = slot_weights(&r.text, sampler, lang)?.iter().filter(|&&w| w > 0.0).count();
        if insertable < sampler.k_min {
            return Ok(None);
        }
        let templates = sample_mmp_templates(&r.text, &r.id, lang, seed, sampler)?;
        Ok(Some(
            templates
                .iter()
                .enumerate()
                .map(|(i, t)| TemplateRecord::new(format!("{}#{i}", r.id), t, &fmt))
                .collect(),
        ))
    })?;
    let per_record = collect(results)?;
    let rejected = per_record.iter().filter(|r| r.is_none()).count();
    let templates: Vec<TemplateRecord> = per_record.into_iter().flatten().flatten().collect();
    let bytes = jsonl(&templates)?;
    let counts = Counts {
        records_in: records.len(),
        records_out: templates.len(),
        records_rejected: rejected,
    };
    ctx.finish(out, &bytes, &[&src], counts)
}

#[derive(Serialize)]
struct PretrainRecord {
    #[serde(flatten)]
    template: TemplateRecord,
    masked: Vec<Span>,
    hq_masked: Vec<Span>,
}

fn pretrain_mask(ctx: &Ctx, input: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[input])?;
    let src = Input::read(input)?;
    let records: Vec<TaggedRecord> = read_jsonl(src.bytes.as_slice())?;
    let fmt = ctx.cfg.mask()?;
    let (pc, seed) = (&ctx.cfg.pretrain, ctx.cfg.seed);
    let results = ctx.par_map(&records, |r| -> Result<PretrainRecord> {
        r.text.validate()?;
        let m = mask_for_pretraining(&r.text, &r.id, seed, pc)?;
        Ok(PretrainRecord {
            template: TemplateRecord::new(&r.id, &m.template, &fmt),
            masked: m.masked,
            hq_masked: m.hq_masked,
        })
    })?;
    let masked = collect(results)?;
    let bytes = jsonl(&masked)?;
    let counts = Counts {
        records_in: records.len(),
        records_out: masked.len(),
        records_rejected: 0,
    };
    ctx.finish(out, &bytes, &[&src], counts)
}

fn text_lines(bytes: &[u8]) -> Result<Vec<(usize, TokenSeq)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::invalid(format!("input is not UTF-8: {e}")))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, TokenSeq::from_whitespace(l)))
        .collect())
}

fn lm_train(ctx: &Ctx, corpus: &Path, order: usize, add_k: f64, out: &Path) -> Result<()> {
    check_distinct(out, &[corpus])?;
    let src = Input::read(corpus)?;
    let lines = text_lines(&src.bytes)?;
    let sentences: Vec<&TokenSeq> = lines.iter().map(|(_, t)| t).filter(|t| !t.is_empty()).collect();
    let model = NgramModel::train(&sentences, order, add_k)?;
    let mut bytes = Vec::new();
    model.save(&mut bytes)?;
    let counts = Counts {
        records_in: lines.len(),
        records_out: sentences.len(),
        records_rejected: lines.len() - sentences.len(),
    };
    ctx.finish(out, &bytes, &[&src], counts)
}

#[derive(Serialize)]
struct LineScore {
    line: usize,
    nll_sum: f64,
    token_count: usize,
    perplexity: f64,
}

fn lm_score(ctx: &Ctx, model: &Path, input: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[input, model])?;
    let m = Input::read(model)?;
    let model = NgramModel::load(m.bytes.as_slice())?;
    let src = Input::read(input)?;
    let lines: Vec<(usize, TokenSeq)> = text_lines(&src.bytes)?.into_iter().filter(|(_, t)| !t.is_empty()).collect();
    let results = ctx.par_map(&lines, |(n, t)| -> Result<LineScore> {
        let s = model.nll(t)?;
        Ok(LineScore {
            line: *n,
            nll_sum: s.nll_sum,
            token_count: s.token_count,
            perplexity: s.perplexity(),
        })
    })?;
    let scores = collect(results)?;
    let bytes = jsonl(&scores)?;
    let total = text_lines(&src.bytes)?.len();
    let counts = Counts {
        records_in: total,
        records_out: scores.len(),
        records_rejected: total - scores.len(),
    };
    ctx.finish(out, &bytes, &[&m, &src], counts)
}

fn metrics(ctx: &Ctx, sys: &Path, reference: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[sys, reference])?;
    let s = Input::read(sys)?;
    let r = Input::read(reference)?;
    let system = read_pairs(s.bytes.as_slice())?;
    let refs = read_pairs(r.bytes.as_slice())?;
    let ordered = match_references(&system, &refs)?;
    let fmt = ctx.cfg.mask()?;

    let corpus: Vec<&TokenSeq> = refs.iter().map(|p| &p.expansion).filter(|t| !t.is_empty()).collect();
    let sw = Stopwords::builtin(ctx.cfg.language);
    let mut factory = OracleFactory::new(&corpus, sw);
    let o = &ctx.cfg.oracles;
    let handles = MetricHandles {
        lm: factory.handle(ScorerKind::Lm, &o.lm)?,
        nli: factory.handle(ScorerKind::Nli, &o.nli)?,
        infill: factory.handle(ScorerKind::Infill, &o.infill)?,
    };
    let results = ctx.par_map(&system, |p| evaluate_pair(p, &handles, &fmt))?;
    let per_pair = collect(results)?;
    let cands: Vec<&TokenSeq> = system.iter().map(|p| &p.expansion).collect();
    let ys: Vec<&TokenSeq> = ordered.iter().map(|p| &p.expansion).collect();
    let report = summarize(per_pair, corpus_bleu(&cands, &ys)?);
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| Error::invalid(e.to_string()))?;
    bytes.push(b'\n');
    let counts = Counts {
        records_in: system.len(),
        records_out: report.per_pair.len(),
        records_rejected: 0,
    };
    ctx.finish(out, &bytes, &[&s, &r], counts)
}

fn report(ctx: &Ctx, input: &Path, out: &Path) -> Result<()> {
    check_distinct(out, &[input])?;
    let src = Input::read(input)?;
    let report: MetricReport =
        serde_json::from_slice(&src.bytes).map_err(|source| Error::Json { line: source.line(), source })?;
    let table = render_report(&report)?;
    let counts = Counts {
        records_in: report.per_pair.len(),
        records_out: 1,
        records_rejected: 0,
    };
    ctx.finish(out, table.as_bytes(), &[&src], counts)
}

//! Turning endpoint strings into scorer handles.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use expanse_core::lexicon::Stopwords;
use expanse_core::oracle::ExternalClient;
use expanse_core::{Error, NgramModel, Result, ScorerHandle, ScorerKind, TokenSeq};

pub const BUILTIN_ORDER: usize = 3;
pub const BUILTIN_ADD_K: f64 = 0.01;

/// Builds handles, training the built-in model at most once and opening
/// each external endpoint once even when several kinds name it.
pub struct OracleFactory<'a> {
    corpus: &'a [&'a TokenSeq],
    stopwords: Stopwords,
    trained: Option<Arc<NgramModel>>,
    clients: HashMap<String, Arc<ExternalClient>>,
}

impl<'a> OracleFactory<'a> {
    /// `corpus` trains the `builtin` n-gram model; `stopwords` back the overlap scorer.
    pub fn new(corpus: &'a [&'a TokenSeq], stopwords: Stopwords) -> Self {
        OracleFactory {
            corpus,
            stopwords,
            trained: None,
            clients: HashMap::new(),
        }
    }

    fn builtin_model(&mut self) -> Result<Arc<NgramModel>> {
        if let Some(m) = &self.trained {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(NgramModel::train(self.corpus, BUILTIN_ORDER, BUILTIN_ADD_K)?);
        self.trained = Some(Arc::clone(&m));
        Ok(m)
    }

    pub fn handle(&mut self, kind: ScorerKind, endpoint: &str) -> Result<Option<ScorerHandle>> {
        let endpoint = endpoint.trim();
        if endpoint == "none" {
            return Ok(None);
        }
        if endpoint == "builtin" {
            return Ok(Some(match kind {
                ScorerKind::Nli => ScorerHandle::overlap(self.stopwords.clone()),
                _ => ScorerHandle::ngram(kind, self.builtin_model()?),
            }));
        }
        if let Some(path) = endpoint.strip_prefix("builtin:") {
            if kind == ScorerKind::Nli {
                return Err(Error::invalid("builtin:MODEL applies to lm and infill scorers only"));
            }
            let file = File::open(path).map_err(|e| Error::invalid(format!("cannot open model {path}: {e}")))?;
            let model = NgramModel::load(BufReader::new(file))?;
            return Ok(Some(ScorerHandle::ngram(kind, Arc::new(model))));
        }
        if endpoint.is_empty() {
            return Err(Error::invalid(format!("empty {kind} oracle endpoint")));
        }
        let client = match self.clients.get(endpoint) {
            Some(c) => Arc::clone(c),
            None => {
                let c = Arc::new(ExternalClient::connect(endpoint)?);
                self.clients.insert(endpoint.to_owned(), Arc::clone(&c));
                c
            }
        };
        Ok(Some(ScorerHandle::shared_external(kind, endpoint, client)))
    }

    /// Like [`Self::handle`] but the scorer is mandatory.
    pub fn required(&mut self, kind: ScorerKind, endpoint: &str) -> Result<ScorerHandle> {
        self.handle(kind, endpoint)?
            .ok_or_else(|| Error::invalid(format!("the {kind} oracle cannot be `none` here")))
    }
}

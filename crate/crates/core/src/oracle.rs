//! Scoring oracles: built-in n-gram and overlap scorers, plus an external
//! backend speaking line-delimited JSON over a child process or TCP socket.
//!
//! Wire format, one JSON object per line:
//!
//! ```text
//! -> {"id": "7", "kind": "lm", "input": ["a", "b"]}
//! -> {"id": "8", "kind": "infill", "input": ["a", "<M1>"], "target": ["<M1>", "b"]}
//! -> {"id": "9", "kind": "nli", "input": [..premise..], "premise": [..], "hypothesis": [..]}
//! <- {"id": "8", "nll_sum": 1.25, "token_count": 1}
//! <- {"id": "9", "entailment": 0.93}
//! <- {"id": "7", "error": "model not loaded"}
//! ```
//!
//! Responses may arrive in any order and are matched to callers by id.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Stopwords;
use crate::ngram::{LmScore, NgramModel};
use crate::template::{InfillTemplatePair, MaskFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lm,
    Nli,
    Infill,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Lm => "lm",
            ScorerKind::Nli => "nli",
            ScorerKind::Infill => "infill",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    BuiltinNgram,
    BuiltinOverlap,
    External,
}

/// Anything that can answer scoring requests. Unsupported request kinds fail.
pub trait ScoringBackend: Send + Sync {
    fn lm(&self, _tokens: &[String]) -> Result<LmScore> {
        Err(Error::Oracle("backend does not score lm requests".into()))
    }

    fn infill(&self, _template: &InfillTemplatePair, _fmt: &MaskFormat) -> Result<LmScore> {
        Err(Error::Oracle("backend does not score infill requests".into()))
    }

    fn nli(&self, _premise: &[String], _hypothesis: &[String]) -> Result<f64> {
        Err(Error::Oracle("backend does not score nli requests".into()))
    }
}

impl ScoringBackend for NgramModel {
    fn lm(&self, tokens: &[String]) -> Result<LmScore> {
        self.nll(tokens)
    }

    fn infill(&self, template: &InfillTemplatePair, _fmt: &MaskFormat) -> Result<LmScore> {
        self.infill_nll(template)
    }
}

/// Entailment stand-in: share of the hypothesis's content tokens found in the premise.
#[derive(Debug, Clone)]
pub struct OverlapNli {
    stopwords: Stopwords,
}

impl OverlapNli {
    pub fn new(stopwords: Stopwords) -> Self {
        OverlapNli { stopwords }
    }
}

impl ScoringBackend for OverlapNli {
    fn nli(&self, premise: &[String], hypothesis: &[String]) -> Result<f64> {
        let content: HashSet<&str> = hypothesis
            .iter()
            .map(String::as_str)
            .filter(|t| self.stopwords.is_content(t))
            .collect();
        if content.is_empty() {
            return Ok(1.0);
        }
        let seen: HashSet<&str> = premise.iter().map(String::as_str).collect();
        let hit = content.iter().filter(|t| seen.contains(*t)).count();
        Ok(hit as f64 / content.len() as f64)
    }
}

/// A typed scorer: one kind of request, served by one backend.
#[derive(Clone)]
pub struct ScorerHandle {
    pub kind: ScorerKind,
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    inner: Arc<dyn ScoringBackend>,
}

impl fmt::Debug for ScorerHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScorerHandle")
            .field("kind", &self.kind)
            .field("backend", &self.backend)
            .field("endpoint", &self.endpoint)
            .finish()
    }
}

fn check_lm_score(s: LmScore) -> Result<LmScore> {
    if !(s.nll_sum.is_finite() && s.nll_sum >= 0.0) || s.token_count == 0 {
        return Err(Error::Oracle(format!(
            "invalid score: nll_sum {} over {} tokens",
            s.nll_sum, s.token_count
        )));
    }
    Ok(s)
}

impl ScorerHandle {
    pub fn ngram(kind: ScorerKind, model: Arc<NgramModel>) -> Self {
        ScorerHandle {
            kind,
            backend: BackendKind::BuiltinNgram,
            endpoint: None,
            inner: model,
        }
    }

    pub fn overlap(stopwords: Stopwords) -> Self {
        ScorerHandle {
            kind: ScorerKind::Nli,
            backend: BackendKind::BuiltinOverlap,
            endpoint: None,
            inner: Arc::new(OverlapNli::new(stopwords)),
        }
    }

    /// Wraps a caller-supplied backend, reported as external.
    pub fn custom(kind: ScorerKind, backend: Arc<dyn ScoringBackend>) -> Self {
        ScorerHandle {
            kind,
            backend: BackendKind::External,
            endpoint: None,
            inner: backend,
        }
    }

    /// `tcp://host:port` connects to a socket; anything else runs under `sh -c`.
    pub fn external(kind: ScorerKind, endpoint: &str) -> Result<Self> {
        let client = ExternalClient::connect(endpoint)?;
        Ok(Self::shared_external(kind, endpoint, Arc::new(client)))
    }

    /// Handle over an already-open client, so several kinds can share one process.
    pub fn shared_external(kind: ScorerKind, endpoint: &str, client: Arc<ExternalClient>) -> Self {
        ScorerHandle {
            kind,
            backend: BackendKind::External,
            endpoint: Some(endpoint.to_owned()),
            inner: client,
        }
    }

    fn expect(&self, kind: ScorerKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::invalid(format!("{} scorer used for a {kind} request", self.kind)))
        }
    }

    pub fn lm(&self, tokens: &[String]) -> Result<LmScore> {
        self.expect(ScorerKind::Lm)?;
        if tokens.is_empty() {
            return Err(Error::invalid("empty input"));
        }
        check_lm_score(self.inner.lm(tokens)?)
    }

    pub fn infill(&self, template: &InfillTemplatePair, fmt: &MaskFormat) -> Result<LmScore> {
        self.expect(ScorerKind::Infill)?;
        template.validate()?;
        check_lm_score(self.inner.infill(template, fmt)?)
    }

    pub fn nli(&self, premise: &[String], hypothesis: &[String]) -> Result<f64> {
        self.expect(ScorerKind::Nli)?;
        let p = self.inner.nli(premise, hypothesis)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Oracle(format!("entailment {p} outside [0, 1]")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    pub kind: ScorerKind,
    pub input: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nll_sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entailment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Default)]
struct Pending {
    waiting: HashMap<String, Sender<WireResponse>>,
    /// Set once the reader sees EOF or a protocol error; later requests fail fast.
    closed: Option<String>,
}

/// Default wait for one response.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Pipelined client for the external wire protocol.
///
/// Many threads may call concurrently: writes are serialized, and a reader
/// thread routes each response to its caller by id.
pub struct ExternalClient {
    writer: Mutex<Option<Box<dyn Write + Send>>>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    child: Mutex<Option<Child>>,
    timeout: Duration,
}

impl ExternalClient {
    pub fn connect(endpoint: &str) -> Result<Self> {
        if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let stream = TcpStream::connect(addr)
                .map_err(|e| Error::Oracle(format!("cannot connect to {addr}: {e}")))?;
            let reader = stream.try_clone()?;
            Ok(Self::from_streams(Box::new(stream), reader, None))
        } else {
            let mut child = Command::new("sh")
                .arg("-c")
                .arg(endpoint)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| Error::Oracle(format!("cannot start `{endpoint}`: {e}")))?;
            let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            Ok(Self::from_streams(Box::new(stdin), stdout, Some(child)))
        }
    }

    fn from_streams<R: Read + Send + 'static>(
        writer: Box<dyn Write + Send>,
        reader: R,
        child: Option<Child>,
    ) -> Self {
        let pending = Arc::new(Mutex::new(Pending::default()));
        let shared = Arc::clone(&pending);
        thread::spawn(move || read_responses(BufReader::new(reader), &shared));
        ExternalClient {
            writer: Mutex::new(Some(writer)),
            pending,
            next_id: AtomicU64::new(1),
            child: Mutex::new(child),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn call(&self, mut request: WireRequest) -> Result<WireResponse> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed).to_string();
        request.id.clone_from(&id);
        let (tx, rx) = mpsc::channel();
        {
            let mut p = self.pending.lock().expect("pending lock");
            if let Some(reason) = &p.closed {
                return Err(Error::Oracle(reason.clone()));
            }
            p.waiting.insert(id.clone(), tx);
        }
        let mut line = serde_json::to_vec(&request).map_err(|e| Error::Oracle(e.to_string()))?;
        line.push(b'\n');
        let written = {
            let mut w = self.writer.lock().expect("writer lock");
            match w.as_mut() {
                Some(w) => w.write_all(&line).and_then(|()| w.flush()),
                None => Err(std::io::Error::other("client is shut down")),
            }
        };
        if let Err(e) = written {
            self.pending.lock().expect("pending lock").waiting.remove(&id);
            return Err(Error::Oracle(format!("write failed: {e}")));
        }
        let response = match rx.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").waiting.remove(&id);
                return Err(Error::Oracle(format!("no response to request {id}")));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let reason = self.pending.lock().expect("pending lock").closed.clone();
                return Err(Error::Oracle(
                    reason.unwrap_or_else(|| "connection closed".to_owned()),
                ));
            }
        };
        if let Some(e) = response.error {
            return Err(Error::Oracle(e));
        }
        Ok(response)
    }

    fn nll_response(r: WireResponse) -> Result<LmScore> {
        match (r.nll_sum, r.token_count) {
            (Some(nll_sum), Some(token_count)) => Ok(LmScore { nll_sum, token_count }),
            _ => Err(Error::Oracle(format!("response {} lacks nll_sum/token_count", r.id))),
        }
    }
}

fn read_responses<R: BufRead>(reader: R, pending: &Mutex<Pending>) {
    let reason = 'read: {
        for line in reader.lines() {
            let line = match line {
                Ok(l) => l,
                Err(e) => break 'read format!("read failed: {e}"),
            };
            if line.trim().is_empty() {
                continue;
            }
            let response: WireResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => break 'read format!("malformed response {line:?}: {e}"),
            };
            let tx = pending.lock().expect("pending lock").waiting.remove(&response.id);
            match tx {
                Some(tx) => {
                    let _ = tx.send(response);
                }
                None => break 'read format!("response for unknown request id {:?}", response.id),
            }
        }
        "oracle closed its output".to_owned()
    };
    let mut p = pending.lock().expect("pending lock");
    p.closed = Some(reason);
    p.waiting.clear();
}

impl ScoringBackend for ExternalClient {
    fn lm(&self, tokens: &[String]) -> Result<LmScore> {
        let r = self.call(WireRequest {
            id: String::new(),
            kind: ScorerKind::Lm,
            input: tokens.to_vec(),
            target: None,
            premise: None,
            hypothesis: None,
        })?;
        Self::nll_response(r)
    }

    fn infill(&self, template: &InfillTemplatePair, fmt: &MaskFormat) -> Result<LmScore> {
        let r = self.call(WireRequest {
            id: String::new(),
            kind: ScorerKind::Infill,
            input: template.render_input(fmt),
            target: Some(template.render_target(fmt)),
            premise: None,
            hypothesis: None,
        })?;
        Self::nll_response(r)
    }

    fn nli(&self, premise: &[String], hypothesis: &[String]) -> Result<f64> {
        let r = self.call(WireRequest {
            id: String::new(),
            kind: ScorerKind::Nli,
            input: premise.to_vec(),
            target: None,
            premise: Some(premise.to_vec()),
            hypothesis: Some(hypothesis.to_vec()),
        })?;
        r.entailment
            .ok_or_else(|| Error::Oracle(format!("response {} lacks entailment", r.id)))
    }
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        // Closing stdin is the shutdown signal; give the child a moment, then kill it.
        if let Ok(mut w) = self.writer.lock() {
            w.take();
        }
        let Ok(mut guard) = self.child.lock() else { return };
        if let Some(child) = guard.as_mut() {
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

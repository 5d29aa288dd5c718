use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use relgraph_core::config::{build_embedder, build_provider, AppConfig, ConfigError};
use relgraph_core::extract::ExtractionConfig;
use relgraph_core::provider::{Provider, ProviderError};
use relgraph_core::retrieve::{read_index, write_index, Embedder, Index, RetrievalConfig};
use relgraph_core::Document;
use serde::Serialize;
use tokio::sync::{watch, Mutex};
use tracing::{info, warn};

use crate::error::ApiError;
use crate::session::{Applied, Event, KbSource, SessionState};
use crate::store::{sessions_dir, SessionLog, INDEX_FILE};

/// Counts provider calls made by a running extraction.
#[derive(Debug, Default)]
pub struct Progress {
    pub running: AtomicBool,
    pub done: AtomicU64,
    pub expected: AtomicU64,
    pub kind: std::sync::Mutex<Option<&'static str>>,
}

#[derive(Debug, Serialize)]
pub struct ProgressView {
    pub running: bool,
    pub kind: Option<&'static str>,
    pub calls_done: u64,
    pub calls_expected: u64,
}

impl Progress {
    pub fn view(&self) -> ProgressView {
        ProgressView {
            running: self.running.load(Ordering::SeqCst),
            kind: *self.kind.lock().expect("progress lock"),
            calls_done: self.done.load(Ordering::SeqCst),
            calls_expected: self.expected.load(Ordering::SeqCst),
        }
    }
}

/// Wraps a provider and bumps a counter after every call.
pub struct Counting<'a> {
    pub inner: &'a dyn Provider,
    pub progress: &'a Progress,
}

impl Provider for Counting<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
        let out = self.inner.complete(prompt, temperature);
        self.progress.done.fetch_add(1, Ordering::SeqCst);
        out
    }
}

pub struct SessionHandle {
    dir: PathBuf,
    current: RwLock<Arc<SessionState>>,
    /// Serializes writers; holds the log they append to.
    writer: Mutex<SessionLog>,
    revision: watch::Sender<u64>,
    index: Mutex<Option<Arc<Index>>>,
    pub progress: Progress,
}

impl SessionHandle {
    fn new(state: SessionState, log: SessionLog) -> Self {
        let (tx, _) = watch::channel(state.revision);
        SessionHandle {
            dir: log.dir().to_path_buf(),
            current: RwLock::new(Arc::new(state)),
            writer: Mutex::new(log),
            revision: tx,
            index: Mutex::new(None),
            progress: Progress::default(),
        }
    }

    /// The latest committed state. Readers never wait for writers.
    pub fn snapshot(&self) -> Arc<SessionState> {
        self.current.read().expect("session lock").clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.revision.subscribe()
    }

    /// Applies `event` if `expected` (when given) is still the current
    /// revision, persists it, and publishes the new state.
    pub async fn mutate(
        &self,
        expected: Option<u64>,
        event: Event,
    ) -> Result<(Arc<SessionState>, Applied), ApiError> {
        let mut log = self.writer.lock().await;
        let cur = self.snapshot();
        if let Some(rev) = expected {
            if rev != cur.revision {
                return Err(ApiError::stale(rev, cur.revision));
            }
        }
        let mut next = (*cur).clone();
        let applied = next.apply(&event)?;
        log.append(&event, &next)?;
        let next = Arc::new(next);
        *self.current.write().expect("session lock") = next.clone();
        self.revision.send_replace(next.revision);
        Ok((next, applied))
    }
}

struct Inner {
    config: AppConfig,
    provider: Arc<dyn Provider>,
    embedder: Arc<dyn Embedder>,
    default_kb: KbSource,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Builds provider and embedder from `config` and restores sessions.
    pub fn from_config(config: AppConfig) -> Result<AppState, ConfigError> {
        let provider = build_provider(&config.provider)?;
        let embedder = build_embedder(&config.embedder)?;
        AppState::with_parts(config, provider, embedder)
    }

    /// Like [`from_config`](Self::from_config) with explicit provider and
    /// embedder (tests pass scripted ones).
    pub fn with_parts(
        config: AppConfig,
        provider: Arc<dyn Provider>,
        embedder: Arc<dyn Embedder>,
    ) -> Result<AppState, ConfigError> {
        let default_kb = match &config.server.default_kb {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.clone(),
                    source,
                })?;
                let source = KbSource::Text(text);
                source.load(1).map_err(|e| {
                    ConfigError::Invalid(format!("default KB {}: {}", p.display(), e.message))
                })?;
                source
            }
            None => KbSource::Starter,
        };
        let state = AppState {
            inner: Arc::new(Inner {
                config,
                provider,
                embedder,
                default_kb,
                sessions: RwLock::new(BTreeMap::new()),
            }),
        };
        state.restore()?;
        Ok(state)
    }

    fn data_dir(&self) -> &Path {
        &self.inner.config.server.data_dir
    }

    fn restore(&self) -> Result<(), ConfigError> {
        let dir = sessions_dir(self.data_dir());
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(source) => return Err(ConfigError::Io { path: dir, source }),
        };
        let mut sessions = self.inner.sessions.write().expect("sessions lock");
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            match SessionLog::open(&path) {
                Ok((state, log)) => {
                    info!(session = %state.id, revision = state.revision, "restored session");
                    sessions.insert(state.id.clone(), Arc::new(SessionHandle::new(state, log)));
                }
                Err(e) => {
                    warn!(path = %path.display(), error = %e.message, "skipping unreadable session")
                }
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &AppConfig {
        &self.inner.config
    }

    pub fn provider(&self) -> Arc<dyn Provider> {
        self.inner.provider.clone()
    }

    pub fn embedder(&self) -> Arc<dyn Embedder> {
        self.inner.embedder.clone()
    }

    pub fn extraction_defaults(&self) -> &ExtractionConfig {
        &self.inner.config.extraction
    }

    pub fn retrieval(&self) -> &RetrievalConfig {
        &self.inner.config.retrieval
    }

    pub fn create_session(
        &self,
        doc_text: String,
        title: Option<String>,
        kb: Option<String>,
    ) -> Result<Arc<SessionState>, ApiError> {
        if doc_text.trim().is_empty() {
            return Err(ApiError::invalid(
                "empty_document",
                "document text is empty",
            ));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut doc = Document::new(format!("doc-{}", &id[..8]), doc_text);
        doc.title = title;
        let source = kb
            .map(KbSource::Text)
            .unwrap_or_else(|| self.inner.default_kb.clone());
        let state = SessionState::create(id.clone(), doc, source)?;
        let log = SessionLog::create(self.data_dir(), &state)?;
        let handle = Arc::new(SessionHandle::new(state, log));
        let snap = handle.snapshot();
        self.inner
            .sessions
            .write()
            .expect("sessions lock")
            .insert(id, handle);
        Ok(snap)
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session {id}")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.inner
            .sessions
            .read()
            .expect("sessions lock")
            .keys()
            .cloned()
            .collect()
    }

    /// The session's evidence index: cached, else read from its sidecar file,
    /// else built (off the async runtime) and written to the sidecar.
    pub async fn index(&self, h: &SessionHandle) -> Result<Arc<Index>, ApiError> {
        let mut slot = h.index.lock().await;
        if let Some(idx) = slot.as_ref() {
            return Ok(idx.clone());
        }
        let doc = h.snapshot().doc.clone();
        let path = h.dir.join(INDEX_FILE);
        let embedder = self.embedder();
        let cfg = self.retrieval().clone();
        let idx = tokio::task::spawn_blocking(move || -> Result<Index, ApiError> {
            if let Ok(f) = fs::File::open(&path) {
                match read_index(std::io::BufReader::new(f), &doc) {
                    Ok(idx) if idx.dim() == embedder.dim() => return Ok(idx),
                    Ok(_) => warn!(path = %path.display(), "index dimension changed; rebuilding"),
                    Err(e) => {
                        warn!(path = %path.display(), error = %e, "unreadable index; rebuilding")
                    }
                }
            }
            let idx = Index::build(&doc, cfg.chunk_chars, cfg.overlap_chars, embedder.as_ref())?;
            let f = fs::File::create(&path)?;
            write_index(&idx, std::io::BufWriter::new(f))
                .map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(idx)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
        let idx = Arc::new(idx);
        *slot = Some(idx.clone());
        Ok(idx)
    }
}

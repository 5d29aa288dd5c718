use std::collections::BTreeMap;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use relgraph_core::engine::Conflict;
use relgraph_core::extract::{extract_characters, extract_relations, ExtractionConfig};
use relgraph_core::graph::{
    EntityId, EntityPatch, EntityStatus, SplitPart, TripleKey, TripleStatus,
};
use relgraph_core::kb::{save_kb, validate_kb, RelId};
use relgraph_core::metrics::small_world_index;
use relgraph_core::retrieve::{
    build_resolution_prompt, choose, render_statement, resolve_conflict, retrieve_evidence, Hit,
};
use relgraph_core::view::graph_view;
use relgraph_core::{Entity, GraphDocument};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::session::{Applied, Event, KbSource, SessionState};
use crate::state::{AppState, Counting, Progress};

/// A JSON body whose rejections come back in the API error shape. An empty
/// body reads as `{}`.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| {
            ApiError::new(StatusCode::BAD_REQUEST, "unreadable_body", e.body_text())
        })?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) {
            b"{}"
        } else {
            &bytes
        };
        serde_json::from_slice(bytes)
            .map(Body)
            .map_err(|e| ApiError::invalid("invalid_body", e.to_string()))
    }
}

/// Query parameters with API-shaped rejections.
pub struct Query<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Query(q.0))
            .map_err(|e| ApiError::invalid("invalid_query", e.body_text()))
    }
}

/// The revision a write was based on: `If-Match` wins over a body field.
fn expected_revision(headers: &HeaderMap, body: Option<u64>) -> Result<Option<u64>, ApiError> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(body);
    };
    let s = v
        .to_str()
        .ok()
        .map(|s| s.trim().trim_start_matches("W/").trim_matches('"'))
        .unwrap_or_default();
    s.parse().map(Some).map_err(|_| {
        ApiError::invalid(
            "invalid_if_match",
            format!("If-Match must be a revision number, got {s:?}"),
        )
    })
}

pub fn routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/extract/characters", post(extract_chars))
        .route("/sessions/{id}/extract/relations", post(extract_rels))
        .route("/sessions/{id}/progress", get(progress))
        .route("/sessions/{id}/entities/merge", post(merge))
        .route("/sessions/{id}/entities/{eid}", patch(patch_entity))
        .route("/sessions/{id}/entities/{eid}/split", post(split))
        .route("/sessions/{id}/triples", post(add_triple))
        .route("/sessions/{id}/triples/{key}", patch(set_triple_status))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/evidence", get(evidence))
        .route("/sessions/{id}/conflicts/{cid}/resolve", post(resolve))
        .route("/sessions/{id}/kb", get(get_kb).put(put_kb))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/metrics/swi", get(swi))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

fn applied_body(state: &SessionState, a: Applied) -> Value {
    json!({
        "session_id": state.id,
        "revision": a.revision,
        "added_inferences": a.added_inferences,
        "conflicts": a.conflicts,
        "detail": a.detail,
    })
}

async fn write(
    app: &AppState,
    id: &str,
    headers: &HeaderMap,
    revision: Option<u64>,
    event: Event,
) -> Result<Json<Value>, ApiError> {
    let h = app.session(id)?;
    let (state, applied) = h
        .mutate(expected_revision(headers, revision)?, event)
        .await?;
    Ok(Json(applied_body(&state, applied)))
}

#[derive(Deserialize)]
struct CreateBody {
    text: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    kb: Option<String>,
}

async fn create_session(
    State(app): State<AppState>,
    Body(b): Body<CreateBody>,
) -> Result<Response, ApiError> {
    let s = app.create_session(b.text, b.title, b.kb)?;
    let body = json!({ "session_id": s.id, "doc_id": s.doc.id, "revision": s.revision });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn summary(s: &SessionState) -> Value {
    json!({
        "session_id": s.id,
        "doc_id": s.doc.id,
        "title": s.doc.title,
        "revision": s.revision,
        "kb_version": s.kb.version(),
        "entities": s.graph.entities().count(),
        "triples": s.graph.triples().count(),
        "open_conflicts": s.conflicts.len(),
    })
}

async fn list_sessions(State(app): State<AppState>) -> Result<Json<Value>, ApiError> {
    let mut out = Vec::new();
    for id in app.session_ids() {
        out.push(summary(&app.session(&id)?.snapshot()));
    }
    Ok(Json(json!({ "sessions": out })))
}

async fn session_summary(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    Ok(Json(summary(&app.session(&id)?.snapshot())))
}

#[derive(Deserialize)]
struct ExtractBody {
    #[serde(default)]
    config: Option<ExtractionConfig>,
    #[serde(default)]
    revision: Option<u64>,
}

/// Marks an extraction as running for as long as it lives.
struct Running<'a>(&'a Progress);

impl<'a> Running<'a> {
    fn start(p: &'a Progress, kind: &'static str, expected: u64) -> Result<Self, ApiError> {
        if p.running.swap(true, Ordering::SeqCst) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "extraction_running",
                "an extraction is already running for this session",
            ));
        }
        p.done.store(0, Ordering::SeqCst);
        p.expected.store(expected, Ordering::SeqCst);
        *p.kind.lock().expect("progress lock") = Some(kind);
        Ok(Running(p))
    }
}

impl Drop for Running<'_> {
    fn drop(&mut self) {
        self.0.running.store(false, Ordering::SeqCst);
    }
}

enum Kind {
    Characters,
    Relations(Vec<Entity>),
}

async fn run_extraction(
    app: AppState,
    id: String,
    headers: HeaderMap,
    body: ExtractBody,
    relations: bool,
) -> Result<Json<Value>, ApiError> {
    let h = app.session(&id)?;
    let expected = expected_revision(&headers, body.revision)?;
    let snap = h.snapshot();
    if let Some(rev) = expected {
        if rev != snap.revision {
            return Err(ApiError::stale(rev, snap.revision));
        }
    }
    let cfg = body
        .config
        .unwrap_or_else(|| app.extraction_defaults().clone());
    cfg.validate()?;
    let kind = if relations {
        let confirmed: Vec<Entity> = snap
            .graph
            .entities()
            .filter(|e| e.status == EntityStatus::Confirmed)
            .cloned()
            .collect();
        if confirmed.is_empty() {
            return Err(ApiError::invalid(
                "no_confirmed_entities",
                "confirm at least one entity before extracting relations",
            ));
        }
        Kind::Relations(confirmed)
    } else {
        Kind::Characters
    };
    let runs = if relations { cfg.n_e } else { cfg.n_c };
    let chunks =
        relgraph_core::extract::chunk_text(&snap.doc.text, cfg.max_chunk_chars).len() as u64;
    let provider = app.provider();
    let worker = h.clone();
    let task = tokio::task::spawn_blocking(move || {
        let label = if relations { "relations" } else { "characters" };
        let _running = Running::start(&worker.progress, label, u64::from(runs) * chunks)?;
        let p = Counting {
            inner: provider.as_ref(),
            progress: &worker.progress,
        };
        let out = match kind {
            Kind::Characters => extract_characters(&snap.doc, &cfg, &p),
            Kind::Relations(entities) => {
                extract_relations(&snap.doc, &entities, &snap.kb, &cfg, &p)
            }
        };
        out.map_err(ApiError::from)
    });
    let ex = task
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let event = if relations {
        Event::Ingested {
            characters: Vec::new(),
            relations: ex.candidates.clone(),
        }
    } else {
        Event::Ingested {
            characters: ex.candidates.clone(),
            relations: Vec::new(),
        }
    };
    let (state, applied) = h.mutate(expected, event).await?;
    let mut body = applied_body(&state, applied);
    body["candidates"] = json!(ex.candidates);
    body["failed_runs"] = json!(ex.failed_runs);
    body["rejects"] = json!(ex.rejects);
    Ok(Json(body))
}

async fn extract_chars(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<ExtractBody>,
) -> Result<Json<Value>, ApiError> {
    run_extraction(app, id, headers, b, false).await
}

async fn extract_rels(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<ExtractBody>,
) -> Result<Json<Value>, ApiError> {
    run_extraction(app, id, headers, b, true).await
}

async fn progress(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let h = app.session(&id)?;
    Ok(Json(json!(h.progress.view())))
}

fn entity_id(s: &str) -> Result<EntityId, ApiError> {
    EntityId::new(s).map_err(|e| ApiError::not_found(e.to_string()))
}

#[derive(Deserialize)]
struct PatchEntityBody {
    #[serde(flatten)]
    patch: EntityPatch,
    #[serde(default)]
    revision: Option<u64>,
}

async fn patch_entity(
    State(app): State<AppState>,
    Path((id, eid)): Path<(String, String)>,
    headers: HeaderMap,
    Body(b): Body<PatchEntityBody>,
) -> Result<Json<Value>, ApiError> {
    let event = Event::EntityPatched {
        id: entity_id(&eid)?,
        patch: b.patch,
    };
    write(&app, &id, &headers, b.revision, event).await
}

#[derive(Deserialize)]
struct MergeBody {
    keep: EntityId,
    absorb: EntityId,
    #[serde(default)]
    revision: Option<u64>,
}

async fn merge(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<MergeBody>,
) -> Result<Json<Value>, ApiError> {
    let event = Event::Merged {
        keep: b.keep,
        absorb: b.absorb,
    };
    write(&app, &id, &headers, b.revision, event).await
}

#[derive(Deserialize)]
struct SplitBody {
    parts: Vec<SplitPart>,
    /// Triple key → index of the part that takes it over.
    #[serde(default)]
    assignment: BTreeMap<TripleKey, usize>,
    #[serde(default)]
    revision: Option<u64>,
}

async fn split(
    State(app): State<AppState>,
    Path((id, eid)): Path<(String, String)>,
    headers: HeaderMap,
    Body(b): Body<SplitBody>,
) -> Result<Json<Value>, ApiError> {
    let event = Event::Split {
        id: entity_id(&eid)?,
        parts: b.parts,
        assignment: b.assignment,
    };
    write(&app, &id, &headers, b.revision, event).await
}

#[derive(Deserialize)]
struct TripleBody {
    src: EntityId,
    rel: RelId,
    dst: EntityId,
    #[serde(default)]
    revision: Option<u64>,
}

async fn add_triple(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<TripleBody>,
) -> Result<Json<Value>, ApiError> {
    let event = Event::TripleAdded {
        src: b.src,
        rel: b.rel,
        dst: b.dst,
    };
    write(&app, &id, &headers, b.revision, event).await
}

#[derive(Deserialize)]
struct StatusBody {
    status: TripleStatus,
    #[serde(default)]
    revision: Option<u64>,
}

fn triple_key(s: &str) -> Result<TripleKey, ApiError> {
    s.parse().map_err(|e: relgraph_core::graph::GraphError| {
        ApiError::invalid("invalid_triple_key", e.to_string())
    })
}

async fn set_triple_status(
    State(app): State<AppState>,
    Path((id, key)): Path<(String, String)>,
    headers: HeaderMap,
    Body(b): Body<StatusBody>,
) -> Result<Json<Value>, ApiError> {
    let event = Event::TripleStatusSet {
        key: triple_key(&key)?,
        status: b.status,
    };
    write(&app, &id, &headers, b.revision, event).await
}

#[derive(Deserialize)]
struct GraphQuery {
    #[serde(default)]
    revision_after: Option<u64>,
    /// Seconds to wait for a newer revision; capped by the server setting.
    #[serde(default)]
    wait: Option<u64>,
}

fn graph_body(s: &SessionState) -> Value {
    json!({
        "session_id": s.id,
        "revision": s.revision,
        "kb_version": s.kb.version(),
        "graph": GraphDocument::annotated(&s.graph, &s.kb),
        "view": graph_view(&s.graph, &s.conflicts),
        "resolved": s.resolved,
    })
}

/// With `revision_after=N` the call returns once the revision exceeds N, or
/// 304 when the wait runs out.
async fn graph(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<GraphQuery>,
) -> Result<Response, ApiError> {
    let h = app.session(&id)?;
    if let Some(after) = q.revision_after {
        let mut rx = h.subscribe();
        let cap = app.config().server.long_poll_secs;
        let wait = Duration::from_secs(q.wait.unwrap_or(cap).min(cap));
        let newer = tokio::time::timeout(wait, rx.wait_for(|r| *r > after)).await;
        if !matches!(newer, Ok(Ok(_))) {
            return Ok(StatusCode::NOT_MODIFIED.into_response());
        }
    }
    Ok(Json(graph_body(&h.snapshot())).into_response())
}

#[derive(Deserialize)]
struct EvidenceQuery {
    #[serde(default)]
    conflict: Option<String>,
    #[serde(default)]
    triple: Option<String>,
    #[serde(default)]
    k: Option<usize>,
}

fn find_conflict<'a>(s: &'a SessionState, cid: &str) -> Result<&'a Conflict, ApiError> {
    s.open_conflict(cid)
        .or_else(|| s.resolved.iter().rev().find(|c| c.id == cid))
        .ok_or_else(|| ApiError::not_found(format!("conflict {cid}")))
}

async fn evidence(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EvidenceQuery>,
) -> Result<Json<Value>, ApiError> {
    let h = app.session(&id)?;
    let s = h.snapshot();
    let k = q.k.unwrap_or(app.retrieval().k);
    let query = match (&q.conflict, &q.triple) {
        (Some(cid), None) => Target::Conflict(find_conflict(&s, cid)?.clone()),
        (None, Some(key)) => {
            let key = triple_key(key)?;
            if !s.graph.contains(&key) {
                return Err(ApiError::not_found(format!("triple {key}")));
            }
            Target::Triple(key)
        }
        _ => {
            return Err(ApiError::invalid(
                "invalid_query",
                "give exactly one of conflict or triple",
            ))
        }
    };
    let idx = app.index(&h).await?;
    let embedder = app.embedder();
    let hits = tokio::task::spawn_blocking(move || -> Result<(String, Vec<Hit>), ApiError> {
        match query {
            Target::Conflict(c) => {
                let text = relgraph_core::retrieve::render_query(&s.graph, &s.kb, &c);
                let hits = retrieve_evidence(&idx, &s.graph, &s.kb, &c, k, embedder.as_ref())?;
                Ok((text, hits))
            }
            Target::Triple(key) => {
                let text = render_statement(&s.graph, &s.kb, &key);
                let v = embedder
                    .embed(std::slice::from_ref(&text))
                    .map_err(relgraph_core::retrieve::RetrieveError::from)?;
                let hits = idx.search(&v[0], k)?;
                Ok((text, hits))
            }
        }
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(json!({ "query": hits.0, "k": k, "hits": hits.1 })))
}

enum Target {
    Conflict(Conflict),
    Triple(TripleKey),
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Auto,
    Choice,
}

#[derive(Deserialize)]
struct ResolveBody {
    mode: Mode,
    #[serde(default)]
    choice: Option<String>,
    #[serde(default)]
    revision: Option<u64>,
}

fn open_conflict(s: &SessionState, cid: &str) -> Result<Conflict, ApiError> {
    if let Some(c) = s.open_conflict(cid) {
        return Ok(c.clone());
    }
    if s.resolved.iter().any(|c| c.id == cid) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "conflict_not_open",
            format!("conflict {cid} is already resolved"),
        ));
    }
    Err(ApiError::not_found(format!("conflict {cid}")))
}

/// `auto` asks the provider and returns its proposal without changing the
/// session; `choice` applies the named option.
async fn resolve(
    State(app): State<AppState>,
    Path((id, cid)): Path<(String, String)>,
    headers: HeaderMap,
    Body(b): Body<ResolveBody>,
) -> Result<Json<Value>, ApiError> {
    let h = app.session(&id)?;
    let s = h.snapshot();
    let conflict = open_conflict(&s, &cid)?;
    match b.mode {
        Mode::Auto => {
            let idx = app.index(&h).await?;
            let (embedder, provider, k) = (app.embedder(), app.provider(), app.retrieval().k);
            let out = tokio::task::spawn_blocking(move || -> Result<Value, ApiError> {
                let hits =
                    retrieve_evidence(&idx, &s.graph, &s.kb, &conflict, k, embedder.as_ref())?;
                let prompt = build_resolution_prompt(&s.graph, &s.kb, &conflict, hits);
                let proposal = resolve_conflict(&conflict, &prompt, provider.as_ref())?;
                Ok(json!({
                    "session_id": s.id,
                    "revision": s.revision,
                    "applied": false,
                    "proposal": proposal,
                    "prompt": prompt,
                }))
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??;
            Ok(Json(out))
        }
        Mode::Choice => {
            let label = b.choice.ok_or_else(|| {
                ApiError::invalid("missing_choice", "mode choice needs a choice label")
            })?;
            let prompt = build_resolution_prompt(&s.graph, &s.kb, &conflict, Vec::new());
            let resolution = choose(&prompt, label.trim())?;
            let (state, applied) = h
                .mutate(
                    expected_revision(&headers, b.revision)?,
                    Event::Resolved { resolution },
                )
                .await?;
            let mut body = applied_body(&state, applied);
            body["applied"] = json!(true);
            Ok(Json(body))
        }
    }
}

async fn get_kb(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let s = app.session(&id)?.snapshot();
    let source = match &s.kb_source {
        KbSource::Starter => "starter",
        KbSource::Text(_) => "text",
    };
    Ok(Json(json!({
        "session_id": s.id,
        "revision": s.revision,
        "version": s.kb.version(),
        "source": source,
        "text": save_kb(&s.kb),
        "relations": s.kb.relations().collect::<Vec<_>>(),
        "rules": s.kb.rules().collect::<Vec<_>>(),
        "diagnostics": validate_kb(&s.kb),
    })))
}

#[derive(Deserialize)]
struct KbBody {
    text: String,
    #[serde(default)]
    revision: Option<u64>,
}

async fn put_kb(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(b): Body<KbBody>,
) -> Result<Json<Value>, ApiError> {
    write(
        &app,
        &id,
        &headers,
        b.revision,
        Event::KbReplaced { text: b.text },
    )
    .await
}

async fn export(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = app.session(&id)?.snapshot();
    Ok(([(header::CONTENT_TYPE, "application/json")], s.export()).into_response())
}

#[derive(Deserialize)]
struct SwiQuery {
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
}

fn default_samples() -> usize {
    10
}

async fn swi(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SwiQuery>,
) -> Result<Json<Value>, ApiError> {
    if q.samples == 0 {
        return Err(ApiError::invalid(
            "invalid_query",
            "samples must be at least 1",
        ));
    }
    let s: Arc<SessionState> = app.session(&id)?.snapshot();
    let report =
        tokio::task::spawn_blocking(move || small_world_index(&s.graph, q.samples, q.seed))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(json!(report)))
}

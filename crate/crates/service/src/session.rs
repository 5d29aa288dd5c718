//! Session state and the events that change it.
//!
//! Every mutation is an [`Event`]. Applying an event edits the graph and then
//! re-runs closure and conflict detection, so the state is always closed and
//! its open conflicts always equal a fresh detection pass. Replaying the same
//! events from the same start reproduces the same state.

use std::collections::BTreeMap;

use relgraph_core::engine::{close, detect_conflicts, Conflict, ConflictState, Derivation};
use relgraph_core::extract::{ingest_candidates, VotedCandidate};
use relgraph_core::graph::{
    EntityId, EntityPatch, Graph, Provenance, SplitPart, TripleKey, TripleStatus,
};
use relgraph_core::kb::{load_kb, validate_kb, RelId, RuleKb, Severity};
use relgraph_core::retrieve::{apply_resolution, Resolution};
use relgraph_core::{Document, GraphDocument};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;

/// Where the session's KB came from. The starter KB is kept symbolic so its
/// rules keep their builtin origin across restarts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", content = "text", rename_all = "snake_case")]
pub enum KbSource {
    Starter,
    Text(String),
}

impl KbSource {
    pub fn load(&self, version: u64) -> Result<RuleKb, ApiError> {
        let kb = match self {
            KbSource::Starter => RuleKb::starter(),
            KbSource::Text(t) => load_kb(t)?,
        };
        let hard: Vec<_> = validate_kb(&kb)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if !hard.is_empty() {
            return Err(
                ApiError::invalid("invalid_kb", "knowledge base has hard errors")
                    .with_detail(json!({ "diagnostics": hard })),
            );
        }
        Ok(kb.with_version(version))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Ingested {
        characters: Vec<VotedCandidate>,
        relations: Vec<VotedCandidate>,
    },
    EntityPatched {
        id: EntityId,
        patch: EntityPatch,
    },
    Merged {
        keep: EntityId,
        absorb: EntityId,
    },
    Split {
        id: EntityId,
        parts: Vec<SplitPart>,
        assignment: BTreeMap<TripleKey, usize>,
    },
    TripleAdded {
        src: EntityId,
        rel: RelId,
        dst: EntityId,
    },
    TripleStatusSet {
        key: TripleKey,
        status: TripleStatus,
    },
    Resolved {
        resolution: Resolution,
    },
    KbReplaced {
        text: String,
    },
}

/// What one event did, as returned to the client.
#[derive(Debug, Clone, Serialize)]
pub struct Applied {
    pub revision: u64,
    /// Inferences added by the reasoning pass that followed the edit.
    pub added_inferences: Vec<Derivation>,
    /// The open conflicts after the edit.
    pub conflicts: Vec<Conflict>,
    /// Event-specific details (ingest report, merge report, new ids).
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub id: String,
    pub doc: Document,
    pub graph: Graph,
    pub kb: RuleKb,
    pub kb_source: KbSource,
    /// Open conflicts; always `detect_conflicts(graph, kb)`.
    pub conflicts: Vec<Conflict>,
    /// Conflicts closed by a resolution, oldest first.
    pub resolved: Vec<Conflict>,
    pub revision: u64,
}

/// Everything needed to rebuild a state without replaying its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub doc: Document,
    pub graph: GraphDocument,
    pub next_seq: u64,
    pub kb: KbSource,
    pub kb_version: u64,
    pub resolved: Vec<Conflict>,
    pub revision: u64,
}

impl SessionState {
    pub fn create(id: String, doc: Document, kb_source: KbSource) -> Result<Self, ApiError> {
        let kb = kb_source.load(1)?;
        let mut graph = Graph::new(doc.id.clone());
        graph.set_kb_version(kb.version());
        let mut s = SessionState {
            id,
            doc,
            graph,
            kb,
            kb_source,
            conflicts: Vec::new(),
            resolved: Vec::new(),
            revision: 0,
        };
        s.reason()?;
        Ok(s)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id.clone(),
            doc: self.doc.clone(),
            graph: GraphDocument::from_graph(&self.graph),
            next_seq: self.graph.next_seq(),
            kb: self.kb_source.clone(),
            kb_version: self.kb.version(),
            resolved: self.resolved.clone(),
            revision: self.revision,
        }
    }

    pub fn restore(s: Snapshot) -> Result<Self, ApiError> {
        let kb = s.kb.load(s.kb_version)?;
        let mut graph = s
            .graph
            .into_graph()
            .map_err(|e| ApiError::internal(format!("corrupt snapshot: {e}")))?;
        graph.reserve_seq(s.next_seq);
        let mut state = SessionState {
            id: s.id,
            doc: s.doc,
            graph,
            kb,
            kb_source: s.kb,
            conflicts: Vec::new(),
            resolved: s.resolved,
            revision: s.revision,
        };
        state.reason()?;
        Ok(state)
    }

    /// Closure then conflict detection. Returns the new derivations.
    fn reason(&mut self) -> Result<Vec<Derivation>, ApiError> {
        let c = close(&self.graph, &self.kb).map_err(|e| ApiError::internal(e.to_string()))?;
        self.graph = c.graph;
        self.conflicts = detect_conflicts(&self.graph, &self.kb);
        Ok(c.derivations)
    }

    pub fn open_conflict(&self, id: &str) -> Option<&Conflict> {
        self.conflicts.iter().find(|c| c.id == id)
    }

    /// Applies `e`, reasons, and bumps the revision. On error `self` may be
    /// partly edited; callers apply events to a scratch copy.
    pub fn apply(&mut self, e: &Event) -> Result<Applied, ApiError> {
        let detail = match e {
            Event::Ingested {
                characters,
                relations,
            } => {
                let report = ingest_candidates(&mut self.graph, &self.kb, characters, relations);
                json!(report)
            }
            Event::EntityPatched { id, patch } => {
                self.graph.update_entity(id, patch.clone())?;
                json!({ "entity": self.graph.entity(id.as_str()) })
            }
            Event::Merged { keep, absorb } => {
                let report = self.graph.merge_entities(keep, absorb)?;
                json!(report)
            }
            Event::Split {
                id,
                parts,
                assignment,
            } => {
                let (ids, report) = self.graph.split_entity(id, parts, assignment)?;
                json!({ "entities": ids, "report": report })
            }
            Event::TripleAdded { src, rel, dst } => {
                let outcome = self.graph.upsert_triple(
                    &self.kb,
                    src,
                    rel,
                    dst,
                    TripleStatus::Confirmed,
                    Provenance::Manual,
                )?;
                let key = TripleKey::new(src.clone(), rel.clone(), dst.clone());
                json!({ "key": key, "outcome": outcome })
            }
            Event::TripleStatusSet { key, status } => {
                self.graph.set_status(key, *status)?;
                json!({ "key": key, "status": status })
            }
            Event::Resolved { resolution } => {
                let Some(c) = self.open_conflict(&resolution.conflict_id).cloned() else {
                    return Err(ApiError::new(
                        axum::http::StatusCode::CONFLICT,
                        "conflict_not_open",
                        format!("conflict {} is not open", resolution.conflict_id),
                    ));
                };
                apply_resolution(&mut self.graph, resolution)?;
                self.resolved.push(Conflict {
                    state: ConflictState::Resolved {
                        kept: resolution.kept.clone(),
                        dropped: resolution.dropped.clone(),
                    },
                    ..c
                });
                json!({ "resolution": resolution })
            }
            Event::KbReplaced { text } => {
                let source = KbSource::Text(text.clone());
                let kb = source.load(self.kb.version() + 1)?;
                let report = self.graph.retain_relations(&kb);
                self.graph.set_kb_version(kb.version());
                self.kb = kb;
                self.kb_source = source;
                json!({ "kb_version": self.kb.version(), "report": report })
            }
        };
        let added_inferences = self.reason()?;
        self.revision += 1;
        Ok(Applied {
            revision: self.revision,
            added_inferences,
            conflicts: self.conflicts.clone(),
            detail,
        })
    }

    /// The canonical export: annotated graph JSON.
    pub fn export(&self) -> String {
        GraphDocument::annotated(&self.graph, &self.kb).to_json_pretty()
    }
}

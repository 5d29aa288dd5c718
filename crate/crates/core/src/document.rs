//! JSON import/export of annotation graphs.

use serde::{Deserialize, Serialize};

use crate::engine::{self, Conflict, Derivation};
use crate::graph::{
    Entity, EntityId, Graph, GraphError, Provenance, Triple, TripleKey, TripleStatus,
};
use crate::kb::{RelId, RuleKb};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub src: EntityId,
    pub rel: RelId,
    pub dst: EntityId,
    pub status: TripleStatus,
    pub provenance: Provenance,
}

/// The graph exchange document:
/// `{doc_id, entities: [...], triples: [...], derivations?, conflicts?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub doc_id: String,
    #[serde(default)]
    pub kb_version: u64,
    pub entities: Vec<Entity>,
    pub triples: Vec<TripleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivations: Option<Vec<Derivation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<Vec<Conflict>>,
}

impl GraphDocument {
    pub fn from_graph(g: &Graph) -> Self {
        GraphDocument {
            doc_id: g.doc_id().to_string(),
            kb_version: g.kb_version(),
            entities: g.entities().cloned().collect(),
            triples: g
                .triples()
                .map(|t| TripleRecord {
                    src: t.key.src.clone(),
                    rel: t.key.rel.clone(),
                    dst: t.key.dst.clone(),
                    status: t.status,
                    provenance: t.provenance.clone(),
                })
                .collect(),
            derivations: None,
            conflicts: None,
        }
    }

    /// Export with derivations and the current conflicts attached.
    pub fn annotated(g: &Graph, kb: &RuleKb) -> Self {
        let mut doc = GraphDocument::from_graph(g);
        doc.derivations = Some(engine::derivations(g));
        doc.conflicts = Some(engine::detect_conflicts(g, kb));
        doc
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph documents serialize")
    }

    /// Rebuilds a graph, checking every structural invariant.
    pub fn into_graph(self) -> Result<Graph, GraphError> {
        let mut g = Graph::new(self.doc_id);
        g.set_kb_version(self.kb_version);
        for e in self.entities {
            g.insert_entity_with_id(e.id, &e.canonical, e.aliases, e.mentions, e.status)?;
        }
        for t in self.triples {
            let key = TripleKey::new(t.src, t.rel, t.dst);
            if g.contains(&key) {
                return Err(GraphError::Duplicate(format!("triple {key}")));
            }
            g.insert_raw(Triple {
                key,
                status: t.status,
                provenance: t.provenance,
            });
        }
        g.check_invariants().map_err(GraphError::Import)?;
        Ok(g)
    }

    pub fn from_json(s: &str) -> Result<Graph, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(s).map_err(|e| GraphError::Import(e.to_string()))?;
        doc.into_graph()
    }
}

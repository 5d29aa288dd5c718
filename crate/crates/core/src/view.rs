//! Display colors derived from graph state.
//!
//! Triples: suggested yellow, confirmed green, red while they take part in an
//! open conflict (or carry the `conflicted` status), grey once rejected.
//! Entities: suggested red, confirmed green.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Conflict;
use crate::graph::{Entity, EntityId, EntityStatus, Graph, Triple, TripleKey, TripleStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Yellow,
    Green,
    Red,
    Grey,
}

pub fn triple_color(t: &Triple, in_open_conflict: bool) -> Color {
    match t.status {
        TripleStatus::Rejected => Color::Grey,
        TripleStatus::Conflicted => Color::Red,
        _ if in_open_conflict => Color::Red,
        TripleStatus::Confirmed => Color::Green,
        TripleStatus::Suggested => Color::Yellow,
    }
}

pub fn entity_color(e: &Entity) -> Color {
    match e.status {
        EntityStatus::Suggested => Color::Red,
        EntityStatus::Confirmed => Color::Green,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleView {
    pub key: TripleKey,
    pub color: Color,
    /// Ids of the open conflicts this triple is part of.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<String>,
    /// The other offenders of those conflicts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clashes_with: Vec<TripleKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityView {
    pub id: EntityId,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphView {
    pub entities: Vec<EntityView>,
    pub triples: Vec<TripleView>,
}

pub fn graph_view(g: &Graph, conflicts: &[Conflict]) -> GraphView {
    let mut membership: BTreeMap<&TripleKey, Vec<&Conflict>> = BTreeMap::new();
    for c in conflicts.iter().filter(|c| c.is_open()) {
        for k in &c.offenders {
            membership.entry(k).or_default().push(c);
        }
    }
    let triples = g
        .triples()
        .map(|t| {
            let cs = membership
                .get(&t.key)
                .map(Vec::as_slice)
                .unwrap_or_default();
            let mut clashes_with: Vec<TripleKey> = cs
                .iter()
                .flat_map(|c| c.offenders.iter())
                .filter(|k| **k != t.key)
                .cloned()
                .collect();
            clashes_with.sort();
            clashes_with.dedup();
            TripleView {
                key: t.key.clone(),
                color: triple_color(t, !cs.is_empty()),
                conflicts: cs.iter().map(|c| c.id.clone()).collect(),
                clashes_with,
            }
        })
        .collect();
    let entities = g
        .entities()
        .map(|e| EntityView {
            id: e.id.clone(),
            color: entity_color(e),
        })
        .collect();
    GraphView { entities, triples }
}

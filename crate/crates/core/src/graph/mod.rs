//! The mutable annotation graph.
//!
//! Entities carry aliases and mention spans; triples are directed and carry a
//! status and a provenance. Rejected triples stay in the graph as tombstones so
//! that automatic processes cannot bring them back.

mod edit;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use edit::{EntityPatch, MergeReport, SplitPart, UpsertOutcome};
pub use types::{
    Document, Entity, EntityId, EntityStatus, MentionSpan, Provenance, Triple, TripleKey,
    TriplePattern, TripleStatus,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown triple {0}")]
    UnknownTriple(String),
    #[error("invalid entity id {0:?}")]
    InvalidEntityId(String),
    #[error("invalid triple key {0:?}")]
    InvalidTripleKey(String),
    #[error("invalid span [{start}, {end})")]
    InvalidSpan { start: usize, end: usize },
    #[error("self-loop {0} is not allowed")]
    SelfLoop(String),
    #[error("cannot merge entity {0} into itself")]
    SameEntity(String),
    #[error("alias {alias:?} already belongs to {owner}")]
    AliasCollision { alias: String, owner: String },
    #[error("entity needs a nonempty canonical name among its aliases")]
    BadCanonical,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("triple {0} touching the split entity has no assignment")]
    UnassignedTriple(String),
    #[error("premise {premise} of {triple} is not in the graph")]
    MissingPremise { triple: String, premise: String },
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("invalid graph document: {0}")]
    Import(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    doc_id: String,
    entities: BTreeMap<EntityId, Entity>,
    aliases: BTreeMap<String, EntityId>,
    triples: BTreeMap<TripleKey, Triple>,
    kb_version: u64,
    next_seq: u64,
}

impl Graph {
    pub fn new(doc_id: impl Into<String>) -> Self {
        Graph {
            doc_id: doc_id.into(),
            entities: BTreeMap::new(),
            aliases: BTreeMap::new(),
            triples: BTreeMap::new(),
            kb_version: 0,
            next_seq: 1,
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn kb_version(&self) -> u64 {
        self.kb_version
    }

    pub fn set_kb_version(&mut self, v: u64) {
        self.kb_version = v;
    }

    /// The sequence number the next minted entity id starts from. Ids of
    /// removed entities are not reused, so snapshots must carry this.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Raises the id counter; it never moves backwards.
    pub fn reserve_seq(&mut self, n: u64) {
        self.next_seq = self.next_seq.max(n);
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.keys()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity_by_alias(&self, alias: &str) -> Option<&Entity> {
        self.aliases.get(alias).and_then(|id| self.entities.get(id))
    }

    /// All triples in `(src, rel, dst)` order, tombstones included.
    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.values()
    }

    pub fn triple(&self, key: &TripleKey) -> Option<&Triple> {
        self.triples.get(key)
    }

    pub fn contains(&self, key: &TripleKey) -> bool {
        self.triples.contains_key(key)
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn triple_keys(&self) -> BTreeSet<TripleKey> {
        self.triples.keys().cloned().collect()
    }

    /// Triples matching every bound field of `pattern`, in key order.
    pub fn query(&self, pattern: &TriplePattern) -> Vec<&Triple> {
        self.triples
            .values()
            .filter(|t| pattern.matches(t))
            .collect()
    }

    /// The next `e<n>` id not used by any entity.
    fn peek_fresh_id(&self) -> EntityId {
        (self.next_seq..)
            .map(|n| EntityId::new(format!("e{n}")).expect("valid id"))
            .find(|id| !self.entities.contains_key(id))
            .expect("unbounded range")
    }

    fn check_aliases_free(
        &self,
        aliases: &BTreeSet<String>,
        except: &[&EntityId],
    ) -> Result<(), GraphError> {
        for a in aliases {
            if let Some(owner) = self.aliases.get(a) {
                if !except.contains(&owner) {
                    return Err(GraphError::AliasCollision {
                        alias: a.clone(),
                        owner: owner.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Adds an entity with a freshly minted id.
    pub fn add_entity(
        &mut self,
        canonical: &str,
        aliases: impl IntoIterator<Item = String>,
        mentions: Vec<MentionSpan>,
        status: EntityStatus,
    ) -> Result<EntityId, GraphError> {
        let id = self.peek_fresh_id();
        self.insert_entity_with_id(id.clone(), canonical, aliases, mentions, status)?;
        Ok(id)
    }

    /// Adds an entity under a caller-chosen id (used by imports).
    pub fn insert_entity_with_id(
        &mut self,
        id: EntityId,
        canonical: &str,
        aliases: impl IntoIterator<Item = String>,
        mut mentions: Vec<MentionSpan>,
        status: EntityStatus,
    ) -> Result<(), GraphError> {
        if self.entities.contains_key(&id) {
            return Err(GraphError::Duplicate(format!("entity {id}")));
        }
        if canonical.is_empty() {
            return Err(GraphError::BadCanonical);
        }
        let mut aliases: BTreeSet<String> = aliases.into_iter().filter(|a| !a.is_empty()).collect();
        aliases.insert(canonical.to_string());
        self.check_aliases_free(&aliases, &[])?;
        mentions.sort();
        mentions.dedup();
        for a in &aliases {
            self.aliases.insert(a.clone(), id.clone());
        }
        if let Some(n) = id
            .as_str()
            .strip_prefix('e')
            .and_then(|n| n.parse::<u64>().ok())
        {
            self.next_seq = self.next_seq.max(n + 1);
        }
        self.entities.insert(
            id.clone(),
            Entity {
                id,
                canonical: canonical.to_string(),
                aliases,
                mentions,
                status,
            },
        );
        Ok(())
    }

    /// Adds mention spans to an entity, keeping them sorted and unique.
    pub fn add_mentions(&mut self, id: &EntityId, spans: &[MentionSpan]) -> Result<(), GraphError> {
        let e = self
            .entities
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownEntity(id.to_string()))?;
        e.mentions.extend_from_slice(spans);
        e.mentions.sort();
        e.mentions.dedup();
        Ok(())
    }

    /// Inserts without any checks. Callers uphold the invariants.
    pub(crate) fn insert_raw(&mut self, t: Triple) {
        self.triples.insert(t.key.clone(), t);
    }

    /// Checks every structural invariant. Intended for tests and imports.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen_alias = BTreeMap::new();
        for (id, e) in &self.entities {
            if &e.id != id {
                return Err(format!("entity key {id} holds id {}", e.id));
            }
            if !e.aliases.contains(&e.canonical) {
                return Err(format!("{id}: canonical not among aliases"));
            }
            for a in &e.aliases {
                if let Some(other) = seen_alias.insert(a.clone(), id.clone()) {
                    return Err(format!("alias {a:?} shared by {other} and {id}"));
                }
                if self.aliases.get(a) != Some(id) {
                    return Err(format!("alias index out of sync for {a:?}"));
                }
            }
        }
        if seen_alias.len() != self.aliases.len() {
            return Err("alias index has stale entries".into());
        }
        for (k, t) in &self.triples {
            if &t.key != k {
                return Err(format!("triple key mismatch at {k}"));
            }
            if !self.entities.contains_key(&k.src) || !self.entities.contains_key(&k.dst) {
                return Err(format!("{k} has a dead endpoint"));
            }
            if k.is_self_loop() {
                return Err(format!("{k} is a self-loop"));
            }
            for p in t.provenance.premises() {
                if !self.triples.contains_key(p) {
                    return Err(format!("{k} cites missing premise {p}"));
                }
            }
        }
        if self.ungrounded().next().is_some() {
            return Err("cyclic justification among inferred triples".into());
        }
        Ok(())
    }

    /// Inferred triples whose justification does not bottom out in
    /// non-inferred triples (missing premises or cycles).
    fn ungrounded(&self) -> impl Iterator<Item = &TripleKey> {
        let mut grounded: BTreeSet<&TripleKey> = self
            .triples
            .iter()
            .filter(|(_, t)| !matches!(t.provenance, Provenance::Inferred { .. }))
            .map(|(k, _)| k)
            .collect();
        loop {
            let before = grounded.len();
            for (k, t) in &self.triples {
                if !grounded.contains(k)
                    && t.provenance.premises().iter().all(|p| grounded.contains(p))
                {
                    grounded.insert(k);
                }
            }
            if grounded.len() == before {
                break;
            }
        }
        self.triples.keys().filter(move |k| !grounded.contains(k))
    }
}

#[cfg(test)]
mod tests;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    EntityId, EntityStatus, Graph, GraphError, MentionSpan, Provenance, Triple, TripleKey,
    TripleStatus,
};
use crate::kb::{RelId, RuleKb};

/// What happened to the triples during a merge, split or removal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    /// Triples that would have become self-loops and were dropped.
    pub dropped_self_loops: Vec<TripleKey>,
    /// Keys where two triples were collapsed into one.
    pub collapsed: Vec<TripleKey>,
    /// Suggested inferences removed because their premises disappeared.
    pub orphans_removed: Vec<TripleKey>,
    /// Non-suggested inferences whose premises disappeared; now `manual`.
    pub orphans_promoted: Vec<TripleKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPart {
    pub canonical: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    #[serde(default)]
    pub mentions: Vec<MentionSpan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPatch {
    #[serde(default)]
    pub status: Option<EntityStatus>,
    #[serde(default)]
    pub canonical: Option<String>,
    #[serde(default)]
    pub aliases: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsertOutcome {
    Inserted,
    Updated,
    /// A rejected tombstone absorbed a non-manual upsert.
    Tombstoned,
}

impl Graph {
    fn require_entity(&self, id: &EntityId) -> Result<(), GraphError> {
        if self.entities.contains_key(id) {
            Ok(())
        } else {
            Err(GraphError::UnknownEntity(id.to_string()))
        }
    }

    /// Edits canonical name, alias set and/or status of one entity.
    pub fn update_entity(&mut self, id: &EntityId, patch: EntityPatch) -> Result<(), GraphError> {
        let current = self
            .entities
            .get(id)
            .ok_or_else(|| GraphError::UnknownEntity(id.to_string()))?;
        let mut aliases = patch.aliases.unwrap_or_else(|| current.aliases.clone());
        aliases.retain(|a| !a.is_empty());
        let canonical = match patch.canonical {
            Some(c) => c,
            None if aliases.contains(&current.canonical) => current.canonical.clone(),
            None => aliases
                .iter()
                .next()
                .cloned()
                .ok_or(GraphError::BadCanonical)?,
        };
        if canonical.is_empty() {
            return Err(GraphError::BadCanonical);
        }
        aliases.insert(canonical.clone());
        self.check_aliases_free(&aliases, &[id])?;

        let entity = self.entities.get_mut(id).expect("checked");
        for a in &entity.aliases {
            self.aliases.remove(a);
        }
        for a in &aliases {
            self.aliases.insert(a.clone(), id.clone());
        }
        entity.aliases = aliases;
        entity.canonical = canonical;
        if let Some(s) = patch.status {
            entity.status = s;
        }
        Ok(())
    }

    /// Folds `absorb` into `keep`.
    ///
    /// Aliases and mentions are unioned, triple endpoints rewritten, and
    /// duplicate keys collapsed by status precedence (the survivor keeps its
    /// provenance; on equal status the triple already on `keep` survives).
    pub fn merge_entities(
        &mut self,
        keep: &EntityId,
        absorb: &EntityId,
    ) -> Result<MergeReport, GraphError> {
        self.require_entity(keep)?;
        self.require_entity(absorb)?;
        if keep == absorb {
            return Err(GraphError::SameEntity(keep.to_string()));
        }
        let absorbed = self.entities.remove(absorb).expect("checked");
        let kept = self.entities.get_mut(keep).expect("checked");
        for a in &absorbed.aliases {
            self.aliases.insert(a.clone(), keep.clone());
        }
        kept.aliases.extend(absorbed.aliases);
        kept.mentions.extend(absorbed.mentions);
        kept.mentions.sort();
        kept.mentions.dedup();
        kept.status = kept.status.max(absorbed.status);

        let rename = |e: &EntityId| if e == absorb { keep.clone() } else { e.clone() };
        let rewrite = |k: &TripleKey| TripleKey::new(rename(&k.src), k.rel.clone(), rename(&k.dst));
        let report = self.rewrite_triples(|k| k.touches(absorb).then(|| rewrite(k)), rewrite);
        Ok(report)
    }

    /// Rewrites every triple for which `target` returns a new key, collapsing
    /// duplicates, then remaps premises with `premise_map` and prunes orphans.
    fn rewrite_triples(
        &mut self,
        target: impl Fn(&TripleKey) -> Option<TripleKey>,
        premise_map: impl Fn(&TripleKey) -> TripleKey,
    ) -> MergeReport {
        let mut report = MergeReport::default();
        let moving: Vec<(TripleKey, TripleKey)> = self
            .triples
            .keys()
            .filter_map(|k| target(k).map(|n| (k.clone(), n)))
            .collect();
        let mut moved = Vec::with_capacity(moving.len());
        for (old, _) in &moving {
            moved.push(self.triples.remove(old).expect("present"));
        }
        for ((_, new_key), mut t) in moving.into_iter().zip(moved) {
            if new_key.is_self_loop() {
                report.dropped_self_loops.push(new_key);
                continue;
            }
            t.key = new_key.clone();
            match self.triples.get_mut(&new_key) {
                Some(existing) => {
                    report.collapsed.push(new_key);
                    if t.status > existing.status {
                        *existing = t;
                    }
                }
                None => {
                    self.triples.insert(new_key, t);
                }
            }
        }
        for t in self.triples.values_mut() {
            if let Provenance::Inferred { premises, .. } = &mut t.provenance {
                for p in premises.iter_mut() {
                    *p = premise_map(p);
                }
            }
        }
        self.prune_orphans(&mut report);
        report
    }

    /// Inferred triples that lost their justification are removed when merely
    /// suggested, or kept as `manual` when an annotator already acted on them.
    fn prune_orphans(&mut self, report: &mut MergeReport) {
        loop {
            let orphans: Vec<TripleKey> = self.ungrounded().cloned().collect();
            if orphans.is_empty() {
                break;
            }
            let (suggested, acted): (Vec<_>, Vec<_>) = orphans
                .into_iter()
                .partition(|k| self.triples[k].status == TripleStatus::Suggested);
            if !acted.is_empty() {
                for k in acted {
                    self.triples.get_mut(&k).expect("present").provenance = Provenance::Manual;
                    report.orphans_promoted.push(k);
                }
                continue;
            }
            for k in suggested {
                self.triples.remove(&k);
                report.orphans_removed.push(k);
            }
        }
    }

    /// Replaces `src` by one fresh entity per part.
    ///
    /// Every alias and mention of `src` must land in exactly one part, and
    /// every triple touching `src` must be assigned a part index.
    pub fn split_entity(
        &mut self,
        src: &EntityId,
        parts: &[SplitPart],
        assignment: &BTreeMap<TripleKey, usize>,
    ) -> Result<(Vec<EntityId>, MergeReport), GraphError> {
        let original = self
            .entities
            .get(src)
            .ok_or_else(|| GraphError::UnknownEntity(src.to_string()))?
            .clone();
        if parts.len() < 2 {
            return Err(GraphError::InvalidSplit("need at least two parts".into()));
        }

        let part_aliases: Vec<BTreeSet<String>> = parts
            .iter()
            .map(|p| {
                let mut a = p.aliases.clone();
                a.insert(p.canonical.clone());
                a
            })
            .collect();
        if parts.iter().any(|p| p.canonical.is_empty()) {
            return Err(GraphError::BadCanonical);
        }
        let mut all_aliases = BTreeSet::new();
        for a in part_aliases.iter().flatten() {
            if !all_aliases.insert(a.clone()) {
                return Err(GraphError::InvalidSplit(format!(
                    "alias {a:?} appears in more than one part"
                )));
            }
        }
        if let Some(missing) = original.aliases.iter().find(|a| !all_aliases.contains(*a)) {
            return Err(GraphError::InvalidSplit(format!(
                "alias {missing:?} is not assigned to any part"
            )));
        }
        self.check_aliases_free(&all_aliases, &[src])?;

        let mut part_mentions: Vec<MentionSpan> = parts
            .iter()
            .flat_map(|p| p.mentions.iter().copied())
            .collect();
        part_mentions.sort();
        if part_mentions != original.mentions {
            return Err(GraphError::InvalidSplit(
                "part mentions must partition the entity's mentions".into(),
            ));
        }

        let touching: BTreeSet<&TripleKey> =
            self.triples.keys().filter(|k| k.touches(src)).collect();
        for k in &touching {
            match assignment.get(*k) {
                None => return Err(GraphError::UnassignedTriple(k.to_string())),
                Some(&i) if i >= parts.len() => {
                    return Err(GraphError::InvalidSplit(format!(
                        "triple {k} assigned to missing part {i}"
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = assignment.keys().find(|k| !touching.contains(k)) {
            return Err(GraphError::InvalidSplit(format!(
                "assignment names {extra}, which does not touch {src}"
            )));
        }

        // Validation done; mutate.
        for a in &original.aliases {
            self.aliases.remove(a);
        }
        self.entities.remove(src);
        let mut ids = Vec::with_capacity(parts.len());
        for (p, aliases) in parts.iter().zip(part_aliases) {
            let id = self.peek_fresh_id();
            self.insert_entity_with_id(
                id.clone(),
                &p.canonical,
                aliases,
                p.mentions.clone(),
                original.status,
            )
            .expect("validated");
            ids.push(id);
        }
        let remap = |k: &TripleKey| -> TripleKey {
            match assignment.get(k) {
                Some(&i) => {
                    let swap = |e: &EntityId| if e == src { ids[i].clone() } else { e.clone() };
                    TripleKey::new(swap(&k.src), k.rel.clone(), swap(&k.dst))
                }
                None => k.clone(),
            }
        };
        let report = self.rewrite_triples(|k| k.touches(src).then(|| remap(k)), remap);
        Ok((ids, report))
    }

    /// Inserts a triple or updates the one with the same key.
    ///
    /// * A rejected tombstone only changes under `manual` provenance.
    /// * Provenance precedence is `manual > extracted > inferred`; equal rank
    ///   replaces (fresh votes or premises).
    /// * Non-manual upserts never lower the status.
    pub fn upsert_triple(
        &mut self,
        kb: &RuleKb,
        src: &EntityId,
        rel: &RelId,
        dst: &EntityId,
        status: TripleStatus,
        provenance: Provenance,
    ) -> Result<UpsertOutcome, GraphError> {
        self.require_entity(src)?;
        self.require_entity(dst)?;
        if !kb.has_relation(rel.as_str()) {
            return Err(GraphError::UnknownRelation(rel.to_string()));
        }
        let key = TripleKey::new(src.clone(), rel.clone(), dst.clone());
        if key.is_self_loop() {
            return Err(GraphError::SelfLoop(key.to_string()));
        }
        for p in provenance.premises() {
            if p == &key || !self.triples.contains_key(p) {
                return Err(GraphError::MissingPremise {
                    triple: key.to_string(),
                    premise: p.to_string(),
                });
            }
        }
        let manual = provenance == Provenance::Manual;
        match self.triples.get_mut(&key) {
            None => {
                self.triples.insert(
                    key.clone(),
                    Triple {
                        key,
                        status,
                        provenance,
                    },
                );
                Ok(UpsertOutcome::Inserted)
            }
            Some(t) if t.status == TripleStatus::Rejected && !manual => {
                Ok(UpsertOutcome::Tombstoned)
            }
            Some(t) => {
                if provenance.rank() >= t.provenance.rank() {
                    t.provenance = provenance;
                }
                t.status = if manual { status } else { t.status.max(status) };
                Ok(UpsertOutcome::Updated)
            }
        }
    }

    /// Explicit status change; the only non-manual way to revive a tombstone.
    pub fn set_status(&mut self, key: &TripleKey, status: TripleStatus) -> Result<(), GraphError> {
        let t = self
            .triples
            .get_mut(key)
            .ok_or_else(|| GraphError::UnknownTriple(key.to_string()))?;
        t.status = status;
        Ok(())
    }

    /// Deletes a triple outright (no tombstone). Inferences that cited it are
    /// pruned like orphans.
    pub fn remove_triple(&mut self, key: &TripleKey) -> Result<(Triple, MergeReport), GraphError> {
        let t = self
            .triples
            .remove(key)
            .ok_or_else(|| GraphError::UnknownTriple(key.to_string()))?;
        let mut report = MergeReport::default();
        self.prune_orphans(&mut report);
        Ok((t, report))
    }

    /// Drops every triple whose relation is not in `kb` (after a KB edit).
    pub fn retain_relations(&mut self, kb: &RuleKb) -> MergeReport {
        let mut report = MergeReport::default();
        let gone: Vec<TripleKey> = self
            .triples
            .keys()
            .filter(|k| !kb.has_relation(k.rel.as_str()))
            .cloned()
            .collect();
        for k in gone {
            self.triples.remove(&k);
            report.orphans_removed.push(k);
        }
        self.prune_orphans(&mut report);
        report
    }
}

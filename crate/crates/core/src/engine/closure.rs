use std::collections::{BTreeMap, BTreeSet};

use tracing::debug;

use super::{Derivation, EngineError};
use crate::graph::{EntityId, Graph, Provenance, Triple, TripleKey, TripleStatus};
use crate::kb::{RelId, RuleKb, RuleKind};

/// Result of [`close`].
#[derive(Debug, Clone)]
pub struct Closure {
    pub graph: Graph,
    /// One entry per triple added by this call, in insertion order.
    pub derivations: Vec<Derivation>,
    pub diagnostics: Vec<String>,
}

/// One-premise consequence: `rel(x,y) ⟹ out(x,y)` or `out(y,x)` when `flip`.
struct Unary {
    rule: RuleKind,
    out: RelId,
    flip: bool,
}

struct Compose {
    rule: RuleKind,
    first: RelId,
    second: RelId,
    out: RelId,
}

struct CompiledRules {
    unary: BTreeMap<RelId, Vec<Unary>>,
    comps: Vec<Compose>,
}

impl CompiledRules {
    fn new(kb: &RuleKb) -> Self {
        let mut unary: BTreeMap<RelId, Vec<Unary>> = BTreeMap::new();
        let mut comps = Vec::new();
        for kind in kb.rule_kinds() {
            let mut push = |on: &RelId, out: &RelId, flip: bool| {
                unary.entry(on.clone()).or_default().push(Unary {
                    rule: kind.clone(),
                    out: out.clone(),
                    flip,
                })
            };
            match kind {
                RuleKind::Symmetry(r) => push(r, r, true),
                RuleKind::Inversion(a, b) => {
                    push(a, b, true);
                    if a != b {
                        push(b, a, true);
                    }
                }
                RuleKind::Hierarchy { sub, sup } => push(sub, sup, false),
                RuleKind::Composition(a, b, c) => comps.push(Compose {
                    rule: kind.clone(),
                    first: a.clone(),
                    second: b.clone(),
                    out: c.clone(),
                }),
                _ => {}
            }
        }
        CompiledRules { unary, comps }
    }
}

/// Adjacency over participating triples: `(rel, src) → dsts` and `(rel, dst) → srcs`.
#[derive(Default)]
struct Index {
    out: BTreeMap<(RelId, EntityId), BTreeSet<EntityId>>,
    inc: BTreeMap<(RelId, EntityId), BTreeSet<EntityId>>,
}

impl Index {
    fn insert(&mut self, k: &TripleKey) {
        self.out
            .entry((k.rel.clone(), k.src.clone()))
            .or_default()
            .insert(k.dst.clone());
        self.inc
            .entry((k.rel.clone(), k.dst.clone()))
            .or_default()
            .insert(k.src.clone());
    }

    fn targets(&self, rel: &RelId, src: &EntityId) -> impl Iterator<Item = &EntityId> {
        self.out
            .get(&(rel.clone(), src.clone()))
            .into_iter()
            .flatten()
    }

    fn sources(&self, rel: &RelId, dst: &EntityId) -> impl Iterator<Item = &EntityId> {
        self.inc
            .get(&(rel.clone(), dst.clone()))
            .into_iter()
            .flatten()
    }
}

/// Least fixpoint of the completion rules (symmetry, inversion, composition,
/// hierarchy) over suggested and confirmed triples.
///
/// Evaluation is semi-naive: each round only joins triples derived in the
/// previous round. New triples enter as `suggested` with `inferred`
/// provenance; existing triples (tombstones included) are never touched and
/// block re-derivation of their key; self-loops are never produced.
pub fn close(g: &Graph, kb: &RuleKb) -> Result<Closure, EngineError> {
    let rules = CompiledRules::new(kb);
    let mut graph = g.clone();
    let mut index = Index::default();
    let mut depth: BTreeMap<TripleKey, u32> = BTreeMap::new();
    let mut delta: Vec<TripleKey> = Vec::new();
    for t in g.triples().filter(|t| t.status.participates()) {
        index.insert(&t.key);
        depth.insert(t.key.clone(), 0);
        delta.push(t.key.clone());
    }

    let n_rel = kb.relation_count().max(1);
    let n_ent = g.entity_count().max(1);
    let hard_cap = n_ent * n_ent * n_rel;
    let depth_cap = (n_ent * n_rel) as u32;
    let mut derivations = Vec::new();
    let mut diagnostics = Vec::new();
    let mut round = 0usize;

    while !delta.is_empty() {
        round += 1;
        let mut fresh: BTreeMap<TripleKey, (RuleKind, Vec<TripleKey>)> = BTreeMap::new();
        let mut consider = |c: TripleKey, rule: &RuleKind, premises: Vec<TripleKey>| {
            if !c.is_self_loop() && !graph.contains(&c) && !fresh.contains_key(&c) {
                fresh.insert(c, (rule.clone(), premises));
            }
        };
        for t in &delta {
            for u in rules.unary.get(&t.rel).into_iter().flatten() {
                let c = if u.flip {
                    TripleKey::new(t.dst.clone(), u.out.clone(), t.src.clone())
                } else {
                    TripleKey::new(t.src.clone(), u.out.clone(), t.dst.clone())
                };
                consider(c, &u.rule, vec![t.clone()]);
            }
            for comp in &rules.comps {
                if comp.first == t.rel {
                    for z in index.targets(&comp.second, &t.dst) {
                        let c = TripleKey::new(t.src.clone(), comp.out.clone(), z.clone());
                        let q = TripleKey::new(t.dst.clone(), comp.second.clone(), z.clone());
                        consider(c, &comp.rule, vec![t.clone(), q]);
                    }
                }
                if comp.second == t.rel {
                    for x in index.sources(&comp.first, &t.src) {
                        let c = TripleKey::new(x.clone(), comp.out.clone(), t.dst.clone());
                        let p = TripleKey::new(x.clone(), comp.first.clone(), t.src.clone());
                        consider(c, &comp.rule, vec![p, t.clone()]);
                    }
                }
            }
        }

        delta = Vec::with_capacity(fresh.len());
        for (key, (rule, premises)) in fresh {
            let d = 1 + premises.iter().map(|p| depth[p]).max().unwrap_or(0);
            if d > depth_cap {
                diagnostics.push(format!(
                    "derivation depth {d} of {key} exceeds cap {depth_cap}"
                ));
            }
            depth.insert(key.clone(), d);
            index.insert(&key);
            graph.insert_raw(Triple {
                key: key.clone(),
                status: TripleStatus::Suggested,
                provenance: Provenance::Inferred {
                    rule: rule.clone(),
                    premises: premises.clone(),
                },
            });
            derivations.push(Derivation {
                conclusion: key.clone(),
                rule,
                premises,
                depth: d,
            });
            delta.push(key);
        }
        if derivations.len() > hard_cap {
            return Err(EngineError::CapExceeded {
                produced: derivations.len(),
                cap: hard_cap,
            });
        }
    }
    debug!(
        rounds = round,
        added = derivations.len(),
        "closure reached fixpoint"
    );
    Ok(Closure {
        graph,
        derivations,
        diagnostics,
    })
}

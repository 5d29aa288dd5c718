//! Completion-operation planning.
//!
//! Given an initial graph and a target graph over the same entities, the
//! planner emits a finite op sequence that turns one into the other. Ops are
//! staged: symmetry/inversion steps (`t1_symmetry`), then composition steps
//! (`t2_transitive`), then subtype steps (`copy_completion`), repeated while
//! any stage makes progress. Target triples that no rule can reach become
//! `manual_add`; initial triples absent from the target become
//! `manual_remove`, and the plan is flagged as outside the subset case.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{instantiate, EngineError};
use crate::graph::{EntityId, Graph, Provenance, TripleKey, TripleStatus};
use crate::kb::{RuleKb, RuleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    T1Symmetry,
    T2Transitive,
    CopyCompletion,
    ManualAdd,
    ManualRemove,
}

impl OpKind {
    pub fn is_inference(self) -> bool {
        matches!(
            self,
            OpKind::T1Symmetry | OpKind::T2Transitive | OpKind::CopyCompletion
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionOp {
    pub kind: OpKind,
    pub triple: TripleKey,
    /// The rule applied; absent for manual ops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleKind>,
    #[serde(default)]
    pub premises: Vec<TripleKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub ops: Vec<CompletionOp>,
    /// Set when the initial triples were not a subset of the target.
    pub requires_removal: bool,
}

impl Plan {
    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|o| o.kind == kind).count()
    }
}

fn usable(g: &Graph, k: &TripleKey) -> bool {
    g.triple(k)
        .is_some_and(|t| t.status != TripleStatus::Rejected)
}

fn derive_t1(g: &Graph, kb: &RuleKb, k: &TripleKey) -> Option<(RuleKind, Vec<TripleKey>)> {
    for rule in kb.rule_kinds() {
        let source = match rule {
            RuleKind::Symmetry(r) if *r == k.rel => r,
            RuleKind::Inversion(a, b) if *b == k.rel => a,
            RuleKind::Inversion(a, b) if *a == k.rel => b,
            _ => continue,
        };
        let p = TripleKey::new(k.dst.clone(), source.clone(), k.src.clone());
        if usable(g, &p) {
            return Some((rule.clone(), vec![p]));
        }
    }
    None
}

fn derive_t2(
    g: &Graph,
    kb: &RuleKb,
    entities: &[EntityId],
    k: &TripleKey,
) -> Option<(RuleKind, Vec<TripleKey>)> {
    for rule in kb.rule_kinds() {
        let RuleKind::Composition(a, b, c) = rule else {
            continue;
        };
        if *c != k.rel {
            continue;
        }
        for z in entities {
            let p = TripleKey::new(k.src.clone(), a.clone(), z.clone());
            let q = TripleKey::new(z.clone(), b.clone(), k.dst.clone());
            if usable(g, &p) && usable(g, &q) {
                return Some((rule.clone(), vec![p, q]));
            }
        }
    }
    None
}

fn derive_copy(g: &Graph, kb: &RuleKb, k: &TripleKey) -> Option<(RuleKind, Vec<TripleKey>)> {
    for rule in kb.rule_kinds() {
        let RuleKind::Hierarchy { sub, sup } = rule else {
            continue;
        };
        if *sup != k.rel {
            continue;
        }
        let p = TripleKey::new(k.src.clone(), sub.clone(), k.dst.clone());
        if usable(g, &p) {
            return Some((rule.clone(), vec![p]));
        }
    }
    None
}

/// Plans ops turning `initial` into `target` (compared as key sets).
///
/// The plan is built by simulating [`apply_ops`] on a copy of `initial`, so
/// replaying it always reproduces the target key set.
pub fn plan_completion(initial: &Graph, target: &Graph, kb: &RuleKb) -> Result<Plan, EngineError> {
    let ids: Vec<EntityId> = initial.entity_ids().cloned().collect();
    if !ids.iter().eq(target.entity_ids()) {
        return Err(EngineError::EntityMismatch);
    }
    let goal = target.triple_keys();
    let mut acc = initial.clone();
    let mut ops = Vec::new();

    let extras: Vec<TripleKey> = acc.triple_keys().difference(&goal).cloned().collect();
    let requires_removal = !extras.is_empty();
    for k in extras {
        if acc.contains(&k) {
            acc.remove_triple(&k).expect("present");
            ops.push(CompletionOp {
                kind: OpKind::ManualRemove,
                triple: k,
                rule: None,
                premises: Vec::new(),
            });
        }
    }

    let mut missing: BTreeSet<TripleKey> = goal.difference(&acc.triple_keys()).cloned().collect();
    let stages = [
        OpKind::T1Symmetry,
        OpKind::T2Transitive,
        OpKind::CopyCompletion,
    ];
    loop {
        let mut progress = false;
        for stage in stages {
            loop {
                let mut stage_progress = false;
                for k in missing.clone() {
                    let found = match stage {
                        OpKind::T1Symmetry => derive_t1(&acc, kb, &k),
                        OpKind::T2Transitive => derive_t2(&acc, kb, &ids, &k),
                        _ => derive_copy(&acc, kb, &k),
                    };
                    if let Some((rule, premises)) = found {
                        acc.insert_raw(crate::graph::Triple {
                            key: k.clone(),
                            status: TripleStatus::Suggested,
                            provenance: Provenance::Inferred {
                                rule: rule.clone(),
                                premises: premises.clone(),
                            },
                        });
                        missing.remove(&k);
                        ops.push(CompletionOp {
                            kind: stage,
                            triple: k,
                            rule: Some(rule),
                            premises,
                        });
                        stage_progress = true;
                    }
                }
                if !stage_progress {
                    break;
                }
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    for k in missing {
        ops.push(CompletionOp {
            kind: OpKind::ManualAdd,
            triple: k,
            rule: None,
            premises: Vec::new(),
        });
    }
    Ok(Plan {
        ops,
        requires_removal,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyError {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    /// State after the last successfully applied op.
    pub graph: Graph,
    pub applied: usize,
    pub error: Option<ApplyError>,
}

/// Applies ops in order. Inference ops add `suggested` triples, `manual_add`
/// adds `confirmed` ones, `manual_remove` deletes. The first op whose
/// premises are missing (or whose rule does not yield its triple) stops the
/// replay; the rest is not applied.
pub fn apply_ops(g: &Graph, ops: &[CompletionOp], kb: &RuleKb) -> ApplyOutcome {
    let mut graph = g.clone();
    for (index, op) in ops.iter().enumerate() {
        let fail = |reason: String, graph: Graph| ApplyOutcome {
            graph,
            applied: index,
            error: Some(ApplyError { index, reason }),
        };
        let t = &op.triple;
        match op.kind {
            OpKind::ManualRemove => {
                if let Err(e) = graph.remove_triple(t) {
                    return fail(e.to_string(), graph);
                }
            }
            OpKind::ManualAdd => {
                if let Err(e) = graph.upsert_triple(
                    kb,
                    &t.src,
                    &t.rel,
                    &t.dst,
                    TripleStatus::Confirmed,
                    Provenance::Manual,
                ) {
                    return fail(e.to_string(), graph);
                }
            }
            _ => {
                if op.premises.is_empty() {
                    return fail("inference op without premises".into(), graph);
                }
                if let Some(p) = op.premises.iter().find(|p| !usable(&graph, p)) {
                    return fail(format!("premise {p} is not present"), graph);
                }
                let Some(rule) = &op.rule else {
                    return fail("inference op without a rule".into(), graph);
                };
                if instantiate(rule, &op.premises).as_ref() != Some(t) {
                    return fail(
                        format!("`{rule}` does not yield {t} from its premises"),
                        graph,
                    );
                }
                if graph.contains(t) {
                    continue;
                }
                if let Err(e) = graph.upsert_triple(
                    kb,
                    &t.src,
                    &t.rel,
                    &t.dst,
                    TripleStatus::Suggested,
                    Provenance::Inferred {
                        rule: rule.clone(),
                        premises: op.premises.clone(),
                    },
                ) {
                    return fail(e.to_string(), graph);
                }
            }
        }
    }
    ApplyOutcome {
        graph,
        applied: ops.len(),
        error: None,
    }
}

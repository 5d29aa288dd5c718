//! Symbolic reasoning over a [`Graph`](crate::graph::Graph): fixpoint completion,
//! conflict detection and the completion-operation planner.

mod closure;
mod conflicts;
mod planner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Provenance, TripleKey};
use crate::kb::RuleKind;

pub use closure::{close, Closure};
pub use conflicts::{detect_conflicts, Conflict, ConflictState};
pub use planner::{
    apply_ops, plan_completion, ApplyError, ApplyOutcome, CompletionOp, OpKind, Plan,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("closure produced {produced} triples, above the hard cap {cap}")]
    CapExceeded { produced: usize, cap: usize },
    #[error("graphs do not share the same entity set")]
    EntityMismatch,
}

/// The recorded justification of one inferred triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub conclusion: TripleKey,
    pub rule: RuleKind,
    pub premises: Vec<TripleKey>,
    pub depth: u32,
}

/// Applies a completion rule to concrete premises.
///
/// Returns `None` when the rule is a conflict rule or the premises do not fit
/// its shape. Self-loop conclusions are returned as-is; callers drop them.
pub fn instantiate(rule: &RuleKind, premises: &[TripleKey]) -> Option<TripleKey> {
    let flip = |p: &TripleKey, rel: &crate::kb::RelId| {
        TripleKey::new(p.dst.clone(), rel.clone(), p.src.clone())
    };
    match (rule, premises) {
        (RuleKind::Symmetry(r), [p]) if &p.rel == r => Some(flip(p, r)),
        (RuleKind::Inversion(a, b), [p]) if &p.rel == a => Some(flip(p, b)),
        (RuleKind::Inversion(a, b), [p]) if &p.rel == b => Some(flip(p, a)),
        (RuleKind::Hierarchy { sub, sup }, [p]) if &p.rel == sub => {
            Some(TripleKey::new(p.src.clone(), sup.clone(), p.dst.clone()))
        }
        (RuleKind::Composition(a, b, c), [p, q])
            if &p.rel == a && &q.rel == b && p.dst == q.src =>
        {
            Some(TripleKey::new(p.src.clone(), c.clone(), q.dst.clone()))
        }
        _ => None,
    }
}

/// Rebuilds derivations for every inferred triple from its provenance.
/// Depth is 1 + the deepest inferred premise.
pub fn derivations(g: &Graph) -> Vec<Derivation> {
    let mut depth: BTreeMap<&TripleKey, u32> = BTreeMap::new();
    fn depth_of<'a>(
        g: &'a Graph,
        key: &'a TripleKey,
        memo: &mut BTreeMap<&'a TripleKey, u32>,
        guard: usize,
    ) -> u32 {
        if let Some(d) = memo.get(key) {
            return *d;
        }
        let d = match g.triple(key).map(|t| &t.provenance) {
            Some(Provenance::Inferred { premises, .. }) if guard > 0 => {
                1 + premises
                    .iter()
                    .map(|p| depth_of(g, p, memo, guard - 1))
                    .max()
                    .unwrap_or(0)
            }
            _ => 0,
        };
        memo.insert(key, d);
        d
    }
    let guard = g.triple_count() + 1;
    g.triples()
        .filter_map(|t| match &t.provenance {
            Provenance::Inferred { rule, premises } => Some(Derivation {
                conclusion: t.key.clone(),
                rule: rule.clone(),
                premises: premises.clone(),
                depth: depth_of(g, &t.key, &mut depth, guard),
            }),
            _ => None,
        })
        .collect()
}

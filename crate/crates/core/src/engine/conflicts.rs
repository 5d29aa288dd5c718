use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{EntityId, Graph, TripleKey};
use crate::kb::{RelId, RuleKb, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ConflictState {
    Open,
    Resolved {
        kept: Vec<TripleKey>,
        dropped: Vec<TripleKey>,
    },
}

/// A violated conflict rule and the triples that violate it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    /// Stable id derived from rule and offenders.
    pub id: String,
    pub rule: RuleKind,
    /// Two triples for incompatible/asymmetric; two or more sharing
    /// `(src, rel)` for exclusive. Sorted by key.
    pub offenders: Vec<TripleKey>,
    #[serde(flatten)]
    pub state: ConflictState,
}

impl Conflict {
    pub fn new(rule: RuleKind, mut offenders: Vec<TripleKey>) -> Self {
        offenders.sort();
        offenders.dedup();
        let mut h = Sha256::new();
        h.update(rule.to_string().as_bytes());
        for o in &offenders {
            h.update(b"|");
            h.update(o.to_string().as_bytes());
        }
        let id = format!("c{}", &hex::encode(h.finalize())[..12]);
        Conflict {
            id,
            rule,
            offenders,
            state: ConflictState::Open,
        }
    }

    pub fn is_open(&self) -> bool {
        self.state == ConflictState::Open
    }
}

/// Every instantiation of the incompatible, asymmetric and exclusive rules over
/// suggested and confirmed triples, sorted by `(rule, offenders)`.
pub fn detect_conflicts(g: &Graph, kb: &RuleKb) -> Vec<Conflict> {
    let mut by_rel: BTreeMap<&RelId, Vec<&TripleKey>> = BTreeMap::new();
    for t in g.triples().filter(|t| t.status.participates()) {
        by_rel.entry(&t.key.rel).or_default().push(&t.key);
    }
    let live = |k: &TripleKey| g.triple(k).is_some_and(|t| t.status.participates());

    let mut out = Vec::new();
    for kind in kb.rule_kinds() {
        match kind {
            RuleKind::Incompatible(a, b) if a != b => {
                for k in by_rel.get(a).into_iter().flatten() {
                    let other = TripleKey::new(k.src.clone(), b.clone(), k.dst.clone());
                    if live(&other) {
                        out.push(Conflict::new(kind.clone(), vec![(*k).clone(), other]));
                    }
                }
            }
            RuleKind::Asymmetric(a, b) => {
                for k in by_rel.get(a).into_iter().flatten() {
                    let other = TripleKey::new(k.dst.clone(), b.clone(), k.src.clone());
                    // For a == b each pair is seen from both ends; keep one.
                    if live(&other) && (a != b || k.src < k.dst) {
                        out.push(Conflict::new(kind.clone(), vec![(*k).clone(), other]));
                    }
                }
            }
            RuleKind::Exclusive(r) => {
                let mut groups: BTreeMap<&EntityId, Vec<TripleKey>> = BTreeMap::new();
                for k in by_rel.get(r).into_iter().flatten() {
                    groups.entry(&k.src).or_default().push((*k).clone());
                }
                for (_, group) in groups {
                    if group.len() >= 2 {
                        out.push(Conflict::new(kind.clone(), group));
                    }
                }
            }
            _ => {}
        }
    }
    out.sort_by(|x, y| (&x.rule, &x.offenders).cmp(&(&y.rule, &y.offenders)));
    out
}

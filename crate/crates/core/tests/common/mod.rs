//! Seeded generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use relgraph_core::graph::{EntityStatus, Graph, Provenance, TripleKey, TripleStatus};
use relgraph_core::kb::{KbEdit, RelId, RelationType, RuleKb, RuleKind};
use relgraph_core::EntityId;

pub fn rel(s: &str) -> RelId {
    RelId::new(s).unwrap()
}

pub fn kb_with_relations(n: usize) -> (RuleKb, Vec<RelId>) {
    let rels: Vec<RelId> = (0..n).map(|i| rel(&format!("r{i}"))).collect();
    let mut kb = RuleKb::empty();
    for r in &rels {
        kb = kb
            .edit(KbEdit::AddRelation {
                relation: RelationType::new(r.clone()),
            })
            .unwrap();
    }
    (kb, rels)
}

pub fn random_rule(rng: &mut impl Rng, rels: &[RelId], completion_only: bool) -> RuleKind {
    let mut pick = || rels.choose(rng).unwrap().clone();
    let (a, b, c) = (pick(), pick(), pick());
    let kinds = if completion_only { 4 } else { 7 };
    match rng.gen_range(0..kinds) {
        0 => RuleKind::symmetry(a),
        1 => RuleKind::inversion(a, b),
        2 => RuleKind::composition(a, b, c),
        3 => RuleKind::hierarchy(a, b),
        4 => RuleKind::incompatible(a, b),
        5 => RuleKind::asymmetric(a, b),
        _ => RuleKind::exclusive(a),
    }
}

/// Up to `max_rels` relations and `max_rules` rules; invalid additions are skipped.
pub fn random_kb(
    rng: &mut impl Rng,
    max_rels: usize,
    max_rules: usize,
    completion_only: bool,
) -> RuleKb {
    let (mut kb, rels) = kb_with_relations(rng.gen_range(1..=max_rels));
    for _ in 0..rng.gen_range(0..=max_rules) {
        let rule = random_rule(rng, &rels, completion_only);
        if let Ok(next) = kb.edit(KbEdit::AddRule { rule }) {
            kb = next;
        }
    }
    kb
}

pub fn entities(g: &mut Graph, n: usize) -> Vec<EntityId> {
    (0..n)
        .map(|i| {
            g.add_entity(&format!("P{i}"), [], vec![], EntityStatus::Confirmed)
                .unwrap()
        })
        .collect()
}

/// Random manual triples over `n_ent` entities. With `all_statuses`, some
/// are rejected or conflicted.
pub fn random_graph(
    rng: &mut impl Rng,
    kb: &RuleKb,
    max_ent: usize,
    max_triples: usize,
    all_statuses: bool,
) -> Graph {
    let mut g = Graph::new("doc");
    let ids = entities(&mut g, rng.gen_range(2..=max_ent));
    let rels: Vec<RelId> = kb.relations().map(|r| r.id.clone()).collect();
    for _ in 0..rng.gen_range(0..=max_triples) {
        let s = ids.choose(rng).unwrap();
        let d = ids.choose(rng).unwrap();
        if s == d {
            continue;
        }
        let status = if all_statuses {
            *[
                TripleStatus::Suggested,
                TripleStatus::Confirmed,
                TripleStatus::Confirmed,
                TripleStatus::Rejected,
                TripleStatus::Conflicted,
            ]
            .choose(rng)
            .unwrap()
        } else {
            *[TripleStatus::Suggested, TripleStatus::Confirmed]
                .choose(rng)
                .unwrap()
        };
        let r = rels.choose(rng).unwrap();
        g.upsert_triple(kb, s, r, d, status, Provenance::Manual)
            .unwrap();
    }
    g
}

fn key(s: &EntityId, r: &RelId, d: &EntityId) -> TripleKey {
    TripleKey::new(s.clone(), r.clone(), d.clone())
}

/// One-step consequences of `rule` read straight off its logical form.
fn consequences(rule: &RuleKind, facts: &BTreeSet<TripleKey>) -> Vec<TripleKey> {
    let mut out = Vec::new();
    for p in facts {
        match rule {
            RuleKind::Symmetry(r) if p.rel == *r => out.push(key(&p.dst, r, &p.src)),
            RuleKind::Inversion(a, b) => {
                if p.rel == *a {
                    out.push(key(&p.dst, b, &p.src));
                }
                if p.rel == *b {
                    out.push(key(&p.dst, a, &p.src));
                }
            }
            RuleKind::Hierarchy { sub, sup } if p.rel == *sub => out.push(key(&p.src, sup, &p.dst)),
            RuleKind::Composition(a, b, c) if p.rel == *a => {
                for q in facts {
                    if q.rel == *b && q.src == p.dst {
                        out.push(key(&p.src, c, &q.dst));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Repeat-until-no-change fixpoint over the participating triples. Keys
/// already in the graph (any status) are never added.
pub fn naive_closure(g: &Graph, kb: &RuleKb) -> BTreeSet<TripleKey> {
    let blocked: BTreeSet<TripleKey> = g.triple_keys();
    let mut facts: BTreeSet<TripleKey> = g
        .triples()
        .filter(|t| matches!(t.status, TripleStatus::Suggested | TripleStatus::Confirmed))
        .map(|t| t.key.clone())
        .collect();
    loop {
        let mut changed = false;
        for rule in kb.rule_kinds() {
            for c in consequences(rule, &facts) {
                if c.src != c.dst && !blocked.contains(&c) && !facts.contains(&c) {
                    facts.insert(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return facts;
        }
    }
}

/// Checks a single step: does `rule` turn `premises` into `conclusion`?
pub fn step_holds(rule: &RuleKind, premises: &[TripleKey], conclusion: &TripleKey) -> bool {
    let facts: BTreeSet<TripleKey> = premises.iter().cloned().collect();
    let used_all = |c: &TripleKey| match rule {
        RuleKind::Composition(..) => {
            premises.len() == 2 && premises[0].dst == premises[1].src && premises[0].src == c.src
        }
        _ => premises.len() == 1,
    };
    consequences(rule, &facts).contains(conclusion) && used_all(conclusion)
}

/// Every violation found by scanning all (ordered) pairs of participating triples.
pub fn brute_conflicts(g: &Graph, kb: &RuleKb) -> BTreeSet<(String, Vec<TripleKey>)> {
    let live: Vec<TripleKey> = g
        .triples()
        .filter(|t| matches!(t.status, TripleStatus::Suggested | TripleStatus::Confirmed))
        .map(|t| t.key.clone())
        .collect();
    let mut out = BTreeSet::new();
    let mut push = |rule: &RuleKind, mut offs: Vec<TripleKey>| {
        offs.sort();
        out.insert((rule.to_string(), offs));
    };
    for rule in kb.rule_kinds() {
        match rule {
            RuleKind::Incompatible(a, b) => {
                for t1 in &live {
                    for t2 in &live {
                        if t1 != t2
                            && t1.rel == *a
                            && t2.rel == *b
                            && t1.src == t2.src
                            && t1.dst == t2.dst
                        {
                            push(rule, vec![t1.clone(), t2.clone()]);
                        }
                    }
                }
            }
            RuleKind::Asymmetric(a, b) => {
                for t1 in &live {
                    for t2 in &live {
                        if t1.rel == *a && t2.rel == *b && t1.src == t2.dst && t1.dst == t2.src {
                            push(rule, vec![t1.clone(), t2.clone()]);
                        }
                    }
                }
            }
            RuleKind::Exclusive(r) => {
                let sources: BTreeSet<&EntityId> = live.iter().map(|t| &t.src).collect();
                for x in sources {
                    let group: Vec<TripleKey> = live
                        .iter()
                        .filter(|t| t.src == *x && t.rel == *r)
                        .cloned()
                        .collect();
                    if group.len() >= 2 {
                        push(rule, group);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

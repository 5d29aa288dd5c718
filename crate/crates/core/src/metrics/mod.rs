//! Precision/recall scoring, the logic benchmark runner and small-world statistics.

mod logic;
mod swi;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{EntityId, Graph, TripleKey, TripleStatus};
use crate::kb::RuleKb;

pub use logic::{
    parse_add_answer, parse_remove_answer, run_logic_benchmark, BenchError, Gold, LogicBenchItem,
    LogicReport, RemoveLabel, RemoveReport, Task,
};
pub use swi::{project, small_world_index, small_world_of, SwiReport, UGraph};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_relation: BTreeMap<String, Counts>,
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        EvalReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: harmonic(precision, recall),
            per_relation: BTreeMap::new(),
        }
    }

    fn from_per_relation(per_relation: BTreeMap<String, Counts>) -> Self {
        let sum = per_relation
            .values()
            .fold(Counts::default(), |a, c| Counts {
                tp: a.tp + c.tp,
                fp: a.fp + c.fp,
                fn_: a.fn_ + c.fn_,
            });
        EvalReport {
            per_relation,
            ..EvalReport::from_counts(sum.tp, sum.fp, sum.fn_)
        }
    }
}

/// Exact directed-triple matching.
pub fn score_triples(pred: &BTreeSet<TripleKey>, gold: &BTreeSet<TripleKey>) -> EvalReport {
    let mut per: BTreeMap<String, Counts> = BTreeMap::new();
    for k in pred {
        let c = per.entry(k.rel.to_string()).or_default();
        if gold.contains(k) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for k in gold.difference(pred) {
        per.entry(k.rel.to_string()).or_default().fn_ += 1;
    }
    EvalReport::from_per_relation(per)
}

/// Like [`score_triples`], except that a predicted triple also matches a gold
/// triple on the same pair whose relation is a (transitive) supertype.
pub fn score_triples_soft(
    pred: &BTreeSet<TripleKey>,
    gold: &BTreeSet<TripleKey>,
    kb: &RuleKb,
) -> EvalReport {
    let matches = |p: &TripleKey, g: &TripleKey| {
        p.src == g.src && p.dst == g.dst && (p.rel == g.rel || kb.is_subtype_of(&p.rel, &g.rel))
    };
    let mut per: BTreeMap<String, Counts> = BTreeMap::new();
    for p in pred {
        let c = per.entry(p.rel.to_string()).or_default();
        if gold.iter().any(|g| matches(p, g)) {
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    for g in gold {
        if !pred.iter().any(|p| matches(p, g)) {
            per.entry(g.rel.to_string()).or_default().fn_ += 1;
        }
    }
    EvalReport::from_per_relation(per)
}

/// Alias-group matching. A predicted group is eligible only if it overlaps
/// exactly one gold group; eligible pairs are matched greedily by overlap
/// size (largest first, ties by the sorted name lists), each gold group at
/// most once. Returns the matched `(pred, gold)` index pairs.
pub fn match_entities(pred: &[BTreeSet<String>], gold: &[BTreeSet<String>]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        let hits: Vec<(usize, usize)> = gold
            .iter()
            .enumerate()
            .map(|(j, g)| (j, p.intersection(g).count()))
            .filter(|(_, n)| *n > 0)
            .collect();
        if let [(j, n)] = hits[..] {
            pairs.push((n, i, j));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then_with(|| pred[a.1].cmp(&pred[b.1]))
            .then_with(|| gold[a.2].cmp(&gold[b.2]))
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut pred_used = vec![false; pred.len()];
    let mut gold_used = vec![false; gold.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !pred_used[i] && !gold_used[j] {
            pred_used[i] = true;
            gold_used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Entity scoring over alias groups; matched pairs are true positives.
pub fn score_entities(pred: &[BTreeSet<String>], gold: &[BTreeSet<String>]) -> EvalReport {
    let tp = match_entities(pred, gold).len();
    EvalReport::from_counts(tp, pred.len() - tp, gold.len() - tp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEval {
    pub entities: EvalReport,
    pub triples: EvalReport,
    /// Whether predicted subtypes matched gold supertypes.
    pub soft_hierarchy: bool,
}

fn alias_groups(g: &Graph) -> (Vec<EntityId>, Vec<BTreeSet<String>>) {
    g.entities()
        .map(|e| (e.id.clone(), e.aliases.clone()))
        .unzip()
}

fn live_triples(g: &Graph) -> impl Iterator<Item = &TripleKey> {
    g.triples()
        .filter(|t| t.status != TripleStatus::Rejected)
        .map(|t| &t.key)
}

/// Scores a predicted graph against a gold graph built independently. Entity
/// ids are aligned through [`match_entities`]; triples on unmatched predicted
/// entities can only be false positives. Rejected triples are ignored on both
/// sides. With `soft` set, relations are matched through `soft`'s hierarchy.
pub fn score_graphs(pred: &Graph, gold: &Graph, soft: Option<&RuleKb>) -> GraphEval {
    let (pred_ids, pred_groups) = alias_groups(pred);
    let (gold_ids, gold_groups) = alias_groups(gold);
    let matched = match_entities(&pred_groups, &gold_groups);
    let entities = EvalReport::from_counts(
        matched.len(),
        pred_groups.len() - matched.len(),
        gold_groups.len() - matched.len(),
    );
    let to_gold: BTreeMap<&EntityId, &EntityId> = matched
        .iter()
        .map(|&(i, j)| (&pred_ids[i], &gold_ids[j]))
        .collect();
    let translate = |id: &EntityId| match to_gold.get(id) {
        Some(g) => (*g).clone(),
        None => {
            // A fresh id no gold entity uses.
            let mut s = format!("-{id}");
            while gold.entity(&s).is_some() {
                s.insert(0, '-');
            }
            EntityId::new(s).expect("prefixed id is valid")
        }
    };
    let pred_keys: BTreeSet<TripleKey> = live_triples(pred)
        .map(|k| TripleKey::new(translate(&k.src), k.rel.clone(), translate(&k.dst)))
        .collect();
    let gold_keys: BTreeSet<TripleKey> = live_triples(gold).cloned().collect();
    let triples = match soft {
        Some(kb) => score_triples_soft(&pred_keys, &gold_keys, kb),
        None => score_triples(&pred_keys, &gold_keys),
    };
    GraphEval {
        entities,
        triples,
        soft_hierarchy: soft.is_some(),
    }
}

#[cfg(test)]
mod tests;

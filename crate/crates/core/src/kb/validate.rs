use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{RelId, RuleKb, RuleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub rules: Vec<RuleKind>,
    pub message: String,
}

impl Diagnostic {
    fn error(rules: Vec<RuleKind>, message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            rules,
            message,
        }
    }

    fn warning(rules: Vec<RuleKind>, message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            rules,
            message,
        }
    }
}

/// Checks a KB for contradictions (errors) and suspicious combinations (warnings).
///
/// Errors:
/// * `symmetric r` together with `asymmetric r r`;
/// * `incompatible r r` together with `symmetric r` and `compose r r r`;
/// * a cycle among `subtype` rules (one error per cycle).
///
/// Warnings:
/// * a composition whose output relation appears in no other rule;
/// * `exclusive r` together with `symmetric r`.
pub fn validate_kb(kb: &RuleKb) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let rules: Vec<&RuleKind> = kb.rule_kinds().collect();
    let has = |k: &RuleKind| kb.contains_rule(k);

    for kind in &rules {
        if let RuleKind::Symmetry(r) = kind {
            let asym = RuleKind::asymmetric(r.clone(), r.clone());
            if has(&asym) {
                out.push(Diagnostic::error(
                    vec![(*kind).clone(), asym],
                    format!("`{r}` is declared both symmetric and asymmetric"),
                ));
            }
            let incompat = RuleKind::incompatible(r.clone(), r.clone());
            let compose = RuleKind::composition(r.clone(), r.clone(), r.clone());
            if has(&incompat) && has(&compose) {
                out.push(Diagnostic::error(
                    vec![(*kind).clone(), compose, incompat],
                    format!(
                        "`{r}` is symmetric and self-composing but declared incompatible with itself"
                    ),
                ));
            }
            let excl = RuleKind::exclusive(r.clone());
            if has(&excl) {
                out.push(Diagnostic::warning(
                    vec![(*kind).clone(), excl],
                    format!("`{r}` is both symmetric and exclusive"),
                ));
            }
        }
    }

    for kind in &rules {
        if let RuleKind::Composition(_, _, output) = kind {
            let others = rules
                .iter()
                .filter(|k| **k != *kind && k.mentions(output))
                .count();
            if others == 0 {
                out.push(Diagnostic::warning(
                    vec![(*kind).clone()],
                    format!("composition output `{output}` has no other rules"),
                ));
            }
        }
    }

    for cycle in hierarchy_cycles(&rules) {
        let names: Vec<String> = cycle.iter().map(|r| r.to_string()).collect();
        let members: Vec<RuleKind> = rules
            .iter()
            .filter(|k| {
                matches!(k, RuleKind::Hierarchy { sub, sup } if cycle.contains(sub) && cycle.contains(sup))
            })
            .map(|k| (*k).clone())
            .collect();
        out.push(Diagnostic::error(
            members,
            format!("subtype cycle among {}", names.join(", ")),
        ));
    }

    out.sort_by(|a, b| (a.severity, &a.rules).cmp(&(b.severity, &b.rules)));
    out
}

/// Strongly connected components of the subtype graph that contain a cycle.
fn hierarchy_cycles(rules: &[&RuleKind]) -> Vec<BTreeSet<RelId>> {
    let mut edges: BTreeMap<&RelId, Vec<&RelId>> = BTreeMap::new();
    for kind in rules {
        if let RuleKind::Hierarchy { sub, sup } = kind {
            edges.entry(sub).or_default().push(sup);
            edges.entry(sup).or_default();
        }
    }
    let reach = |from: &RelId| -> BTreeSet<RelId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&RelId> = edges.get(from).cloned().unwrap_or_default();
        while let Some(n) = stack.pop() {
            if seen.insert(n.clone()) {
                stack.extend(edges.get(n).into_iter().flatten().copied());
            }
        }
        seen
    };
    let reachable: BTreeMap<&RelId, BTreeSet<RelId>> =
        edges.keys().map(|n| (*n, reach(n))).collect();

    let mut assigned = BTreeSet::new();
    let mut cycles = Vec::new();
    for (node, from_node) in &reachable {
        if assigned.contains(*node) || !from_node.contains(*node) {
            continue;
        }
        let component: BTreeSet<RelId> = from_node
            .iter()
            .filter(|m| reachable[m].contains(*node))
            .cloned()
            .collect();
        assigned.extend(component.iter().cloned());
        cycles.push(component);
    }
    cycles
}

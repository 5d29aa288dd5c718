use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use super::*;
use crate::kb::{RelId, RuleKb, RuleKind};

fn rel(s: &str) -> RelId {
    RelId::new(s).unwrap()
}

fn span(s: usize, e: usize) -> MentionSpan {
    MentionSpan::new(s, e).unwrap()
}

fn people(names: &[&str]) -> (Graph, Vec<EntityId>) {
    let mut g = Graph::new("doc");
    let ids = names
        .iter()
        .map(|n| {
            g.add_entity(n, [], vec![], EntityStatus::Suggested)
                .unwrap()
        })
        .collect();
    (g, ids)
}

fn add(g: &mut Graph, kb: &RuleKb, s: &EntityId, r: &str, d: &EntityId, st: TripleStatus) {
    g.upsert_triple(kb, s, &rel(r), d, st, Provenance::Manual)
        .unwrap();
}

fn key(s: &EntityId, r: &str, d: &EntityId) -> TripleKey {
    TripleKey::new(s.clone(), rel(r), d.clone())
}

#[test]
fn merge_unions_aliases() {
    let mut g = Graph::new("doc");
    let eliz = g
        .add_entity("Elizabeth", [], vec![span(0, 9)], EntityStatus::Confirmed)
        .unwrap();
    let maj = g
        .add_entity(
            "Her Majesty",
            [],
            vec![span(20, 31)],
            EntityStatus::Suggested,
        )
        .unwrap();
    let report = g.merge_entities(&eliz, &maj).unwrap();
    assert_eq!(report, MergeReport::default());
    assert_eq!(g.entity_count(), 1);
    let e = g.entity(eliz.as_str()).unwrap();
    assert_eq!(e.canonical, "Elizabeth");
    assert_eq!(
        e.aliases,
        BTreeSet::from(["Elizabeth".to_string(), "Her Majesty".to_string()])
    );
    assert_eq!(e.mentions, [span(0, 9), span(20, 31)]);
    assert_eq!(g.entity_by_alias("Her Majesty").unwrap().id, eliz);
    g.check_invariants().unwrap();
}

#[test]
fn merge_twice_is_an_error_and_changes_nothing() {
    let (mut g, ids) = people(&["A", "B", "C"]);
    let kb = RuleKb::starter();
    add(
        &mut g,
        &kb,
        &ids[1],
        "friend_of",
        &ids[2],
        TripleStatus::Suggested,
    );
    g.merge_entities(&ids[0], &ids[1]).unwrap();
    let once = g.clone();
    assert_eq!(
        g.merge_entities(&ids[0], &ids[1]),
        Err(GraphError::UnknownEntity(ids[1].to_string()))
    );
    assert_eq!(g, once);
    assert!(g.merge_entities(&ids[0], &ids[0]).is_err());
}

#[test]
fn merge_collapses_duplicates_by_precedence() {
    let kb = RuleKb::starter();
    // Every ordered pair of statuses; the survivor must carry the max.
    let all = [
        TripleStatus::Rejected,
        TripleStatus::Suggested,
        TripleStatus::Conflicted,
        TripleStatus::Confirmed,
    ];
    let rank = |s: TripleStatus| all.iter().position(|x| *x == s).unwrap();
    for a in all {
        for b in all {
            let (mut g, ids) = people(&["A", "A2", "B"]);
            add(&mut g, &kb, &ids[0], "friend_of", &ids[2], a);
            g.upsert_triple(
                &kb,
                &ids[1],
                &rel("friend_of"),
                &ids[2],
                b,
                Provenance::Extracted { votes: 4 },
            )
            .unwrap();
            let report = g.merge_entities(&ids[0], &ids[1]).unwrap();
            let k = key(&ids[0], "friend_of", &ids[2]);
            assert_eq!(report.collapsed, std::slice::from_ref(&k));
            let t = g.triple(&k).unwrap();
            let expected = if rank(b) > rank(a) { b } else { a };
            assert_eq!(t.status, expected, "{a:?} + {b:?}");
            let expected_prov = if rank(b) > rank(a) {
                Provenance::Extracted { votes: 4 }
            } else {
                Provenance::Manual
            };
            assert_eq!(t.provenance, expected_prov);
            assert_eq!(g.triple_count(), 1);
        }
    }
}

#[test]
fn merge_drops_self_loops() {
    let kb = RuleKb::starter();
    let (mut g, ids) = people(&["A", "B"]);
    add(
        &mut g,
        &kb,
        &ids[0],
        "friend_of",
        &ids[1],
        TripleStatus::Confirmed,
    );
    let report = g.merge_entities(&ids[0], &ids[1]).unwrap();
    assert_eq!(
        report.dropped_self_loops,
        [key(&ids[0], "friend_of", &ids[0])]
    );
    assert_eq!(g.triple_count(), 0);
}

#[test]
fn merge_prunes_inferences_that_lose_premises() {
    let kb = RuleKb::starter();
    let (mut g, ids) = people(&["A", "B"]);
    add(
        &mut g,
        &kb,
        &ids[0],
        "friend_of",
        &ids[1],
        TripleStatus::Confirmed,
    );
    let premise = key(&ids[0], "friend_of", &ids[1]);
    g.upsert_triple(
        &kb,
        &ids[1],
        &rel("friend_of"),
        &ids[0],
        TripleStatus::Suggested,
        Provenance::Inferred {
            rule: RuleKind::symmetry(rel("friend_of")),
            premises: vec![premise],
        },
    )
    .unwrap();
    let report = g.merge_entities(&ids[0], &ids[1]).unwrap();
    assert_eq!(report.dropped_self_loops.len(), 2);
    assert_eq!(g.triple_count(), 0);
    g.check_invariants().unwrap();
}

fn dumas() -> (Graph, EntityId, EntityId, RuleKb) {
    let kb = RuleKb::starter();
    let mut g = Graph::new("doc");
    let dumas = g
        .add_entity(
            "Alexandre Dumas",
            ["Dumas".to_string(), "the younger Dumas".to_string()],
            vec![span(0, 15), span(40, 45), span(90, 107)],
            EntityStatus::Confirmed,
        )
        .unwrap();
    let marie = g
        .add_entity("Marie", [], vec![span(60, 65)], EntityStatus::Confirmed)
        .unwrap();
    add(
        &mut g,
        &kb,
        &dumas,
        "husband_of",
        &marie,
        TripleStatus::Confirmed,
    );
    add(
        &mut g,
        &kb,
        &marie,
        "mother_of",
        &dumas,
        TripleStatus::Suggested,
    );
    (g, dumas, marie, kb)
}

fn dumas_parts() -> Vec<SplitPart> {
    vec![
        SplitPart {
            canonical: "Alexandre Dumas Sr.".into(),
            aliases: BTreeSet::from(["Alexandre Dumas".to_string(), "Dumas".to_string()]),
            mentions: vec![span(0, 15), span(40, 45)],
        },
        SplitPart {
            canonical: "Alexandre Dumas Jr.".into(),
            aliases: BTreeSet::from(["the younger Dumas".to_string()]),
            mentions: vec![span(90, 107)],
        },
    ]
}

#[test]
fn split_assigns_triples_to_parts() {
    let (mut g, dumas, marie, _) = dumas();
    let assignment = BTreeMap::from([
        (key(&dumas, "husband_of", &marie), 0),
        (key(&marie, "mother_of", &dumas), 1),
    ]);
    let (ids, report) = g.split_entity(&dumas, &dumas_parts(), &assignment).unwrap();
    assert_eq!(report, MergeReport::default());
    assert!(g.entity(dumas.as_str()).is_none());
    let sr = g.entity(ids[0].as_str()).unwrap();
    let jr = g.entity(ids[1].as_str()).unwrap();
    assert_eq!(sr.canonical, "Alexandre Dumas Sr.");
    assert_eq!(jr.canonical, "Alexandre Dumas Jr.");
    assert_eq!(sr.status, EntityStatus::Confirmed);
    assert!(g.contains(&key(&ids[0], "husband_of", &marie)));
    assert!(g.contains(&key(&marie, "mother_of", &ids[1])));
    assert_eq!(g.triple_count(), 2);
    g.check_invariants().unwrap();
}

#[test]
fn split_without_triples_is_bookkeeping() {
    let mut g = Graph::new("doc");
    let e = g
        .add_entity(
            "Dumas",
            ["Dumas fils".to_string()],
            vec![],
            EntityStatus::Suggested,
        )
        .unwrap();
    let parts = vec![
        SplitPart {
            canonical: "Dumas".into(),
            aliases: BTreeSet::new(),
            mentions: vec![],
        },
        SplitPart {
            canonical: "Dumas fils".into(),
            aliases: BTreeSet::new(),
            mentions: vec![],
        },
    ];
    let (ids, _) = g.split_entity(&e, &parts, &BTreeMap::new()).unwrap();
    assert_eq!(ids.len(), 2);
    assert_eq!(g.entity_count(), 2);
    g.check_invariants().unwrap();
}

#[test]
fn split_rejects_bad_input_atomically() {
    let (g0, dumas, marie, _) = dumas();
    let full = BTreeMap::from([
        (key(&dumas, "husband_of", &marie), 0),
        (key(&marie, "mother_of", &dumas), 1),
    ]);

    let mut g = g0.clone();
    let mut partial = full.clone();
    partial.pop_last();
    assert!(matches!(
        g.split_entity(&dumas, &dumas_parts(), &partial),
        Err(GraphError::UnassignedTriple(_))
    ));
    assert_eq!(g, g0);

    let mut parts = dumas_parts();
    parts[1].aliases.clear();
    assert!(matches!(
        g.split_entity(&dumas, &parts, &full),
        Err(GraphError::InvalidSplit(_))
    ));

    let mut parts = dumas_parts();
    parts[1].mentions.push(span(0, 15));
    assert!(matches!(
        g.split_entity(&dumas, &parts, &full),
        Err(GraphError::InvalidSplit(_))
    ));

    let mut parts = dumas_parts();
    parts[1].aliases.insert("Marie".into());
    assert!(matches!(
        g.split_entity(&dumas, &parts, &full),
        Err(GraphError::AliasCollision { .. })
    ));
    assert_eq!(g, g0);
}

/// A graph with ids erased: entities by alias set, triples by endpoint alias sets.
type Shape = (
    BTreeSet<(BTreeSet<String>, Vec<MentionSpan>, EntityStatus)>,
    BTreeSet<(BTreeSet<String>, RelId, BTreeSet<String>, TripleStatus)>,
);

fn shape(g: &Graph) -> Shape {
    let aliases = |id: &EntityId| g.entity(id.as_str()).unwrap().aliases.clone();
    (
        g.entities()
            .map(|e| (e.aliases.clone(), e.mentions.clone(), e.status))
            .collect(),
        g.triples()
            .map(|t| {
                (
                    aliases(&t.key.src),
                    t.key.rel.clone(),
                    aliases(&t.key.dst),
                    t.status,
                )
            })
            .collect(),
    )
}

#[test]
fn split_then_merge_restores_the_graph() {
    let (g0, dumas, marie, _) = dumas();
    let mut g = g0.clone();
    let assignment = BTreeMap::from([
        (key(&dumas, "husband_of", &marie), 0),
        (key(&marie, "mother_of", &dumas), 1),
    ]);
    let (ids, _) = g.split_entity(&dumas, &dumas_parts(), &assignment).unwrap();
    g.merge_entities(&ids[0], &ids[1]).unwrap();
    g.update_entity(
        &ids[0],
        EntityPatch {
            canonical: Some("Alexandre Dumas".into()),
            aliases: Some(g0.entity(dumas.as_str()).unwrap().aliases.clone()),
            status: None,
        },
    )
    .unwrap();
    assert_eq!(shape(&g), shape(&g0));
}

#[test]
fn confirm_then_remove_then_upsert() {
    let kb = RuleKb::starter();
    let (mut g, ids) = people(&["A", "B"]);
    g.upsert_triple(
        &kb,
        &ids[0],
        &rel("friend_of"),
        &ids[1],
        TripleStatus::Suggested,
        Provenance::Extracted { votes: 3 },
    )
    .unwrap();
    let k = key(&ids[0], "friend_of", &ids[1]);
    g.set_status(&k, TripleStatus::Confirmed).unwrap();
    assert_eq!(g.triple(&k).unwrap().status, TripleStatus::Confirmed);
    g.remove_triple(&k).unwrap();
    assert!(!g.contains(&k));
    g.upsert_triple(
        &kb,
        &ids[0],
        &rel("friend_of"),
        &ids[1],
        TripleStatus::Suggested,
        Provenance::Extracted { votes: 5 },
    )
    .unwrap();
    let t = g.triple(&k).unwrap();
    assert_eq!(t.provenance, Provenance::Extracted { votes: 5 });
    assert_eq!(t.status, TripleStatus::Suggested);
}

#[test]
fn upsert_errors() {
    let kb = RuleKb::starter();
    let (mut g, ids) = people(&["A", "B"]);
    let ghost = EntityId::new("ghost").unwrap();
    let up = |g: &mut Graph, s: &EntityId, r: &str, d: &EntityId| {
        g.upsert_triple(
            &kb,
            s,
            &rel(r),
            d,
            TripleStatus::Suggested,
            Provenance::Manual,
        )
    };
    assert!(matches!(
        up(&mut g, &ghost, "friend_of", &ids[0]),
        Err(GraphError::UnknownEntity(_))
    ));
    assert!(matches!(
        up(&mut g, &ids[0], "no_such_rel", &ids[1]),
        Err(GraphError::UnknownRelation(_))
    ));
    assert!(matches!(
        up(&mut g, &ids[0], "friend_of", &ids[0]),
        Err(GraphError::SelfLoop(_))
    ));
}

fn arb_status() -> impl Strategy<Value = TripleStatus> {
    prop_oneof![
        Just(TripleStatus::Rejected),
        Just(TripleStatus::Suggested),
        Just(TripleStatus::Conflicted),
        Just(TripleStatus::Confirmed),
    ]
}

fn arb_provenance() -> impl Strategy<Value = u8> {
    0u8..3
}

proptest! {
    /// Tombstone rule, checked against a direct reading of the policy.
    #[test]
    fn tombstones_hold(
        initial in arb_status(),
        initial_prov in arb_provenance(),
        status in arb_status(),
        prov in arb_provenance(),
    ) {
        let kb = RuleKb::starter();
        let (mut g, ids) = people(&["A", "B", "C"]);
        let k = key(&ids[0], "friend_of", &ids[1]);
        // Premise for inferred provenance.
        add(&mut g, &kb, &ids[1], "friend_of", &ids[0], TripleStatus::Confirmed);
        let premise = key(&ids[1], "friend_of", &ids[0]);
        let make = |p: u8, votes: u32| match p {
            0 => Provenance::Inferred {
                rule: RuleKind::symmetry(rel("friend_of")),
                premises: vec![premise.clone()],
            },
            1 => Provenance::Extracted { votes },
            _ => Provenance::Manual,
        };
        g.upsert_triple(&kb, &ids[0], &rel("friend_of"), &ids[1], initial, make(initial_prov, 1)).unwrap();
        let before = g.triple(&k).unwrap().clone();
        let new_prov = make(prov, 2);
        let outcome = g
            .upsert_triple(&kb, &ids[0], &rel("friend_of"), &ids[1], status, new_prov.clone())
            .unwrap();
        let after = g.triple(&k).unwrap();

        let manual = prov == 2;
        if before.status == TripleStatus::Rejected && !manual {
            prop_assert_eq!(outcome, UpsertOutcome::Tombstoned);
            prop_assert_eq!(after, &before);
        } else {
            let expected_status = if manual { status } else { before.status.max(status) };
            prop_assert_eq!(after.status, expected_status);
            let expected_prov = if new_prov.rank() >= before.provenance.rank() {
                new_prov
            } else {
                before.provenance.clone()
            };
            prop_assert_eq!(&after.provenance, &expected_prov);
        }
        if before.status == TripleStatus::Rejected && after.status == TripleStatus::Suggested {
            prop_assert!(manual);
        }
    }

    #[test]
    fn query_matches_linear_scan(
        edges in proptest::collection::vec((0usize..5, 0usize..4, 0usize..5, arb_status()), 0..30),
        src in proptest::option::of(0usize..5),
        r in proptest::option::of(0usize..4),
        dst in proptest::option::of(0usize..5),
        status in proptest::option::of(arb_status()),
    ) {
        let kb = RuleKb::starter();
        let rels = ["friend_of", "enemy_of", "parent_of", "mentor_of"];
        let (mut g, ids) = people(&["A", "B", "C", "D", "E"]);
        for (s, ri, d, st) in edges {
            if s != d {
                add(&mut g, &kb, &ids[s], rels[ri], &ids[d], st);
            }
        }
        let pattern = TriplePattern {
            src: src.map(|i| ids[i].clone()),
            rel: r.map(|i| rel(rels[i])),
            dst: dst.map(|i| ids[i].clone()),
            status,
        };
        let got: Vec<&Triple> = g.query(&pattern);
        let mut oracle: Vec<&Triple> = g
            .triples()
            .filter(|t| {
                pattern.src.as_ref().is_none_or(|s| *s == t.key.src)
                    && pattern.rel.as_ref().is_none_or(|x| *x == t.key.rel)
                    && pattern.dst.as_ref().is_none_or(|d| *d == t.key.dst)
                    && pattern.status.is_none_or(|s| s == t.status)
            })
            .collect();
        oracle.sort_by(|a, b| a.key.cmp(&b.key));
        prop_assert_eq!(got, oracle);
    }
}

#[test]
fn query_on_empty_graph() {
    let g = Graph::new("doc");
    let pattern = TriplePattern {
        src: Some(EntityId::new("A").unwrap()),
        rel: Some(rel("parent_of")),
        ..TriplePattern::default()
    };
    assert!(g.query(&pattern).is_empty());
    assert!(g.query(&TriplePattern::default()).is_empty());
}

#[test]
fn status_precedence_is_total() {
    use TripleStatus::*;
    let order = [Rejected, Suggested, Conflicted, Confirmed];
    for (i, a) in order.iter().enumerate() {
        for (j, b) in order.iter().enumerate() {
            assert_eq!(a.cmp(b), i.cmp(&j));
        }
    }
}

#[derive(Debug, Clone)]
enum Edit {
    Add(String),
    Merge(usize, usize),
    Split(usize),
    Upsert(usize, usize, usize, TripleStatus, u8),
    SetStatus(usize, TripleStatus),
    Remove(usize),
    Rename(usize, String),
}

fn arb_edit() -> impl Strategy<Value = Edit> {
    let name = prop_oneof![
        Just("Ann"),
        Just("Bo"),
        Just("Cy"),
        Just("Di"),
        Just("Ed"),
        Just("Flo")
    ]
    .prop_map(String::from);
    prop_oneof![
        name.clone().prop_map(Edit::Add),
        (0usize..8, 0usize..8).prop_map(|(a, b)| Edit::Merge(a, b)),
        (0usize..8).prop_map(Edit::Split),
        (0usize..8, 0usize..5, 0usize..8, arb_status(), 0u8..3)
            .prop_map(|(s, r, d, st, p)| Edit::Upsert(s, r, d, st, p)),
        (0usize..40, arb_status()).prop_map(|(i, s)| Edit::SetStatus(i, s)),
        (0usize..40).prop_map(Edit::Remove),
        (0usize..8, name).prop_map(|(i, n)| Edit::Rename(i, n)),
    ]
}

fn apply_edit(g: &mut Graph, kb: &RuleKb, e: &Edit) {
    let ids: Vec<EntityId> = g.entity_ids().cloned().collect();
    let keys: Vec<TripleKey> = g.triple_keys().into_iter().collect();
    let pick = |i: usize| ids.get(i % ids.len().max(1)).cloned();
    let rels = [
        "friend_of",
        "parent_of",
        "child_of",
        "spouse_of",
        "sibling_of",
    ];
    match e {
        Edit::Add(n) => {
            let _ = g.add_entity(n, [], vec![], EntityStatus::Suggested);
        }
        Edit::Merge(a, b) => {
            if let (Some(a), Some(b)) = (pick(*a), pick(*b)) {
                let _ = g.merge_entities(&a, &b);
            }
        }
        Edit::Split(a) => {
            let Some(id) = pick(*a) else { return };
            let ent = g.entity(id.as_str()).unwrap().clone();
            let touching: Vec<TripleKey> =
                keys.iter().filter(|k| k.touches(&id)).cloned().collect();
            let parts = vec![
                SplitPart {
                    canonical: ent.canonical.clone(),
                    aliases: ent.aliases.clone(),
                    mentions: ent.mentions.clone(),
                },
                SplitPart {
                    canonical: format!("{} II", ent.canonical),
                    aliases: BTreeSet::new(),
                    mentions: vec![],
                },
            ];
            let assignment = touching
                .into_iter()
                .enumerate()
                .map(|(i, k)| (k, i % 2))
                .collect();
            let _ = g.split_entity(&id, &parts, &assignment);
        }
        Edit::Upsert(si, r, d, st, p) => {
            let (Some(s), Some(d)) = (pick(*si), pick(*d)) else {
                return;
            };
            let prov = match p {
                0 if !keys.is_empty() => Provenance::Inferred {
                    rule: RuleKind::symmetry(rel("friend_of")),
                    premises: vec![keys[*si % keys.len()].clone()],
                },
                1 => Provenance::Extracted { votes: 3 },
                _ => Provenance::Manual,
            };
            let _ = g.upsert_triple(kb, &s, &rel(rels[*r]), &d, *st, prov);
        }
        Edit::SetStatus(i, st) => {
            if !keys.is_empty() {
                g.set_status(&keys[i % keys.len()], *st).unwrap();
            }
        }
        Edit::Remove(i) => {
            if !keys.is_empty() {
                g.remove_triple(&keys[i % keys.len()]).unwrap();
            }
        }
        Edit::Rename(i, n) => {
            if let Some(id) = pick(*i) {
                let _ = g.update_entity(
                    &id,
                    EntityPatch {
                        canonical: Some(n.clone()),
                        ..EntityPatch::default()
                    },
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_edit_sequences_keep_invariants(edits in proptest::collection::vec(arb_edit(), 1..40)) {
        let kb = RuleKb::starter();
        let mut g = Graph::new("doc");
        for e in &edits {
            apply_edit(&mut g, &kb, e);
            if let Err(msg) = g.check_invariants() {
                prop_assert!(false, "after {:?}: {}", e, msg);
            }
        }
    }
}

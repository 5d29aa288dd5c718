use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{EntityStatus, Graph, Provenance, TripleStatus};
use crate::kb::RelId;
use crate::provider::{ProviderError, ScriptedProvider};

fn k(s: &str) -> TripleKey {
    s.parse().unwrap()
}

fn set(keys: &[&str]) -> BTreeSet<TripleKey> {
    keys.iter().map(|s| k(s)).collect()
}

fn close_to(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn three_predicted_four_gold_two_shared() {
    let pred = set(&["e1:r:e2", "e2:r:e3", "e3:s:e1"]);
    let gold = set(&["e1:r:e2", "e2:r:e3", "e1:s:e3", "e4:r:e1"]);
    let r = score_triples(&pred, &gold);
    assert_eq!((r.tp, r.fp, r.fn_), (2, 1, 2));
    assert!(close_to(r.precision, 2.0 / 3.0));
    assert!(close_to(r.recall, 0.5));
    assert!(close_to(r.f1, 4.0 / 7.0));
    assert_eq!(
        r.per_relation["s"],
        Counts {
            tp: 0,
            fp: 1,
            fn_: 1
        }
    );
}

#[test]
fn degenerate_sets() {
    let gold = set(&["e1:r:e2"]);
    let same = score_triples(&gold, &gold);
    assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
    let none = score_triples(&BTreeSet::new(), &gold);
    assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    let empty = score_triples(&BTreeSet::new(), &BTreeSet::new());
    assert_eq!(empty.f1, 0.0);
}

#[test]
fn direction_is_part_of_the_match() {
    let r = score_triples(&set(&["e2:r:e1"]), &set(&["e1:r:e2"]));
    assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
}

#[test]
fn soft_matching_credits_subtypes() {
    let kb = RuleKb::starter();
    let pred = set(&["e1:father_of:e2"]);
    let gold = set(&["e1:parent_of:e2"]);
    let hard = score_triples(&pred, &gold);
    assert_eq!((hard.tp, hard.fp, hard.fn_), (0, 1, 1));
    let soft = score_triples_soft(&pred, &gold, &kb);
    assert_eq!((soft.tp, soft.fp, soft.fn_), (1, 0, 0));
    // The reverse direction is not a match: parent_of does not imply father_of.
    let rev = score_triples_soft(&gold, &pred, &kb);
    assert_eq!((rev.tp, rev.fp, rev.fn_), (0, 1, 1));
}

fn groups(gs: &[&[&str]]) -> Vec<BTreeSet<String>> {
    gs.iter()
        .map(|g| g.iter().map(|s| s.to_string()).collect())
        .collect()
}

#[test]
fn entity_matching() {
    let gold = groups(&[&["Andrew", "Andrew Palowski"], &["Linda"]]);
    let same = score_entities(&gold, &gold);
    assert_eq!((same.precision, same.recall), (1.0, 1.0));

    let split = score_entities(
        &groups(&[&["Andrew"], &["Andrew Palowski"]]),
        &groups(&[&["Andrew", "Andrew Palowski"]]),
    );
    assert_eq!((split.tp, split.fp, split.fn_), (1, 1, 0));

    // A group straddling two gold groups is never credited.
    let merged = score_entities(&groups(&[&["Andrew", "Linda"]]), &gold);
    assert_eq!((merged.tp, merged.fp, merged.fn_), (0, 1, 2));

    let disjoint = score_entities(&groups(&[&["X"], &["Y"]]), &gold);
    assert_eq!((disjoint.tp, disjoint.fp, disjoint.fn_), (0, 2, 2));
}

#[test]
fn entity_matching_prefers_larger_overlap() {
    let gold = groups(&[&["a", "b", "c"]]);
    let pred = groups(&[&["a"], &["b", "c"]]);
    let r = score_entities(&pred, &gold);
    assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
}

/// Adds `names` in order and the given `(src, rel, dst)` index triples.
fn named_graph(names: &[&str], triples: &[(usize, &str, usize)]) -> Graph {
    let kb = crate::kb::RuleKb::starter();
    let mut g = Graph::new("d");
    let ids: Vec<_> = names
        .iter()
        .map(|n| {
            g.add_entity(n, [], vec![], EntityStatus::Confirmed)
                .unwrap()
        })
        .collect();
    for &(s, r, d) in triples {
        let r = RelId::new(r).unwrap();
        g.upsert_triple(
            &kb,
            &ids[s],
            &r,
            &ids[d],
            TripleStatus::Confirmed,
            Provenance::Manual,
        )
        .unwrap();
    }
    g
}

#[test]
fn graph_scoring_aligns_ids_by_alias() {
    let gold = named_graph(
        &["Scott", "Andrew"],
        &[(0, "child_of", 1), (0, "friend_of", 1)],
    );
    // Same people in the other order, one extra stranger with a triple.
    let pred = named_graph(
        &["Andrew", "Scott", "Stranger"],
        &[(1, "child_of", 0), (2, "friend_of", 0)],
    );
    let r = score_graphs(&pred, &gold, None);
    assert_eq!((r.entities.tp, r.entities.fp, r.entities.fn_), (2, 1, 0));
    assert_eq!((r.triples.tp, r.triples.fp, r.triples.fn_), (1, 1, 1));
    assert!(!r.soft_hierarchy);

    let same = score_graphs(&gold, &gold, None);
    assert_eq!(same.triples.f1, 1.0);
    assert_eq!(same.entities.f1, 1.0);
}

#[test]
fn unmatched_ids_never_collide_with_gold_ids() {
    let kb = crate::kb::RuleKb::starter();
    let friend = RelId::new("friend_of").unwrap();
    // Gold already holds "-e2", the first name an unmatched e2 would get.
    let mut gold = named_graph(&["Ann"], &[]);
    let taken = EntityId::new("-e2").unwrap();
    gold.insert_entity_with_id(taken.clone(), "Zed", [], vec![], EntityStatus::Confirmed)
        .unwrap();
    let ann = EntityId::new("e1").unwrap();
    gold.upsert_triple(
        &kb,
        &taken,
        &friend,
        &ann,
        TripleStatus::Confirmed,
        Provenance::Manual,
    )
    .unwrap();
    let pred = named_graph(&["Ann", "Nobody"], &[(1, "friend_of", 0)]);
    let r = score_graphs(&pred, &gold, None);
    assert_eq!((r.triples.tp, r.triples.fp, r.triples.fn_), (0, 1, 1));
}

#[test]
fn graph_scoring_soft_hierarchy() {
    let kb = crate::kb::RuleKb::starter();
    let gold = named_graph(&["Scott", "Andrew"], &[(1, "parent_of", 0)]);
    let pred = named_graph(&["Scott", "Andrew"], &[(1, "father_of", 0)]);
    let strict = score_graphs(&pred, &gold, None);
    assert_eq!(
        (strict.triples.tp, strict.triples.fp, strict.triples.fn_),
        (0, 1, 1)
    );
    let soft = score_graphs(&pred, &gold, Some(&kb));
    assert_eq!(
        (soft.triples.tp, soft.triples.fp, soft.triples.fn_),
        (1, 0, 0)
    );
    assert!(soft.soft_hierarchy);
}

fn key_strategy() -> impl Strategy<Value = TripleKey> {
    (1u8..5, 0u8..3, 1u8..5).prop_map(|(s, r, d)| k(&format!("e{s}:r{r}:e{d}")))
}

proptest! {
    #[test]
    fn counts_add_up(pred in proptest::collection::btree_set(key_strategy(), 0..12),
                     gold in proptest::collection::btree_set(key_strategy(), 0..12)) {
        let r = score_triples(&pred, &gold);
        prop_assert_eq!(r.tp + r.fp, pred.len());
        prop_assert_eq!(r.tp + r.fn_, gold.len());
        prop_assert_eq!(r.tp, pred.intersection(&gold).count());
        let swapped = score_triples(&gold, &pred);
        prop_assert_eq!(swapped.precision, r.recall);
        prop_assert_eq!(swapped.recall, r.precision);
        prop_assert_eq!(swapped.f1, r.f1);
        prop_assert!((0.0..=1.0).contains(&r.f1));
        let per: usize = r.per_relation.values().map(|c| c.tp).sum();
        prop_assert_eq!(per, r.tp);
    }
}

/// Shortest-path oracle independent of `UGraph`'s own BFS.
fn bfs_mean(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let (mut sum, mut pairs) = (0usize, 0usize);
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        for (t, d) in dist.iter().enumerate() {
            if t != s && *d != usize::MAX {
                sum += d;
                pairs += 1;
            }
        }
    }
    sum as f64 / pairs as f64
}

#[test]
fn complete_graph() {
    let g = UGraph::complete(10);
    assert_eq!(g.m(), 45);
    assert_eq!(g.clustering(), 1.0);
    assert_eq!(g.mean_path_length(), Some(1.0));
}

#[test]
fn ring_lattice_reference() {
    let g = UGraph::ring_lattice(20, 4);
    assert_eq!(g.m(), 40);
    assert_eq!(g.clustering(), 0.5);
    let l = g.mean_path_length().unwrap();
    assert_eq!(l, bfs_mean(20, &g.edges()));
    // Closed form: each hop covers two positions around the ring.
    let analytic: usize = (1..20usize).map(|d| d.min(20 - d).div_ceil(2)).sum();
    assert_eq!(l, analytic as f64 / 19.0);
}

#[test]
fn clustering_of_a_star_and_a_triangle_with_tail() {
    let star = UGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]);
    assert_eq!(star.clustering(), 0.0);
    // Triangle 0-1-2 plus pendant 3 on 2: local C = 1, 1, 1/3, 0.
    let g = UGraph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]);
    assert!(close_to(g.clustering(), (1.0 + 1.0 + 1.0 / 3.0) / 4.0));
}

#[test]
fn tiny_graphs_are_undefined() {
    let r = small_world_of(&UGraph::from_edges(2, [(0, 1)]), 5, 1);
    assert!(r.undefined);
    assert!(r.swi.is_none());
    assert!(r.reason.is_some());
    let zero = small_world_of(&UGraph::ring_lattice(10, 4), 0, 1);
    assert!(zero.undefined);
}

#[test]
fn largest_component_only() {
    let mut edges = UGraph::ring_lattice(8, 2).edges();
    edges.extend([(8, 9), (9, 10)]);
    let g = UGraph::from_edges(11, edges);
    let r = small_world_of(&g, 2, 3);
    assert_eq!((r.n_nodes, r.n_edges), (8, 8));
}

fn watts_strogatz(n: usize, shortcuts: &[(usize, usize)]) -> UGraph {
    let mut g = UGraph::ring_lattice(n, 4);
    for &(a, b) in shortcuts {
        g.add_edge(a, b);
    }
    g
}

#[test]
fn fixed_seed_is_bitwise_reproducible() {
    let g = watts_strogatz(30, &[(0, 15), (5, 22), (9, 27)]);
    let a = small_world_of(&g, 8, 42);
    let b = small_world_of(&g, 8, 42);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let bits = |r: &SwiReport| [r.c_rand, r.l_rand, r.swi, r.omega].map(|x| x.map(f64::to_bits));
    assert_eq!(bits(&a), bits(&b));
    assert!(!a.undefined);
    let swi = a.swi.unwrap();
    assert!((0.0..=1.0).contains(&swi));
    assert_eq!(a.variant, "normalized_swi");
    let other = small_world_of(&g, 8, 43);
    assert_ne!(bits(&a), bits(&other));
}

#[test]
fn projection_collapses_direction_and_skips_rejected() {
    let kb = RuleKb::starter();
    let mut g = Graph::new("d");
    let ids: Vec<_> = (0..4)
        .map(|i| {
            g.add_entity(&format!("P{i}"), [], vec![], EntityStatus::Confirmed)
                .unwrap()
        })
        .collect();
    let r = RelId::new("friend_of").unwrap();
    for (s, d, st) in [
        (0, 1, TripleStatus::Confirmed),
        (1, 0, TripleStatus::Suggested),
        (1, 2, TripleStatus::Confirmed),
        (2, 3, TripleStatus::Rejected),
    ] {
        g.upsert_triple(&kb, &ids[s], &r, &ids[d], st, Provenance::Manual)
            .unwrap();
    }
    let u = project(&g);
    assert_eq!(u.n(), 4);
    assert_eq!(u.edges(), [(0, 1), (1, 2)]);
}

proptest! {
    #[test]
    fn rewiring_preserves_degrees(seed in any::<u64>(), n in 4usize..20, extra in proptest::collection::vec((0usize..20, 0usize..20), 0..30)) {
        let mut g = UGraph::ring_lattice(n, 2);
        for (a, b) in extra {
            if a % n != b % n {
                g.add_edge(a % n, b % n);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = g.rewire(10 * g.m(), &mut rng);
        prop_assert_eq!(r.degrees(), g.degrees());
        prop_assert_eq!(r.m(), g.m());
        for (a, b) in r.edges() {
            prop_assert!(a != b);
        }
    }

    #[test]
    fn path_length_matches_bfs_oracle(n in 2usize..16, edges in proptest::collection::vec((0usize..16, 0usize..16), 1..40)) {
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let g = UGraph::from_edges(n, edges.iter().copied());
        let oracle = bfs_mean(n, &g.edges());
        match g.mean_path_length() {
            Some(l) => prop_assert!(close_to(l, oracle)),
            None => prop_assert!(oracle.is_nan()),
        }
    }
}

fn add_item(gold: &[&str]) -> LogicBenchItem {
    LogicBenchItem {
        task: Task::Add,
        inputs: vec!["A is the father of B".into()],
        gold: Gold::Labels(gold.iter().map(|s| s.to_string()).collect()),
    }
}

fn remove_item(gold: RemoveLabel) -> LogicBenchItem {
    LogicBenchItem {
        task: Task::Remove,
        inputs: vec!["A is the father of B".into(), "B is the father of A".into()],
        gold: Gold::Answer(gold),
    }
}

#[test]
fn answer_parsing() {
    assert_eq!(
        parse_add_answer("Father of; parent_of\nNone"),
        ["father_of", "parent_of"]
            .map(String::from)
            .into_iter()
            .collect()
    );
    assert!(parse_add_answer("none").is_empty());
    assert_eq!(parse_remove_answer("Answer: YES."), Some(RemoveLabel::Yes));
    assert_eq!(parse_remove_answer("not sure"), None);
    assert_eq!(
        parse_remove_answer("unsure, maybe no"),
        Some(RemoveLabel::Unsure)
    );
}

#[test]
fn perfect_mock_scores_one() {
    let items = vec![
        add_item(&["parent_of", "father_of"]),
        remove_item(RemoveLabel::No),
    ];
    let p = ScriptedProvider::new(["father_of, parent_of", "No"]);
    let r = run_logic_benchmark(&items, &p);
    assert_eq!(r.add.f1, 1.0);
    assert_eq!(r.remove.accuracy, 1.0);
    assert_eq!(r.remove.f1_macro, 1.0);
    assert!(p.prompts()[0].contains("- A is the father of B"));
}

#[test]
fn always_unsure_on_uniform_gold() {
    let items: Vec<_> = RemoveLabel::ALL
        .iter()
        .flat_map(|l| [remove_item(*l), remove_item(*l)])
        .collect();
    let p = ScriptedProvider::new(["Unsure"; 6]);
    let r = run_logic_benchmark(&items, &p);
    assert!(close_to(r.remove.accuracy, 1.0 / 3.0));
}

/// Twenty items scored by hand:
/// add: tp 8, fp 3, fn 4; remove: 5/10 correct, 2 unparseable,
/// per-label F1 yes 4/7, no 2/3, unsure 2/5.
#[test]
fn twenty_item_sheet() {
    use RemoveLabel::*;
    let items = vec![
        add_item(&["father_of"]),
        add_item(&["parent_of", "father_of"]),
        add_item(&["sibling_of"]),
        add_item(&["wife_of"]),
        add_item(&["child_of"]),
        add_item(&["grandparent_of"]),
        add_item(&["mother_of"]),
        add_item(&["spouse_of"]),
        add_item(&["enemy_of", "rival_of"]),
        add_item(&["colleague_of"]),
        remove_item(Yes),
        remove_item(Yes),
        remove_item(Yes),
        remove_item(No),
        remove_item(No),
        remove_item(No),
        remove_item(Unsure),
        remove_item(Unsure),
        remove_item(Unsure),
        remove_item(Yes),
    ];
    let answers = [
        "father_of",
        "parent_of",
        "sibling_of, friend_of",
        "None",
        "child of",
        "grandparent_of; parent_of",
        "father_of",
        "Spouse Of",
        "enemy_of\nrival_of",
        "",
        "Yes",
        "yes.",
        "No",
        "No",
        "Unsure",
        "Answer: no",
        "Unsure",
        "maybe",
        "Yes",
    ];
    let p = ScriptedProvider::from_results(
        answers
            .iter()
            .map(|a| Ok(a.to_string()))
            .chain([Err(ProviderError::Transport("down".into()))]),
    );
    let r = run_logic_benchmark(&items, &p);
    assert_eq!(r.n_add, 10);
    assert_eq!((r.add.tp, r.add.fp, r.add.fn_), (8, 3, 4));
    assert!(close_to(r.add.precision, 8.0 / 11.0));
    assert!(close_to(r.add.recall, 2.0 / 3.0));
    assert!(close_to(r.add.f1, 16.0 / 23.0));
    assert_eq!(
        (r.remove.n, r.remove.correct, r.remove.unparseable),
        (10, 5, 2)
    );
    assert!(close_to(r.remove.accuracy, 0.5));
    assert_eq!(
        r.remove.per_label["Yes"],
        Counts {
            tp: 2,
            fp: 1,
            fn_: 2
        }
    );
    assert_eq!(
        r.remove.per_label["No"],
        Counts {
            tp: 2,
            fp: 1,
            fn_: 1
        }
    );
    assert_eq!(
        r.remove.per_label["Unsure"],
        Counts {
            tp: 1,
            fp: 1,
            fn_: 2
        }
    );
    assert!(close_to(r.remove.f1_macro, 172.0 / 315.0));
}

#[test]
fn jsonl_items() {
    let text = r#"{"task":"add","inputs":["A wife_of B"],"gold":["husband_of"]}

{"task":"remove","inputs":["x"],"gold":"Unsure"}
{"task":"remove","inputs":["x"],"gold":"yes"}
"#;
    let items = LogicBenchItem::read_jsonl(text).unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[2].gold, Gold::Answer(RemoveLabel::Yes));
    let bad = r#"{"task":"add","inputs":[],"gold":"Yes"}"#;
    assert!(matches!(
        LogicBenchItem::read_jsonl(bad),
        Err(BenchError::GoldShape(0))
    ));
    assert!(matches!(
        LogicBenchItem::read_jsonl("{}\n"),
        Err(BenchError::Parse { line: 1, .. })
    ));
}

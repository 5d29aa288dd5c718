//! Seeded fixtures shared by the benches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relgraph_core::graph::{EntityStatus, MentionSpan, Provenance};
use relgraph_core::retrieve::{EvidenceChunk, Index};
use relgraph_core::{Graph, RelId, RuleKb, TripleStatus};

/// Relations the random graphs draw from; all are in the starter KB.
const RELATIONS: &[&str] = &[
    "parent_of",
    "father_of",
    "mother_of",
    "child_of",
    "sibling_of",
    "spouse_of",
    "husband_of",
    "wife_of",
    "friend_of",
    "enemy_of",
    "mentor_of",
    "colleague_of",
];

/// A novel-sized cast under the starter KB: `people` characters and up to
/// `triples` confirmed random triples (self-loops are skipped).
pub fn cast(people: usize, triples: usize, seed: u64) -> (Graph, RuleKb) {
    let kb = RuleKb::starter();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new("bench");
    let ids: Vec<_> = (0..people)
        .map(|i| {
            g.add_entity(&format!("Person {i}"), [], vec![], EntityStatus::Confirmed)
                .expect("fresh name")
        })
        .collect();
    let rels: Vec<RelId> = RELATIONS
        .iter()
        .map(|r| RelId::new(*r).expect("valid id"))
        .collect();
    for _ in 0..triples {
        let (a, b) = (rng.gen_range(0..people), rng.gen_range(0..people));
        if a == b {
            continue;
        }
        let r = rels.choose(&mut rng).expect("non-empty");
        g.upsert_triple(
            &kb,
            &ids[a],
            r,
            &ids[b],
            TripleStatus::Confirmed,
            Provenance::Manual,
        )
        .expect("known entities and relation");
    }
    (g, kb)
}

/// A random unit vector.
pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    relgraph_core::retrieve::normalize(&mut v);
    v
}

/// An index of `n` chunks with random vectors.
pub fn random_index(n: usize, dim: usize, seed: u64) -> Index {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chunks = (0..n)
        .map(|i| EvidenceChunk {
            doc: "bench".into(),
            span: MentionSpan::new(i * 10, i * 10 + 10).expect("non-empty span"),
            text: String::new(),
            vector: unit_vector(&mut rng, dim),
        })
        .collect();
    Index::from_chunks("bench", dim, chunks)
}

/// About `chars` characters of filler prose.
pub fn prose(chars: usize, seed: u64) -> String {
    const WORDS: &[&str] = &[
        "the", "farm", "Scott", "Andrew", "letter", "river", "wife", "father", "quietly",
        "returned", "winter", "mother", "friend", "spoke", "of", "and", "never", "again",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::with_capacity(chars + 16);
    while s.len() < chars {
        s.push_str(WORDS.choose(&mut rng).expect("non-empty"));
        s.push(if rng.gen_ratio(1, 12) { '.' } else { ' ' });
    }
    s
}

//! Small-world statistics on the undirected projection of a graph.
//!
//! The normalized index is
//! `((L − L_latt)/(L_rand − L_latt)) · ((C − C_rand)/(C_latt − C_rand))`
//! clamped to `[0, 1]`, with `ω = L_rand/L − C/C_latt` reported alongside.
//! Random references are degree-preserving double-edge-swap rewirings, one
//! ChaCha stream per sample; the lattice reference is a ring with the same
//! node count and mean degree rounded to an even number.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{EntityId, Graph, TripleStatus};

/// A simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UGraph {
    pub fn new(n: usize) -> Self {
        UGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    /// Self-loops and repeated edges are ignored.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = UGraph::new(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.adj[a].contains(&b) {
            return false;
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
        true
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(BTreeSet::len).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m());
        for (a, ns) in self.adj.iter().enumerate() {
            out.extend(ns.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    /// Ring of `n` nodes, each joined to its `k/2` nearest neighbours per side.
    pub fn ring_lattice(n: usize, k: usize) -> Self {
        let mut g = UGraph::new(n);
        for v in 0..n {
            for d in 1..=k / 2 {
                g.add_edge(v, (v + d) % n);
            }
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = UGraph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// The largest connected component, relabelled `0..`; ties go to the
    /// component containing the smallest node.
    pub fn largest_component(&self) -> UGraph {
        let mut comp = vec![usize::MAX; self.n()];
        let mut best: Vec<usize> = Vec::new();
        for s in 0..self.n() {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut members = vec![s];
            comp[s] = s;
            let mut i = 0;
            while i < members.len() {
                let v = members[i];
                for &w in &self.adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = s;
                        members.push(w);
                    }
                }
                i += 1;
            }
            if members.len() > best.len() {
                best = members;
            }
        }
        best.sort_unstable();
        let pos: BTreeMap<usize, usize> = best.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut g = UGraph::new(best.len());
        for &v in &best {
            for w in &self.adj[v] {
                g.add_edge(pos[&v], pos[w]);
            }
        }
        g
    }

    /// Mean local clustering coefficient; nodes of degree < 2 count as 0.
    pub fn clustering(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for ns in &self.adj {
            let k = ns.len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            for &a in ns {
                links += self.adj[a]
                    .range(a + 1..)
                    .filter(|b| ns.contains(b))
                    .count();
            }
            sum += 2.0 * links as f64 / (k * (k - 1)) as f64;
        }
        sum / self.n() as f64
    }

    /// Mean shortest-path length over ordered reachable pairs, or `None`
    /// when no pair is reachable. The distance sum is accumulated as an
    /// integer so the mean is exact up to one division.
    pub fn mean_path_length(&self) -> Option<f64> {
        let mut total: u64 = 0;
        let mut pairs: u64 = 0;
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::new();
        for s in 0..self.n() {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adj[v] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        total += dist[w] as u64;
                        pairs += 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        (pairs > 0).then(|| total as f64 / pairs as f64)
    }

    /// Degree-preserving randomization by `swaps` attempted double-edge swaps:
    /// `(a,b),(c,d) → (a,d),(c,b)` whenever that keeps the graph simple.
    pub fn rewire(&self, swaps: usize, rng: &mut impl Rng) -> UGraph {
        let mut g = self.clone();
        let mut edges = g.edges();
        if edges.len() < 2 {
            return g;
        }
        for _ in 0..swaps {
            let i = rng.gen_range(0..edges.len());
            let j = rng.gen_range(0..edges.len());
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (mut c, mut d) = edges[j];
            if rng.gen::<bool>() {
                std::mem::swap(&mut c, &mut d);
            }
            if a == d || c == b || g.adj[a].contains(&d) || g.adj[c].contains(&b) {
                continue;
            }
            g.adj[a].remove(&b);
            g.adj[b].remove(&a);
            g.adj[c].remove(&d);
            g.adj[d].remove(&c);
            g.add_edge(a, d);
            g.add_edge(c, b);
            edges[i] = (a.min(d), a.max(d));
            edges[j] = (c.min(b), c.max(b));
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwiReport {
    pub n_nodes: usize,
    pub n_edges: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(rename = "C_rand")]
    pub c_rand: Option<f64>,
    #[serde(rename = "L_rand")]
    pub l_rand: Option<f64>,
    #[serde(rename = "C_latt")]
    pub c_latt: Option<f64>,
    #[serde(rename = "L_latt")]
    pub l_latt: Option<f64>,
    pub swi: Option<f64>,
    pub omega: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub variant: String,
    pub undefined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

const EPS: f64 = 1e-12;

/// Small-world statistics of the largest connected component of `g`.
pub fn small_world_of(g: &UGraph, samples: usize, seed: u64) -> SwiReport {
    let lcc = g.largest_component();
    let (n, m) = (lcc.n(), lcc.m());
    let c = lcc.clustering();
    let l = lcc.mean_path_length();
    let mut report = SwiReport {
        n_nodes: n,
        n_edges: m,
        c,
        l,
        c_rand: None,
        l_rand: None,
        c_latt: None,
        l_latt: None,
        swi: None,
        omega: None,
        samples,
        seed,
        variant: "normalized_swi".into(),
        undefined: true,
        reason: None,
    };
    if n < 4 {
        report.reason = Some(format!("largest component has {n} nodes; need at least 4"));
        return report;
    }
    if samples == 0 {
        report.reason = Some("samples must be at least 1".into());
        return report;
    }

    let degrees = lcc.degrees();
    let (mut c_sum, mut l_sum, mut l_count) = (0.0, 0.0, 0usize);
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let r = lcc.rewire(10 * m, &mut rng);
        assert_eq!(r.degrees(), degrees, "rewiring must preserve degrees");
        c_sum += r.clustering();
        if let Some(lr) = r.mean_path_length() {
            l_sum += lr;
            l_count += 1;
        }
    }
    let c_rand = c_sum / samples as f64;
    let l_rand = (l_count > 0).then(|| l_sum / l_count as f64);

    let mean_degree = 2.0 * m as f64 / n as f64;
    let max_k = if (n - 1) % 2 == 0 { n - 1 } else { n - 2 };
    let k = ((mean_degree / 2.0).round() as usize * 2).clamp(2, max_k);
    let latt = UGraph::ring_lattice(n, k);
    let c_latt = latt.clustering();
    let l_latt = latt.mean_path_length();

    report.c_rand = Some(c_rand);
    report.l_rand = l_rand;
    report.c_latt = Some(c_latt);
    report.l_latt = l_latt;
    if let (Some(l), Some(lr)) = (l, l_rand) {
        if l > 0.0 && c_latt > 0.0 {
            report.omega = Some(lr / l - c / c_latt);
        }
    }
    match (l, l_rand, l_latt) {
        (Some(l), Some(lr), Some(ll)) if (lr - ll).abs() > EPS && (c_latt - c_rand).abs() > EPS => {
            let v = ((l - ll) / (lr - ll)) * ((c - c_rand) / (c_latt - c_rand));
            report.swi = Some(v.clamp(0.0, 1.0));
            report.undefined = false;
        }
        _ => report.reason = Some("degenerate reference denominator".into()),
    }
    report
}

/// Undirected projection of the non-rejected triples of `g`: an edge exists
/// iff a triple exists in either direction. Every entity is a node.
pub fn project(g: &Graph) -> UGraph {
    let ids: BTreeMap<&EntityId, usize> = g.entity_ids().enumerate().map(|(i, e)| (e, i)).collect();
    UGraph::from_edges(
        ids.len(),
        g.triples()
            .filter(|t| t.status != TripleStatus::Rejected)
            .map(|t| (ids[&t.key.src], ids[&t.key.dst])),
    )
}

pub fn small_world_index(g: &Graph, samples: usize, seed: u64) -> SwiReport {
    small_world_of(&project(g), samples, seed)
}

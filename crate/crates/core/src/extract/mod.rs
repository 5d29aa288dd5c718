//! Multi-run consensus extraction.
//!
//! Each extractor is run `n` times with temperature sampling; a candidate is
//! kept when it occurs in at least `tau` runs. Votes count runs, not
//! occurrences: a name listed twice in one run still contributes one vote.

mod parse;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::graph::{
    Document, Entity, EntityId, EntityStatus, Graph, GraphError, MentionSpan, Provenance,
    TripleStatus, UpsertOutcome,
};
use crate::kb::{RelId, RuleKb};
use crate::provider::Provider;

pub use parse::{normalize_name, normalize_relation, parse_names, parse_triples};

const CHARACTER_PROMPT: &str = include_str!("../../prompts/characters.v1.txt");
const RELATION_PROMPT: &str = include_str!("../../prompts/relations.v1.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub n_c: u32,
    pub tau_c: u32,
    pub n_e: u32,
    pub tau_e: u32,
    pub temperature: f64,
    pub max_chunk_chars: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            n_c: 5,
            tau_c: 3,
            n_e: 5,
            tau_e: 3,
            temperature: 0.7,
            max_chunk_chars: 12_000,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let bad = |m: &str| Err(ExtractError::Config(m.to_string()));
        if self.n_c == 0 || self.n_e == 0 {
            return bad("run counts must be at least 1");
        }
        if !(1..=self.n_c).contains(&self.tau_c) {
            return bad("tau_c must lie in 1..=n_c");
        }
        if !(1..=self.n_e).contains(&self.tau_e) {
            return bad("tau_e must lie in 1..=n_e");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be non-negative");
        }
        if self.max_chunk_chars == 0 {
            return bad("max_chunk_chars must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("invalid extraction config: {0}")]
    Config(String),
    #[error("document is empty")]
    EmptyDocument,
    #[error("all {0} runs failed")]
    AllRunsFailed(u32),
    #[error("no confirmed entities to condition relation extraction on")]
    NoEntities,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Candidate {
    Name {
        name: String,
    },
    Triple {
        src: EntityId,
        rel: RelId,
        dst: EntityId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotedCandidate {
    #[serde(flatten)]
    pub payload: Candidate,
    pub votes: u32,
    pub runs: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<MentionSpan>,
}

/// A relation line that could not be turned into a graph triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub run: u32,
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub candidates: Vec<VotedCandidate>,
    pub failed_runs: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejects: Vec<RejectRecord>,
}

/// Keeps every key seen in at least `tau` runs, sorted by votes desc then key.
pub fn consensus<K: Ord + Clone>(runs: &[BTreeSet<K>], tau: u32) -> Vec<(K, u32)> {
    let mut tally: BTreeMap<&K, u32> = BTreeMap::new();
    for run in runs {
        for k in run {
            *tally.entry(k).or_default() += 1;
        }
    }
    let mut kept: Vec<(K, u32)> = tally
        .into_iter()
        .filter(|(_, v)| *v >= tau)
        .map(|(k, v)| (k.clone(), v))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    kept
}

/// Splits text into consecutive pieces of at most `max_chars` chars.
pub fn chunk_text(text: &str, max_chars: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    chars
        .chunks(max_chars.max(1))
        .map(|c| c.iter().collect())
        .collect()
}

/// Every occurrence of `needle` in `text`, as char-offset spans.
pub fn find_mentions(text: &str, needle: &str) -> Vec<MentionSpan> {
    if needle.is_empty() {
        return Vec::new();
    }
    let needle_chars = needle.chars().count();
    let mut spans = Vec::new();
    let mut char_pos = 0;
    let mut byte_pos = 0;
    for (b, _) in text.match_indices(needle) {
        char_pos += text[byte_pos..b].chars().count();
        byte_pos = b;
        spans.push(MentionSpan {
            start: char_pos,
            end: char_pos + needle_chars,
        });
    }
    spans
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

/// Runs the extractor `n` times; each run is the union over chunks.
/// A failed chunk call makes the whole run count as empty.
fn run_n<K: Ord>(
    n: u32,
    chunks: &[String],
    p: &dyn Provider,
    temperature: f64,
    prompt: impl Fn(&str) -> String,
    mut parse: impl FnMut(u32, &str) -> BTreeSet<K>,
) -> (Vec<BTreeSet<K>>, u32) {
    let mut runs = Vec::with_capacity(n as usize);
    let mut failed = 0;
    for run in 0..n {
        let mut set = BTreeSet::new();
        let mut ok = true;
        for chunk in chunks {
            match p.complete(&prompt(chunk), temperature) {
                Ok(answer) => set.extend(parse(run, &answer)),
                Err(e) => {
                    warn!(run, provider = p.name(), error = %e, "extraction run failed");
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            failed += 1;
            set.clear();
        }
        runs.push(set);
    }
    (runs, failed)
}

/// Proposes character names by consensus over `cfg.n_c` runs.
pub fn extract_characters(
    doc: &Document,
    cfg: &ExtractionConfig,
    p: &dyn Provider,
) -> Result<Extraction, ExtractError> {
    cfg.validate()?;
    if doc.text.trim().is_empty() {
        return Err(ExtractError::EmptyDocument);
    }
    let chunks = chunk_text(&doc.text, cfg.max_chunk_chars);
    let (runs, failed) = run_n(
        cfg.n_c,
        &chunks,
        p,
        cfg.temperature,
        |chunk| fill(CHARACTER_PROMPT, &[("text", chunk)]),
        |_, answer| parse_names(answer).into_iter().collect(),
    );
    if failed == cfg.n_c {
        return Err(ExtractError::AllRunsFailed(failed));
    }
    let candidates = consensus(&runs, cfg.tau_c)
        .into_iter()
        .map(|(name, votes)| VotedCandidate {
            mentions: find_mentions(&doc.text, &name),
            payload: Candidate::Name { name },
            votes,
            runs: cfg.n_c,
        })
        .collect();
    Ok(Extraction {
        candidates,
        failed_runs: failed,
        rejects: Vec::new(),
    })
}

/// Maps surface strings to KB relation ids: exact id first, then the
/// normalized form of the id or display label.
fn relation_resolver(kb: &RuleKb) -> impl Fn(&str) -> Option<RelId> + '_ {
    let mut by_norm: BTreeMap<String, RelId> = BTreeMap::new();
    for r in kb.relations() {
        by_norm.insert(normalize_relation(&r.display), r.id.clone());
    }
    for r in kb.relations() {
        by_norm.insert(normalize_relation(r.id.as_str()), r.id.clone());
    }
    move |raw: &str| {
        kb.relation(raw)
            .map(|r| r.id.clone())
            .or_else(|| by_norm.get(&normalize_relation(raw)).cloned())
    }
}

/// Proposes relation triples among `entities` by consensus over `cfg.n_e` runs.
pub fn extract_relations(
    doc: &Document,
    entities: &[Entity],
    kb: &RuleKb,
    cfg: &ExtractionConfig,
    p: &dyn Provider,
) -> Result<Extraction, ExtractError> {
    cfg.validate()?;
    if doc.text.trim().is_empty() {
        return Err(ExtractError::EmptyDocument);
    }
    if entities.is_empty() {
        return Err(ExtractError::NoEntities);
    }
    let mut alias_to_entity: BTreeMap<String, EntityId> = BTreeMap::new();
    for e in entities {
        for a in &e.aliases {
            alias_to_entity.insert(normalize_name(a), e.id.clone());
        }
    }
    let character_list = entities
        .iter()
        .map(|e| {
            let others: Vec<&str> = e
                .aliases
                .iter()
                .filter(|a| **a != e.canonical)
                .map(String::as_str)
                .collect();
            if others.is_empty() {
                format!("- {}", e.canonical)
            } else {
                format!("- {} (also: {})", e.canonical, others.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let relation_list = kb
        .relations()
        .map(|r| format!("- {} ({})", r.id, r.display))
        .collect::<Vec<_>>()
        .join("\n");
    let resolve_rel = relation_resolver(kb);

    let mut rejects = Vec::new();
    let chunks = chunk_text(&doc.text, cfg.max_chunk_chars);
    let (runs, failed) = run_n(
        cfg.n_e,
        &chunks,
        p,
        cfg.temperature,
        |chunk| {
            fill(
                RELATION_PROMPT,
                &[
                    ("characters", &character_list),
                    ("relations", &relation_list),
                    ("text", chunk),
                ],
            )
        },
        |run, answer| {
            let mut set = BTreeSet::new();
            for parsed in parse_triples(answer) {
                let (raw, fields) = match parsed {
                    Ok(v) => v,
                    Err(raw) => {
                        rejects.push(RejectRecord {
                            run,
                            raw,
                            reason: "malformed line".into(),
                        });
                        continue;
                    }
                };
                let [x, r, y] = fields;
                let reject = |reason: String| RejectRecord {
                    run,
                    raw: raw.clone(),
                    reason,
                };
                let Some(src) = alias_to_entity.get(&normalize_name(&x)) else {
                    rejects.push(reject(format!("unknown character {x:?}")));
                    continue;
                };
                let Some(dst) = alias_to_entity.get(&normalize_name(&y)) else {
                    rejects.push(reject(format!("unknown character {y:?}")));
                    continue;
                };
                let Some(rel) = resolve_rel(&r) else {
                    rejects.push(reject(format!("unknown relation {r:?}")));
                    continue;
                };
                if src == dst {
                    rejects.push(reject("self-relation".into()));
                    continue;
                }
                set.insert(Candidate::Triple {
                    src: src.clone(),
                    rel,
                    dst: dst.clone(),
                });
            }
            set
        },
    );
    if failed == cfg.n_e {
        return Err(ExtractError::AllRunsFailed(failed));
    }
    let candidates = consensus(&runs, cfg.tau_e)
        .into_iter()
        .map(|(payload, votes)| VotedCandidate {
            payload,
            votes,
            runs: cfg.n_e,
            mentions: Vec::new(),
        })
        .collect();
    Ok(Extraction {
        candidates,
        failed_runs: failed,
        rejects,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub entities_added: Vec<EntityId>,
    /// Names that matched an existing alias; their mentions were attached there.
    pub entities_matched: Vec<EntityId>,
    pub triples_added: usize,
    pub triples_updated: usize,
    /// Candidates blocked by rejected tombstones.
    pub triples_tombstoned: usize,
    pub errors: Vec<String>,
}

/// Adds voted candidates to the graph as suggestions with `extracted(votes)`
/// provenance. Tombstones hold and confirmed items are never downgraded.
pub fn ingest_candidates(
    g: &mut Graph,
    kb: &RuleKb,
    chars: &[VotedCandidate],
    rels: &[VotedCandidate],
) -> IngestReport {
    let mut report = IngestReport::default();
    for c in chars {
        let Candidate::Name { name } = &c.payload else {
            report
                .errors
                .push("relation candidate in character list".into());
            continue;
        };
        if let Some(existing) = g.entity_by_alias(name).map(|e| e.id.clone()) {
            g.add_mentions(&existing, &c.mentions)
                .expect("entity exists");
            report.entities_matched.push(existing);
            continue;
        }
        match g.add_entity(name, [], c.mentions.clone(), EntityStatus::Suggested) {
            Ok(id) => report.entities_added.push(id),
            Err(e) => report.errors.push(e.to_string()),
        }
    }
    for c in rels {
        let Candidate::Triple { src, rel, dst } = &c.payload else {
            report.errors.push("name candidate in relation list".into());
            continue;
        };
        match g.upsert_triple(
            kb,
            src,
            rel,
            dst,
            TripleStatus::Suggested,
            Provenance::Extracted { votes: c.votes },
        ) {
            Ok(UpsertOutcome::Inserted) => report.triples_added += 1,
            Ok(UpsertOutcome::Updated) => report.triples_updated += 1,
            Ok(UpsertOutcome::Tombstoned) => report.triples_tombstoned += 1,
            Err(e @ GraphError::UnknownEntity(_)) | Err(e) => report.errors.push(e.to_string()),
        }
    }
    report
}

//! Evidence retrieval over a single document and conflict-resolution prompts.

mod embed;
mod resolve;
mod sidecar;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Conflict;
use crate::graph::{Document, Graph, MentionSpan, TripleKey};
use crate::kb::RuleKb;

#[cfg(feature = "http")]
pub use embed::HttpEmbedder;
pub use embed::{normalize, EmbedError, Embedder, HashEmbedder};
pub use resolve::{
    apply_resolution, build_resolution_prompt, choose, parse_choice, resolve_conflict,
    ChoiceOption, Resolution, ResolutionPrompt, ResolveError,
};
pub use sidecar::{read_index, write_index, SidecarError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RetrieveError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("index is empty")]
    EmptyIndex,
    #[error("invalid chunking: chunk {chunk}, overlap {overlap}")]
    BadChunking { chunk: usize, overlap: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub chunk_chars: usize,
    pub overlap_chars: usize,
    pub k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            chunk_chars: 800,
            overlap_chars: 200,
            k: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChunk {
    pub doc: String,
    pub span: MentionSpan,
    pub text: String,
    /// Unit length; omitted from JSON.
    #[serde(skip)]
    pub vector: Vec<f32>,
}

/// A chunk with its retrieval score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk: EvidenceChunk,
    pub score: f64,
}

/// Spans of `len` chars cut into windows of `chunk` chars overlapping by
/// `overlap`. The last window may be short.
pub fn chunk_spans(
    len: usize,
    chunk: usize,
    overlap: usize,
) -> Result<Vec<MentionSpan>, RetrieveError> {
    if chunk == 0 || overlap >= chunk {
        return Err(RetrieveError::BadChunking { chunk, overlap });
    }
    let mut spans = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + chunk).min(len);
        spans.push(MentionSpan { start, end });
        if end == len {
            break;
        }
        start = end - overlap;
    }
    Ok(spans)
}

/// An immutable exact inner-product index over one document.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    doc: String,
    dim: usize,
    chunks: Vec<EvidenceChunk>,
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

/// Ranking order: higher score first, then earlier span start, then position.
/// `-0.0` and `0.0` tie; NaN falls back to the total order.
fn rank(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or_else(|| b.0.total_cmp(&a.0))
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

impl Index {
    pub fn build(
        doc: &Document,
        chunk_chars: usize,
        overlap_chars: usize,
        e: &dyn Embedder,
    ) -> Result<Index, RetrieveError> {
        let chars: Vec<char> = doc.text.chars().collect();
        if chars.is_empty() {
            return Err(RetrieveError::EmptyDocument);
        }
        let spans = chunk_spans(chars.len(), chunk_chars, overlap_chars)?;
        let texts: Vec<String> = spans
            .iter()
            .map(|s| chars[s.start..s.end].iter().collect())
            .collect();
        let vectors = embed_checked(e, &texts)?;
        let chunks = spans
            .into_iter()
            .zip(texts)
            .zip(vectors)
            .map(|((span, text), vector)| EvidenceChunk {
                doc: doc.id.clone(),
                span,
                text,
                vector,
            })
            .collect();
        Ok(Index {
            doc: doc.id.clone(),
            dim: e.dim(),
            chunks,
        })
    }

    /// Assembles an index from prepared chunks; vectors are normalized.
    pub fn from_chunks(
        doc: impl Into<String>,
        dim: usize,
        mut chunks: Vec<EvidenceChunk>,
    ) -> Index {
        for c in &mut chunks {
            assert_eq!(c.vector.len(), dim, "chunk vector dim");
            normalize(&mut c.vector);
        }
        Index {
            doc: doc.into(),
            dim,
            chunks,
        }
    }

    pub fn doc(&self) -> &str {
        &self.doc
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chunks(&self) -> &[EvidenceChunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Exact top-k by inner product with the query vector.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<Hit>, RetrieveError> {
        if k == 0 {
            return Err(RetrieveError::ZeroK);
        }
        if self.chunks.is_empty() {
            return Err(RetrieveError::EmptyIndex);
        }
        let mut scored: Vec<(f64, usize, usize)> = self
            .chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (dot(query, &c.vector), c.span.start, i))
            .collect();
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank);
            scored.truncate(k);
        }
        scored.sort_by(rank);
        Ok(scored
            .into_iter()
            .map(|(score, _, i)| Hit {
                chunk: self.chunks[i].clone(),
                score,
            })
            .collect())
    }
}

fn embed_checked(e: &dyn Embedder, texts: &[String]) -> Result<Vec<Vec<f32>>, RetrieveError> {
    let mut vectors = e.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch {
            expected: texts.len(),
            got: vectors.len(),
        }
        .into());
    }
    for v in &mut vectors {
        if v.len() != e.dim() {
            return Err(EmbedError::DimMismatch {
                expected: e.dim(),
                got: v.len(),
            }
            .into());
        }
        normalize(v);
    }
    Ok(vectors)
}

fn entity_name(g: &Graph, id: &crate::graph::EntityId) -> String {
    g.entity(id.as_str())
        .map(|e| e.canonical.clone())
        .unwrap_or_else(|| id.to_string())
}

/// `"<x> <relation display> <y>."`
pub fn render_statement(g: &Graph, kb: &RuleKb, k: &TripleKey) -> String {
    let display = kb
        .relation(k.rel.as_str())
        .map(|r| r.display.clone())
        .unwrap_or_else(|| k.rel.to_string());
    format!(
        "{} {} {}.",
        entity_name(g, &k.src),
        display,
        entity_name(g, &k.dst)
    )
}

/// The retrieval query for a conflict: one statement per offender.
pub fn render_query(g: &Graph, kb: &RuleKb, conflict: &Conflict) -> String {
    conflict
        .offenders
        .iter()
        .map(|k| render_statement(g, kb, k))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn retrieve_evidence(
    idx: &Index,
    g: &Graph,
    kb: &RuleKb,
    conflict: &Conflict,
    k: usize,
    e: &dyn Embedder,
) -> Result<Vec<Hit>, RetrieveError> {
    if idx.is_empty() {
        return Err(RetrieveError::EmptyIndex);
    }
    let query = render_query(g, kb, conflict);
    let q = embed_checked(e, &[query])?.pop().expect("one vector");
    idx.search(&q, k)
}

//! Headless extract → ingest → close → detect → resolve run.

use std::collections::BTreeSet;

use relgraph_core::config::AppConfig;
use relgraph_core::engine::{close, detect_conflicts, Conflict};
use relgraph_core::extract::{
    extract_characters, extract_relations, ingest_candidates, IngestReport, RejectRecord,
    VotedCandidate,
};
use relgraph_core::graph::{EntityPatch, EntityStatus, Graph};
use relgraph_core::provider::Provider;
use relgraph_core::retrieve::{
    apply_resolution, build_resolution_prompt, resolve_conflict, retrieve_evidence, Embedder,
    Index, Resolution,
};
use relgraph_core::{Document, RuleKb};
use serde::Serialize;
use tracing::{info, warn};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub candidates: Vec<VotedCandidate>,
    pub failed_runs: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rejects: Vec<RejectRecord>,
    pub ingest: IngestReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Unresolved {
    pub conflict_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub doc_id: String,
    pub characters: StageReport,
    /// Absent when no characters were found.
    pub relations: Option<StageReport>,
    pub inferred: usize,
    pub resolutions: Vec<Resolution>,
    pub unresolved: Vec<Unresolved>,
    pub open_conflicts: Vec<Conflict>,
    pub entities: usize,
    pub triples: usize,
}

/// Closes `g` in place and returns the number of new inferences.
fn reason(g: &mut Graph, kb: &RuleKb) -> Result<usize, CliError> {
    let c = close(g, kb)?;
    *g = c.graph;
    Ok(c.derivations.len())
}

/// Runs the whole pipeline. Extracted characters are confirmed wholesale
/// since there is no annotator to do it. With `auto_resolve` every open
/// conflict gets one provider decision, applied directly; conflicts whose
/// answer fails stay open and are listed in `unresolved`.
pub fn run_pipeline(
    doc: &Document,
    kb: &RuleKb,
    cfg: &AppConfig,
    provider: &dyn Provider,
    embedder: &dyn Embedder,
    auto_resolve: bool,
) -> Result<(Graph, PipelineReport), CliError> {
    let mut g = Graph::new(doc.id.clone());
    g.set_kb_version(kb.version());

    let ex = extract_characters(doc, &cfg.extraction, provider)?;
    let ingest = ingest_candidates(&mut g, kb, &ex.candidates, &[]);
    info!(
        candidates = ex.candidates.len(),
        failed_runs = ex.failed_runs,
        "characters extracted"
    );
    let characters = StageReport {
        candidates: ex.candidates,
        failed_runs: ex.failed_runs,
        rejects: ex.rejects,
        ingest,
    };

    let ids: Vec<_> = g.entities().map(|e| e.id.clone()).collect();
    for id in &ids {
        g.update_entity(
            id,
            EntityPatch {
                status: Some(EntityStatus::Confirmed),
                ..Default::default()
            },
        )?;
    }

    let relations = if ids.is_empty() {
        warn!("no characters found; skipping relation extraction");
        None
    } else {
        let entities: Vec<_> = g.entities().cloned().collect();
        let ex = extract_relations(doc, &entities, kb, &cfg.extraction, provider)?;
        let ingest = ingest_candidates(&mut g, kb, &[], &ex.candidates);
        info!(
            candidates = ex.candidates.len(),
            rejects = ex.rejects.len(),
            "relations extracted"
        );
        Some(StageReport {
            candidates: ex.candidates,
            failed_runs: ex.failed_runs,
            rejects: ex.rejects,
            ingest,
        })
    };

    let mut inferred = reason(&mut g, kb)?;
    let mut resolutions = Vec::new();
    let mut unresolved = Vec::new();
    if auto_resolve && !detect_conflicts(&g, kb).is_empty() {
        let r = &cfg.retrieval;
        let index = Index::build(doc, r.chunk_chars, r.overlap_chars, embedder)?;
        let mut attempted = BTreeSet::new();
        while let Some(c) = detect_conflicts(&g, kb)
            .into_iter()
            .find(|c| !attempted.contains(&c.id))
        {
            attempted.insert(c.id.clone());
            let hits = retrieve_evidence(&index, &g, kb, &c, r.k, embedder)?;
            let prompt = build_resolution_prompt(&g, kb, &c, hits);
            match resolve_conflict(&c, &prompt, provider) {
                Ok(res) => {
                    apply_resolution(&mut g, &res)?;
                    inferred += reason(&mut g, kb)?;
                    info!(conflict = %c.id, answer = %res.answer_label, "conflict resolved");
                    resolutions.push(res);
                }
                Err(e) => {
                    warn!(conflict = %c.id, error = %e, "conflict left open");
                    unresolved.push(Unresolved {
                        conflict_id: c.id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }

    let open_conflicts = detect_conflicts(&g, kb);
    let report = PipelineReport {
        doc_id: doc.id.clone(),
        characters,
        relations,
        inferred,
        resolutions,
        unresolved,
        open_conflicts,
        entities: g.entities().count(),
        triples: g.triples().count(),
    };
    Ok((g, report))
}

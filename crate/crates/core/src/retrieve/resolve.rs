use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{render_statement, Hit};
use crate::engine::Conflict;
use crate::graph::{Graph, GraphError, TripleKey, TripleStatus};
use crate::kb::{RuleKb, RuleKind};
use crate::provider::{Provider, ProviderError};

const RESOLVE_PROMPT: &str = include_str!("../../prompts/resolve.v1.txt");
const LABELS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub label: String,
    pub statement: String,
    pub keep: Vec<TripleKey>,
    pub drop: Vec<TripleKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPrompt {
    pub conflict_id: String,
    pub question: String,
    pub options: Vec<ChoiceOption>,
    pub evidence: Vec<Hit>,
    pub expected_answer_format: String,
    /// No evidence was available.
    pub low_confidence: bool,
    /// The full prompt text sent to the provider.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub conflict_id: String,
    pub kept: Vec<TripleKey>,
    pub dropped: Vec<TripleKey>,
    pub answer_label: String,
    pub raw: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError {
    #[error("conflict {0} is not open")]
    NotOpen(String),
    #[error("prompt does not belong to conflict {0}")]
    PromptMismatch(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no option label found in answer")]
    Unparseable { raw: String },
    #[error("option {0} does not exist")]
    UnknownOption(String),
}

fn label(i: usize) -> String {
    LABELS
        .chars()
        .nth(i)
        .map(String::from)
        .unwrap_or_else(|| format!("Z{}", i + 1 - LABELS.len()))
}

fn display<'a>(kb: &'a RuleKb, r: &'a crate::kb::RelId) -> &'a str {
    kb.relation(r.as_str())
        .map_or(r.as_str(), |t| t.display.as_str())
}

fn name(g: &Graph, id: &crate::graph::EntityId) -> String {
    g.entity(id.as_str())
        .map_or_else(|| id.to_string(), |e| e.canonical.clone())
}

fn sentence(g: &Graph, kb: &RuleKb, k: &TripleKey) -> String {
    render_statement(g, kb, k).trim_end_matches('.').to_string()
}

pub fn build_resolution_prompt(
    g: &Graph,
    kb: &RuleKb,
    conflict: &Conflict,
    evidence: Vec<Hit>,
) -> ResolutionPrompt {
    let offs = &conflict.offenders;
    let mut options = Vec::new();
    let (reason, question) = match &conflict.rule {
        RuleKind::Exclusive(r) => {
            let x = name(g, &offs[0].src);
            for (i, k) in offs.iter().enumerate() {
                options.push(ChoiceOption {
                    label: label(i),
                    statement: format!("Only this holds: {}", sentence(g, kb, k)),
                    keep: vec![k.clone()],
                    drop: offs.iter().filter(|o| *o != k).cloned().collect(),
                });
            }
            options.push(ChoiceOption {
                label: label(offs.len()),
                statement: "None of these statements holds".into(),
                keep: Vec::new(),
                drop: offs.clone(),
            });
            (
                format!("{x} can be {} at most one character", display(kb, r)),
                format!("Which of these statements about {x} is correct?"),
            )
        }
        rule => {
            let (a, b) = (&offs[0], &offs[1]);
            let (sa, sb) = (sentence(g, kb, a), sentence(g, kb, b));
            options.push(ChoiceOption {
                label: label(0),
                statement: format!("{sa}; it is not true that {sb}"),
                keep: vec![a.clone()],
                drop: vec![b.clone()],
            });
            options.push(ChoiceOption {
                label: label(1),
                statement: format!("{sb}; it is not true that {sa}"),
                keep: vec![b.clone()],
                drop: vec![a.clone()],
            });
            options.push(ChoiceOption {
                label: label(2),
                statement: "Both statements are wrong".into(),
                keep: Vec::new(),
                drop: vec![a.clone(), b.clone()],
            });
            let reason = match rule {
                RuleKind::Asymmetric(..) => format!(
                    "the relation \"{}\" in one direction rules out \"{}\" in the other",
                    display(kb, &a.rel),
                    display(kb, &b.rel)
                ),
                _ => format!(
                    "\"{}\" and \"{}\" cannot both hold between the same two characters",
                    display(kb, &a.rel),
                    display(kb, &b.rel)
                ),
            };
            (
                reason,
                format!(
                    "Which reading of the relationship between {} and {} is correct?",
                    name(g, &a.src),
                    name(g, &a.dst)
                ),
            )
        }
    };
    let low_confidence = evidence.is_empty();
    let evidence_text = if low_confidence {
        "(no evidence retrieved)".to_string()
    } else {
        evidence
            .iter()
            .map(|h| {
                format!(
                    "[chars {}-{}] {}",
                    h.chunk.span.start, h.chunk.span.end, h.chunk.text
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    let option_text = options
        .iter()
        .map(|o| format!("{}. {}", o.label, o.statement))
        .collect::<Vec<_>>()
        .join("\n");
    let text = RESOLVE_PROMPT
        .replace("{{reason}}", &reason)
        .replace("{{evidence}}", &evidence_text)
        .replace("{{question}}", &question)
        .replace("{{options}}", &option_text);
    ResolutionPrompt {
        conflict_id: conflict.id.clone(),
        question,
        options,
        evidence,
        expected_answer_format: "single option label".into(),
        low_confidence,
        text,
    }
}

/// Index of the first standalone token that is one of the option labels.
pub fn parse_choice(answer: &str, options: &[ChoiceOption]) -> Option<usize> {
    answer
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .find_map(|t| options.iter().position(|o| o.label == t))
}

/// Asks the provider to pick an option. Nothing in the graph changes.
pub fn resolve_conflict(
    conflict: &Conflict,
    prompt: &ResolutionPrompt,
    p: &dyn Provider,
) -> Result<Resolution, ResolveError> {
    if !conflict.is_open() {
        return Err(ResolveError::NotOpen(conflict.id.clone()));
    }
    if prompt.conflict_id != conflict.id {
        return Err(ResolveError::PromptMismatch(conflict.id.clone()));
    }
    let raw = p.complete(&prompt.text, 0.0)?;
    let Some(i) = parse_choice(&raw, &prompt.options) else {
        return Err(ResolveError::Unparseable { raw });
    };
    let o = &prompt.options[i];
    Ok(Resolution {
        conflict_id: conflict.id.clone(),
        kept: o.keep.clone(),
        dropped: o.drop.clone(),
        answer_label: o.label.clone(),
        raw,
    })
}

/// A human-chosen option turned into a resolution.
pub fn choose(prompt: &ResolutionPrompt, label: &str) -> Result<Resolution, ResolveError> {
    let o = prompt
        .options
        .iter()
        .find(|o| o.label == label)
        .ok_or_else(|| ResolveError::UnknownOption(label.to_string()))?;
    Ok(Resolution {
        conflict_id: prompt.conflict_id.clone(),
        kept: o.keep.clone(),
        dropped: o.drop.clone(),
        answer_label: o.label.clone(),
        raw: label.to_string(),
    })
}

/// Rejects the dropped triples. Fails without changes if any is missing.
pub fn apply_resolution(g: &mut Graph, r: &Resolution) -> Result<(), GraphError> {
    if let Some(k) = r.dropped.iter().find(|k| !g.contains(k)) {
        return Err(GraphError::UnknownTriple(k.to_string()));
    }
    for k in &r.dropped {
        g.set_status(k, TripleStatus::Rejected)?;
    }
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use super::{harmonic, ratio, Counts, EvalReport};
use crate::extract::normalize_relation;
use crate::provider::Provider;

const ADD_PROMPT: &str = include_str!("../../prompts/logic_add.v1.txt");
const REMOVE_PROMPT: &str = include_str!("../../prompts/logic_remove.v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Add,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RemoveLabel {
    #[serde(alias = "yes")]
    Yes,
    #[serde(alias = "no")]
    No,
    #[serde(alias = "unsure")]
    Unsure,
}

impl RemoveLabel {
    pub const ALL: [RemoveLabel; 3] = [RemoveLabel::Yes, RemoveLabel::No, RemoveLabel::Unsure];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Answer(RemoveLabel),
    Labels(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicBenchItem {
    pub task: Task,
    pub inputs: Vec<String>,
    pub gold: Gold,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("item {0}: gold does not fit the task")]
    GoldShape(usize),
}

impl LogicBenchItem {
    /// Reads JSON lines, skipping blank ones.
    pub fn read_jsonl(text: &str) -> Result<Vec<LogicBenchItem>, BenchError> {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: LogicBenchItem =
                serde_json::from_str(line).map_err(|e| BenchError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if !item.well_formed() {
                return Err(BenchError::GoldShape(items.len()));
            }
            items.push(item);
        }
        Ok(items)
    }

    pub fn well_formed(&self) -> bool {
        matches!(
            (self.task, &self.gold),
            (Task::Add, Gold::Labels(_)) | (Task::Remove, Gold::Answer(_))
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemoveReport {
    pub n: usize,
    pub correct: usize,
    pub unparseable: usize,
    pub accuracy: f64,
    /// Mean F1 over the labels that occur in gold or predictions.
    pub f1_macro: f64,
    pub per_label: BTreeMap<String, Counts>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogicReport {
    pub n_add: usize,
    pub add: EvalReport,
    pub remove: RemoveReport,
}

/// Comma-, semicolon- or newline-separated labels, normalized like relation ids.
pub fn parse_add_answer(answer: &str) -> BTreeSet<String> {
    answer
        .split([',', ';', '\n'])
        .map(normalize_relation)
        .filter(|s| !s.is_empty() && s != "none")
        .collect()
}

/// The first word that is yes, no or unsure (any case).
pub fn parse_remove_answer(answer: &str) -> Option<RemoveLabel> {
    answer
        .split(|c: char| !c.is_alphanumeric())
        .find_map(|w| match w.to_lowercase().as_str() {
            "yes" => Some(RemoveLabel::Yes),
            "no" => Some(RemoveLabel::No),
            "unsure" => Some(RemoveLabel::Unsure),
            _ => None,
        })
}

/// Runs every item once at temperature 0. Provider failures are treated like
/// unparseable answers.
pub fn run_logic_benchmark(items: &[LogicBenchItem], p: &dyn Provider) -> LogicReport {
    let mut add: BTreeMap<String, Counts> = BTreeMap::new();
    let mut n_add = 0;
    let mut rem = RemoveReport::default();
    for (i, item) in items.iter().enumerate() {
        let inputs = item
            .inputs
            .iter()
            .map(|s| format!("- {s}"))
            .collect::<Vec<_>>()
            .join("\n");
        let template = match item.task {
            Task::Add => ADD_PROMPT,
            Task::Remove => REMOVE_PROMPT,
        };
        let answer = match p.complete(&template.replace("{{inputs}}", &inputs), 0.0) {
            Ok(a) => Some(a),
            Err(e) => {
                warn!(item = i, error = %e, "provider failed on benchmark item");
                None
            }
        };
        match &item.gold {
            Gold::Labels(gold) => {
                n_add += 1;
                let gold: BTreeSet<String> = gold.iter().map(|g| normalize_relation(g)).collect();
                let pred = answer.as_deref().map(parse_add_answer).unwrap_or_default();
                for l in &pred {
                    let c = add.entry(l.clone()).or_default();
                    if gold.contains(l) {
                        c.tp += 1;
                    } else {
                        c.fp += 1;
                    }
                }
                for l in gold.difference(&pred) {
                    add.entry(l.clone()).or_default().fn_ += 1;
                }
            }
            Gold::Answer(gold) => {
                rem.n += 1;
                let pred = answer.as_deref().and_then(parse_remove_answer);
                let gold_key = format!("{gold:?}");
                match pred {
                    Some(p) if p == *gold => {
                        rem.correct += 1;
                        rem.per_label.entry(gold_key).or_default().tp += 1;
                    }
                    Some(p) => {
                        rem.per_label.entry(format!("{p:?}")).or_default().fp += 1;
                        rem.per_label.entry(gold_key).or_default().fn_ += 1;
                    }
                    None => {
                        warn!(item = i, "unparseable remove answer");
                        rem.unparseable += 1;
                        rem.per_label.entry(gold_key).or_default().fn_ += 1;
                    }
                }
            }
        }
    }
    rem.accuracy = ratio(rem.correct, rem.n);
    if !rem.per_label.is_empty() {
        let sum: f64 = rem
            .per_label
            .values()
            .map(|c| harmonic(ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_)))
            .sum();
        rem.f1_macro = sum / rem.per_label.len() as f64;
    }
    LogicReport {
        n_add,
        add: EvalReport::from_per_relation(add),
        remove: rem,
    }
}

//! Character relationship graphs built from narrative text.
//!
//! * [`kb`]: relation types and the editable rule knowledge base.
//! * [`graph`]: entities, aliases and status/provenance-tagged triples.
//! * [`engine`]: fixpoint completion, conflict detection, op planning.
//! * [`extract`]: multi-run consensus extraction against a text provider.
//! * [`retrieve`]: evidence retrieval and conflict-resolution prompts.
//! * [`metrics`]: P/R/F1 scoring, the logic benchmark, small-world statistics.

pub mod config;
pub mod document;
pub mod engine;
pub mod extract;
pub mod graph;
pub mod kb;
pub mod metrics;
pub mod provider;
pub mod retrieve;
pub mod view;

pub use document::GraphDocument;
pub use engine::{close, detect_conflicts, Conflict, Derivation};
pub use graph::{Document, Entity, EntityId, Graph, Triple, TripleKey, TripleStatus};
pub use kb::{RelId, RuleKb, RuleKind};

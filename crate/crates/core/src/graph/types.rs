use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::kb::{RelId, RuleKind};

/// A narrative document. All mention offsets count Unicode scalar values in `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            title: None,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring by char offsets. Returns `None` when out of bounds.
    pub fn slice(&self, span: MentionSpan) -> Option<String> {
        if span.end > self.char_len() {
            return None;
        }
        Some(
            self.text
                .chars()
                .skip(span.start)
                .take(span.end - span.start)
                .collect(),
        )
    }
}

/// Half-open `[start, end)` char range; serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Result<Self, GraphError> {
        if start < end {
            Ok(MentionSpan { start, end })
        } else {
            Err(GraphError::InvalidSpan { start, end })
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

impl TryFrom<[usize; 2]> for MentionSpan {
    type Error = GraphError;
    fn try_from([start, end]: [usize; 2]) -> Result<Self, Self::Error> {
        MentionSpan::new(start, end)
    }
}

impl From<MentionSpan> for [usize; 2] {
    fn from(s: MentionSpan) -> Self {
        [s.start, s.end]
    }
}

/// Opaque entity token, `[A-Za-z0-9_.-]+`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, GraphError> {
        let id = id.into();
        let ok = !id.is_empty()
            && id
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'));
        if ok {
            Ok(EntityId(id))
        } else {
            Err(GraphError::InvalidEntityId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EntityId {
    type Error = GraphError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        EntityId::new(value)
    }
}

impl From<EntityId> for String {
    fn from(value: EntityId) -> Self {
        value.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityStatus {
    Suggested,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub canonical: String,
    /// Always contains `canonical`.
    pub aliases: std::collections::BTreeSet<String>,
    pub mentions: Vec<MentionSpan>,
    pub status: EntityStatus,
}

/// Triple status. Variant order is the collapse precedence:
/// `rejected < suggested < conflicted < confirmed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleStatus {
    Rejected,
    Suggested,
    Conflicted,
    Confirmed,
}

impl TripleStatus {
    /// Statuses that take part in closure and conflict detection.
    pub fn participates(self) -> bool {
        matches!(self, TripleStatus::Suggested | TripleStatus::Confirmed)
    }
}

/// The directed `(src, rel, dst)` identity of a triple, written `src:rel:dst`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey {
    pub src: EntityId,
    pub rel: RelId,
    pub dst: EntityId,
}

impl TripleKey {
    pub fn new(src: EntityId, rel: RelId, dst: EntityId) -> Self {
        TripleKey { src, rel, dst }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }

    pub fn touches(&self, e: &EntityId) -> bool {
        &self.src == e || &self.dst == e
    }
}

impl fmt::Display for TripleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.src, self.rel, self.dst)
    }
}

impl FromStr for TripleKey {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::InvalidTripleKey(s.to_string());
        let mut parts = s.split(':');
        let (Some(src), Some(rel), Some(dst), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        Ok(TripleKey {
            src: EntityId::new(src).map_err(|_| bad())?,
            rel: RelId::new(rel).map_err(|_| bad())?,
            dst: EntityId::new(dst).map_err(|_| bad())?,
        })
    }
}

impl Serialize for TripleKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TripleKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Extracted {
        votes: u32,
    },
    Inferred {
        rule: RuleKind,
        premises: Vec<TripleKey>,
    },
    Manual,
}

impl Provenance {
    /// `manual > extracted > inferred`
    pub fn rank(&self) -> u8 {
        match self {
            Provenance::Inferred { .. } => 0,
            Provenance::Extracted { .. } => 1,
            Provenance::Manual => 2,
        }
    }

    pub fn premises(&self) -> &[TripleKey] {
        match self {
            Provenance::Inferred { premises, .. } => premises,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub key: TripleKey,
    pub status: TripleStatus,
    pub provenance: Provenance,
}

/// Match pattern for [`super::Graph::query`]; `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriplePattern {
    #[serde(default)]
    pub src: Option<EntityId>,
    #[serde(default)]
    pub rel: Option<RelId>,
    #[serde(default)]
    pub dst: Option<EntityId>,
    #[serde(default)]
    pub status: Option<TripleStatus>,
}

impl TriplePattern {
    pub fn matches(&self, t: &Triple) -> bool {
        self.src.as_ref().is_none_or(|s| *s == t.key.src)
            && self.rel.as_ref().is_none_or(|r| *r == t.key.rel)
            && self.dst.as_ref().is_none_or(|d| *d == t.key.dst)
            && self.status.is_none_or(|s| s == t.status)
    }
}

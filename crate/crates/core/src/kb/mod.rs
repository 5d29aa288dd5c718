//! Relation-type inventory and the editable rule knowledge base.
//!
//! A [`RuleKb`] is an immutable snapshot. Edits go through [`RuleKb::edit`],
//! which validates the candidate KB and either returns a new snapshot with a
//! bumped version or rejects the change and leaves the original untouched.

mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{load_kb, save_kb};
pub use validate::{validate_kb, Diagnostic, Severity};

const STARTER_KB: &str = include_str!("../../resources/starter.kb");

/// Relation type id: a lowercase `[a-z0-9_]+` token such as `father_of`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RelId(String);

impl RelId {
    pub fn new(id: impl Into<String>) -> Result<Self, KbError> {
        let id = id.into();
        if is_valid_rel_id(&id) {
            Ok(RelId(id))
        } else {
            Err(KbError::InvalidRelationId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn is_valid_rel_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl TryFrom<String> for RelId {
    type Error = KbError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        RelId::new(value)
    }
}

impl From<RelId> for String {
    fn from(value: RelId) -> Self {
        value.0
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for RelId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationType {
    pub id: RelId,
    pub display: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl RelationType {
    /// A relation whose display label is derived from its id (`father_of` → `father of`).
    pub fn new(id: RelId) -> Self {
        let display = id.as_str().replace('_', " ");
        RelationType {
            id,
            display,
            notes: String::new(),
        }
    }
}

/// The seven rule kinds. Variant order is the kind order used for sorting.
///
/// `Inversion`, `Incompatible` and `Asymmetric` are logically symmetric in
/// their two arguments, so constructors store them with arguments sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    /// `r(x,y) ⟹ r(y,x)`
    Symmetry(RelId),
    /// `r1(x,y) ⟹ r2(y,x)` and `r2(x,y) ⟹ r1(y,x)`
    Inversion(RelId, RelId),
    /// `r1(x,y) ∧ r2(y,z) ⟹ r3(x,z)`
    Composition(RelId, RelId, RelId),
    /// `sub(x,y) ⟹ super(x,y)`
    Hierarchy { sub: RelId, sup: RelId },
    /// `r1(x,y) ⟹ ¬r2(x,y)`
    Incompatible(RelId, RelId),
    /// `r1(x,y) ⟹ ¬r2(y,x)`
    Asymmetric(RelId, RelId),
    /// `r(x,y) ⟹ ∀z≠y. ¬r(x,z)`
    Exclusive(RelId),
}

fn sorted_pair(a: RelId, b: RelId) -> (RelId, RelId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl RuleKind {
    pub fn symmetry(r: RelId) -> Self {
        RuleKind::Symmetry(r)
    }
    pub fn inversion(a: RelId, b: RelId) -> Self {
        let (a, b) = sorted_pair(a, b);
        RuleKind::Inversion(a, b)
    }
    pub fn composition(a: RelId, b: RelId, out: RelId) -> Self {
        RuleKind::Composition(a, b, out)
    }
    pub fn hierarchy(sub: RelId, sup: RelId) -> Self {
        RuleKind::Hierarchy { sub, sup }
    }
    pub fn incompatible(a: RelId, b: RelId) -> Self {
        let (a, b) = sorted_pair(a, b);
        RuleKind::Incompatible(a, b)
    }
    pub fn asymmetric(a: RelId, b: RelId) -> Self {
        let (a, b) = sorted_pair(a, b);
        RuleKind::Asymmetric(a, b)
    }
    pub fn exclusive(r: RelId) -> Self {
        RuleKind::Exclusive(r)
    }

    /// Re-sorts the arguments of the symmetric binary kinds.
    pub fn canonical(self) -> Self {
        match self {
            RuleKind::Inversion(a, b) => RuleKind::inversion(a, b),
            RuleKind::Incompatible(a, b) => RuleKind::incompatible(a, b),
            RuleKind::Asymmetric(a, b) => RuleKind::asymmetric(a, b),
            other => other,
        }
    }

    /// Relation ids in argument order.
    pub fn args(&self) -> Vec<&RelId> {
        match self {
            RuleKind::Symmetry(r) | RuleKind::Exclusive(r) => vec![r],
            RuleKind::Inversion(a, b)
            | RuleKind::Incompatible(a, b)
            | RuleKind::Asymmetric(a, b) => vec![a, b],
            RuleKind::Composition(a, b, c) => vec![a, b, c],
            RuleKind::Hierarchy { sub, sup } => vec![sub, sup],
        }
    }

    pub fn mentions(&self, r: &RelId) -> bool {
        self.args().into_iter().any(|a| a == r)
    }

    /// Completion rules add triples; the rest only detect conflicts.
    pub fn is_completion(&self) -> bool {
        matches!(
            self,
            RuleKind::Symmetry(_)
                | RuleKind::Inversion(..)
                | RuleKind::Composition(..)
                | RuleKind::Hierarchy { .. }
        )
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            RuleKind::Symmetry(_) => "symmetric",
            RuleKind::Inversion(..) => "inverse",
            RuleKind::Composition(..) => "compose",
            RuleKind::Hierarchy { .. } => "subtype",
            RuleKind::Incompatible(..) => "incompatible",
            RuleKind::Asymmetric(..) => "asymmetric",
            RuleKind::Exclusive(_) => "exclusive",
        }
    }
}

/// Renders as a KB directive line, e.g. `compose parent_of parent_of grandparent_of`.
impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())?;
        for a in self.args() {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for RuleKind {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse::parse_rule_directive(s).map_err(|message| KbError::Parse { line: 1, message })
    }
}

impl Serialize for RuleKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RuleKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleOrigin {
    Builtin,
    User,
}

/// A rule together with where it came from. Identity is the kind alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    pub origin: RuleOrigin,
}

impl Rule {
    pub fn user(kind: RuleKind) -> Self {
        Rule {
            kind: kind.canonical(),
            origin: RuleOrigin::User,
        }
    }
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Rule {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid relation id {0:?}: expected [a-z0-9_]+")]
    InvalidRelationId(String),
    #[error("unknown relation id {0:?}")]
    UnknownRelation(String),
    #[error("duplicate relation {0:?}")]
    DuplicateRelation(String),
    #[error("duplicate rule `{0}`")]
    DuplicateRule(String),
    #[error("rule `{0}` is not in the knowledge base")]
    UnknownRule(String),
    #[error("edit rejected: {}", .0.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// A single change to a [`RuleKb`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum KbEdit {
    AddRelation { relation: RelationType },
    RemoveRelation { id: RelId },
    AddRule { rule: RuleKind },
    RemoveRule { rule: RuleKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleKb {
    relations: BTreeMap<RelId, RelationType>,
    rules: BTreeMap<RuleKind, RuleOrigin>,
    version: u64,
}

impl RuleKb {
    pub fn empty() -> Self {
        RuleKb::default()
    }

    /// The bundled kinship/social starter KB. Its rules are tagged `builtin`.
    pub fn starter() -> Self {
        let mut kb = load_kb(STARTER_KB).expect("bundled starter KB parses");
        for origin in kb.rules.values_mut() {
            *origin = RuleOrigin::Builtin;
        }
        kb
    }

    pub fn starter_text() -> &'static str {
        STARTER_KB
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Used when a KB replaces another one and must keep the version monotone.
    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationType> {
        self.relations.values()
    }

    pub fn relation(&self, id: &str) -> Option<&RelationType> {
        self.relations.get(id)
    }

    pub fn has_relation(&self, id: &str) -> bool {
        self.relations.contains_key(id)
    }

    /// Rules in deterministic (kind, arguments) order.
    pub fn rules(&self) -> impl Iterator<Item = Rule> + '_ {
        self.rules.iter().map(|(kind, origin)| Rule {
            kind: kind.clone(),
            origin: *origin,
        })
    }

    pub fn rule_kinds(&self) -> impl Iterator<Item = &RuleKind> {
        self.rules.keys()
    }

    pub fn contains_rule(&self, kind: &RuleKind) -> bool {
        self.rules.contains_key(&kind.clone().canonical())
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Every rule that mentions `r` in any argument position.
    pub fn rules_about(&self, r: &str) -> Result<Vec<Rule>, KbError> {
        let id = self
            .relations
            .get_key_value(r)
            .map(|(k, _)| k)
            .ok_or_else(|| KbError::UnknownRelation(r.to_string()))?;
        Ok(self
            .rules
            .iter()
            .filter(|(kind, _)| kind.mentions(id))
            .map(|(kind, origin)| Rule {
                kind: kind.clone(),
                origin: *origin,
            })
            .collect())
    }

    /// Whether `sub` reaches `sup` through one or more `subtype` edges.
    pub fn is_subtype_of(&self, sub: &RelId, sup: &RelId) -> bool {
        let mut stack = vec![sub];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            for kind in self.rules.keys() {
                if let RuleKind::Hierarchy { sub: s, sup: p } = kind {
                    if s == cur {
                        if p == sup {
                            return true;
                        }
                        if seen.insert(p) {
                            stack.push(p);
                        }
                    }
                }
            }
        }
        false
    }

    pub(crate) fn insert_relation(&mut self, rel: RelationType) -> Result<(), KbError> {
        if self.relations.contains_key(&rel.id) {
            return Err(KbError::DuplicateRelation(rel.id.to_string()));
        }
        self.relations.insert(rel.id.clone(), rel);
        Ok(())
    }

    pub(crate) fn insert_rule(&mut self, rule: Rule) -> Result<(), KbError> {
        let kind = rule.kind.canonical();
        for a in kind.args() {
            if !self.relations.contains_key(a) {
                return Err(KbError::UnknownRelation(a.to_string()));
            }
        }
        if self.rules.contains_key(&kind) {
            return Err(KbError::DuplicateRule(kind.to_string()));
        }
        self.rules.insert(kind, rule.origin);
        Ok(())
    }

    /// Applies one change. Rejected changes leave `self` untouched.
    pub fn edit(&self, change: KbEdit) -> Result<RuleKb, KbError> {
        let mut next = self.clone();
        match change {
            KbEdit::AddRelation { relation } => next.insert_relation(relation)?,
            KbEdit::RemoveRelation { id } => {
                if next.relations.remove(&id).is_none() {
                    return Err(KbError::UnknownRelation(id.to_string()));
                }
                next.rules.retain(|kind, _| !kind.mentions(&id));
            }
            KbEdit::AddRule { rule } => next.insert_rule(Rule::user(rule))?,
            KbEdit::RemoveRule { rule } => {
                let kind = rule.canonical();
                if next.rules.remove(&kind).is_none() {
                    return Err(KbError::UnknownRule(kind.to_string()));
                }
            }
        }
        let errors: Vec<Diagnostic> = validate_kb(&next)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if !errors.is_empty() {
            return Err(KbError::Invalid(errors));
        }
        next.version = self.version + 1;
        Ok(next)
    }

    /// Set equality of relations and rules, ignoring version and origin.
    pub fn same_content(&self, other: &RuleKb) -> bool {
        self.relations == other.relations && self.rules.keys().eq(other.rules.keys())
    }
}

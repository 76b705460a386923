use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::fl::{canonical_text, StatementGraph, Term};

/// Author of every auto-created term and of the root.
pub const SYSTEM_USER: &str = "kb";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(name: impl Into<String>) -> Self {
        UserId(name.into())
    }

    pub fn system() -> Self {
        UserId(SYSTEM_USER.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.into())
    }
}

/// Milliseconds since the Unix epoch, or a logical tick in tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    TermObject,
    StatementObject,
}

impl ObjectKind {
    fn tag(self) -> &'static str {
        match self {
            ObjectKind::TermObject => "term",
            ObjectKind::StatementObject => "statement",
        }
    }
}

/// Content hash of kind, canonical text and author: 16 bytes, printed as
/// 32 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId([u8; 16]);

impl ObjectId {
    pub fn compute(kind: ObjectKind, canonical: &str, author: &UserId) -> Self {
        let mut h = Sha256::new();
        h.update(kind.tag().as_bytes());
        h.update([0]);
        h.update(canonical.as_bytes());
        h.update([0]);
        h.update(author.0.as_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        ObjectId(out)
    }

    pub fn for_term(t: &Term) -> Self {
        ObjectId::compute(ObjectKind::TermObject, &t.to_string(), &term_author(t))
    }

    pub fn for_statement(g: &StatementGraph, author: &UserId) -> Self {
        ObjectId::compute(ObjectKind::StatementObject, &canonical_text(g), author)
    }

    pub fn root() -> Self {
        ObjectId::for_term(&Term::thing())
    }

    pub fn bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// Creator of a term: its source prefix, or the system for built-ins.
pub fn term_author(t: &Term) -> UserId {
    if t.source.is_empty() {
        UserId::system()
    } else {
        UserId(t.source.clone())
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObjectId({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed object id {0:?}")]
pub struct IdParseError(pub String);

impl FromStr for ObjectId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(IdParseError(s.into()));
        }
        let bytes = hex::decode(s).map_err(|_| IdParseError(s.into()))?;
        let mut out = [0u8; 16];
        out.copy_from_slice(&bytes);
        Ok(ObjectId(out))
    }
}

impl Serialize for ObjectId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Term(Term),
    Statement(StatementGraph),
}

impl Payload {
    pub fn kind(&self) -> ObjectKind {
        match self {
            Payload::Term(_) => ObjectKind::TermObject,
            Payload::Statement(_) => ObjectKind::StatementObject,
        }
    }

    /// Canonical text: the term itself or the canonical statement.
    pub fn text(&self) -> String {
        match self {
            Payload::Term(t) => t.to_string(),
            Payload::Statement(g) => canonical_text(g),
        }
    }

    pub fn statement(&self) -> Option<&StatementGraph> {
        match self {
            Payload::Statement(g) => Some(g),
            Payload::Term(_) => None,
        }
    }

    pub fn term(&self) -> Option<&Term> {
        match self {
            Payload::Term(t) => Some(t),
            Payload::Statement(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub payload: Payload,
    /// Current owner. Differs from `creator` after a clone.
    pub author: UserId,
    pub creator: UserId,
    pub created_at: Timestamp,
    pub direct_generalizations: BTreeSet<ObjectId>,
    pub direct_specializations: BTreeSet<ObjectId>,
    pub tombstoned: bool,
}

impl KbObject {
    pub fn is_live(&self) -> bool {
        !self.tombstoned
    }
}

/// Where an object sits in the hierarchy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub direct_generalizations: BTreeSet<ObjectId>,
    pub direct_specializations: BTreeSet<ObjectId>,
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fl::Term;

use super::object::{ObjectId, Timestamp, UserId};

/// Typed relation from one object to another object or to a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Correction,
    CorrectivePrecision,
    CorrectiveGeneralization,
    RestrictiveCorrection,
    Objection,
    Argument,
    /// `specialization_or_equivalent_object`: the source is the formal
    /// counterpart of an informal target.
    Specialization,
}

/// Which side ends up more specific when a link implies a placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SourceBelowTarget,
    TargetBelowSource,
}

impl LinkKind {
    pub const ALL: [LinkKind; 7] = [
        LinkKind::Correction,
        LinkKind::CorrectivePrecision,
        LinkKind::CorrectiveGeneralization,
        LinkKind::RestrictiveCorrection,
        LinkKind::Objection,
        LinkKind::Argument,
        LinkKind::Specialization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Correction => "correction",
            LinkKind::CorrectivePrecision => "corrective_precision",
            LinkKind::CorrectiveGeneralization => "corrective_generalization",
            LinkKind::RestrictiveCorrection => "restrictive_correction",
            LinkKind::Objection => "objection",
            LinkKind::Argument => "argument",
            LinkKind::Specialization => "specialization_or_equivalent_object",
        }
    }

    /// Link kind named by a relation term, whatever its creator.
    pub fn from_relation(t: &Term) -> Option<Self> {
        if !t.is_formal() {
            return None;
        }
        Self::ALL.into_iter().find(|k| k.name() == t.name)
    }

    /// Kinds that dispute or correct the target, as opposed to supporting it.
    pub fn is_disagreement(self) -> bool {
        matches!(
            self,
            LinkKind::Correction
                | LinkKind::CorrectivePrecision
                | LinkKind::CorrectiveGeneralization
                | LinkKind::RestrictiveCorrection
                | LinkKind::Objection
        )
    }

    pub fn placement(self) -> Option<Direction> {
        match self {
            LinkKind::CorrectivePrecision | LinkKind::RestrictiveCorrection | LinkKind::Specialization => {
                Some(Direction::SourceBelowTarget)
            }
            LinkKind::CorrectiveGeneralization => Some(Direction::TargetBelowSource),
            _ => None,
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown link kind {0:?}")]
pub struct LinkKindParseError(pub String);

impl FromStr for LinkKind {
    type Err = LinkKindParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LinkKindParseError(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u64);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

impl FromStr for LinkId {
    type Err = LinkKindParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('l')
            .and_then(|n| n.parse().ok())
            .map(LinkId)
            .ok_or_else(|| LinkKindParseError(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTarget {
    Object(ObjectId),
    /// Objection or argument about the relevance of a link itself.
    Link(LinkId),
}

impl fmt::Display for LinkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkTarget::Object(id) => write!(f, "{id}"),
            LinkTarget::Link(id) => write!(f, "{id}"),
        }
    }
}

/// Non-link meta information attached to a link (`__[ rel: obj ]`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Annotation {
    pub relation: Term,
    pub object: ObjectId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: LinkId,
    pub kind: LinkKind,
    pub source: ObjectId,
    pub target: LinkTarget,
    pub author: UserId,
    pub created_at: Timestamp,
    pub annotations: Vec<Annotation>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_from_names_and_relations() {
        for k in LinkKind::ALL {
            assert_eq!(k.name().parse::<LinkKind>().unwrap(), k);
            assert_eq!(LinkKind::from_relation(&Term::formal("q", k.name())), Some(k));
        }
        assert_eq!(LinkKind::from_relation(&Term::formal("p", "part")), None);
        assert_eq!(LinkKind::from_relation(&Term::informal("objection")), None);
    }

    #[test]
    fn placements() {
        assert_eq!(
            LinkKind::CorrectivePrecision.placement(),
            Some(Direction::SourceBelowTarget)
        );
        assert_eq!(
            LinkKind::CorrectiveGeneralization.placement(),
            Some(Direction::TargetBelowSource)
        );
        assert_eq!(LinkKind::Objection.placement(), None);
        assert!(LinkKind::Objection.is_disagreement());
        assert!(!LinkKind::Argument.is_disagreement());
    }

    #[test]
    fn link_ids_round_trip() {
        assert_eq!("l42".parse::<LinkId>().unwrap(), LinkId(42));
        assert_eq!(LinkId(7).to_string(), "l7");
        assert!("42".parse::<LinkId>().is_err());
    }
}

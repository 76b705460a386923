use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    FolExport,
    PlainTriples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Construct {
    /// Statement about a statement or about a relation.
    MetaStatement,
    AtLeastPercent,
    /// Numeric cardinality other than plain existence.
    Cardinality,
    Possibility,
    /// Statement wrapped with contextualizing relations (place, time, ...).
    Context,
    Universal,
    Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Capability {
    Expressible,
    RequiresReification(BTreeSet<Construct>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCapability {
    pub target: Target,
    pub capability: Capability,
}

/// Constructs used anywhere in the statement.
pub fn constructs(g: &StatementGraph) -> BTreeSet<Construct> {
    let mut out = BTreeSet::new();
    scan_node(&g.root, &mut out);
    out
}

fn scan_node(n: &ConceptNode, out: &mut BTreeSet<Construct>) {
    match n.quantifier {
        Some(Quantifier::Universal) => {
            out.insert(Construct::Universal);
        }
        Some(Quantifier::AtLeastPercent(_)) => {
            out.insert(Construct::AtLeastPercent);
        }
        Some(Quantifier::Cardinality { .. }) => {
            out.insert(Construct::Cardinality);
        }
        _ => {}
    }
    match &n.head {
        NodeHead::Statement(g) => {
            if !n.attachments.is_empty() {
                out.insert(Construct::Context);
            }
            scan_node(&g.root, out);
        }
        NodeHead::Rule {
            premise,
            conclusion,
            ..
        } => {
            out.insert(Construct::Rule);
            scan_node(&premise.root, out);
            scan_node(&conclusion.root, out);
        }
        _ => {}
    }
    for e in &n.attachments {
        scan_edge(e, out);
    }
}

fn scan_edge(e: &RelationEdge, out: &mut BTreeSet<Construct>) {
    if e.modality == Modality::Possibility {
        out.insert(Construct::Possibility);
    }
    if !e.meta.is_empty() || matches!(e.destination.head, NodeHead::Statement(_)) {
        out.insert(Construct::MetaStatement);
    }
    scan_node(&e.destination, out);
    for m in &e.meta {
        scan_edge(m, out);
    }
}

pub fn expressiveness_report(g: &StatementGraph) -> Vec<TargetCapability> {
    let used = constructs(g);
    [Target::FolExport, Target::PlainTriples]
        .into_iter()
        .map(|target| {
            let offending: BTreeSet<Construct> = used
                .iter()
                .copied()
                .filter(|c| target == Target::PlainTriples || *c != Construct::Universal)
                .collect();
            let capability = if offending.is_empty() {
                Capability::Expressible
            } else {
                Capability::RequiresReification(offending)
            };
            TargetCapability { target, capability }
        })
        .collect()
}

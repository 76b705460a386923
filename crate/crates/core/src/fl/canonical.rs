//! Canonical form: attachments sorted by relation then destination, variables
//! renamed in order of first occurrence. Two graphs are canonically equal iff
//! their canonical texts are equal.

use std::collections::HashMap;

use super::ast::*;
use super::printer::{print, Printer};

pub fn canonicalize(g: &StatementGraph) -> StatementGraph {
    let mut root = g.root.clone();
    sort_node(&mut root);
    let mut names = HashMap::new();
    rename_node(&mut root, &mut names);
    StatementGraph::new(root)
}

pub fn canonical_text(g: &StatementGraph) -> String {
    print(&canonicalize(g))
}

pub fn canonically_equal(a: &StatementGraph, b: &StatementGraph) -> bool {
    canonical_text(a) == canonical_text(b)
}

fn edge_key(e: &RelationEdge) -> (String, String) {
    let p = Printer { mask_vars: true };
    let mut dest = p.node(&e.destination);
    dest.push_str(&format!("|{:?}|{}", e.modality, e.inverse));
    for m in &e.meta {
        dest.push('|');
        dest.push_str(&edge_key(m).0);
        dest.push_str(&edge_key(m).1);
    }
    (e.relation.to_string(), dest)
}

fn sort_edges(edges: &mut [RelationEdge]) {
    for e in edges.iter_mut() {
        sort_node(&mut e.destination);
        sort_edges(&mut e.meta);
    }
    edges.sort_by_cached_key(edge_key);
}

fn sort_node(n: &mut ConceptNode) {
    match &mut n.head {
        NodeHead::Statement(g) => sort_node(&mut g.root),
        NodeHead::Rule {
            premise,
            conclusion,
            ..
        } => {
            sort_node(&mut premise.root);
            sort_node(&mut conclusion.root);
        }
        _ => {}
    }
    sort_edges(&mut n.attachments);
}

fn rename(v: &mut Option<String>, names: &mut HashMap<String, String>) {
    if let Some(name) = v {
        let next = format!("v{}", names.len() + 1);
        let fresh = names.entry(name.clone()).or_insert(next).clone();
        *name = fresh;
    }
}

// Same traversal order as the printer: head, variable, then edges with meta.
fn rename_node(n: &mut ConceptNode, names: &mut HashMap<String, String>) {
    if n.is_bare_variable() {
        rename(&mut n.variable, names);
    } else {
        match &mut n.head {
            NodeHead::Statement(g) => rename_node(&mut g.root, names),
            NodeHead::Rule {
                premise,
                conclusion,
                ..
            } => {
                rename_node(&mut premise.root, names);
                rename_node(&mut conclusion.root, names);
            }
            _ => {}
        }
        rename(&mut n.variable, names);
    }
    for e in n.attachments.iter_mut() {
        rename_edge(e, names);
    }
}

fn rename_edge(e: &mut RelationEdge, names: &mut HashMap<String, String>) {
    rename_node(&mut e.destination, names);
    for m in e.meta.iter_mut() {
        rename_edge(m, names);
    }
}

//! Canonical frame-form printer. Output always reparses to a graph that is
//! canonically equal to the input.

use std::fmt::Write;

use super::ast::*;
use super::parser::ATTRIBUTE;

/// Prints a statement in frame form, terminated by `;`.
pub fn print(g: &StatementGraph) -> String {
    let mut out = Printer::default().node(&g.root);
    out.push(';');
    out
}

/// Prints a single node without the statement terminator.
pub fn print_node(node: &ConceptNode) -> String {
    Printer::default().node(node)
}

#[derive(Default)]
pub(crate) struct Printer {
    /// Print every variable as `?` (sort keys for canonicalization).
    pub mask_vars: bool,
}

fn is_inline_attribute(e: &RelationEdge) -> bool {
    e.relation == Term::builtin(ATTRIBUTE)
        && !e.inverse
        && e.modality == Modality::Plain
        && e.meta.is_empty()
        && e.destination.quantifier == Some(Quantifier::Existential)
        && e.destination.variable.is_none()
        && e.destination.attachments.is_empty()
        && matches!(&e.destination.head, NodeHead::Type(t) if t.is_formal())
}

impl Printer {
    pub fn node(&self, n: &ConceptNode) -> String {
        let mut s = String::new();
        self.write_node(&mut s, n);
        s
    }

    fn var(&self, s: &mut String, v: &str) {
        s.push('?');
        if !self.mask_vars {
            s.push_str(v);
        }
    }

    fn write_node(&self, s: &mut String, n: &ConceptNode) {
        if n.is_bare_variable() {
            self.var(s, n.variable.as_deref().unwrap_or_default());
        } else {
            if let Some(q) = &n.quantifier {
                write_quantifier(s, q);
                s.push(' ');
            }
            let inline_attrs = n.quantifier.is_some() && matches!(n.head, NodeHead::Type(_));
            if inline_attrs {
                for e in n.attachments.iter().filter(|e| is_inline_attribute(e)) {
                    if let NodeHead::Type(t) = &e.destination.head {
                        let _ = write!(s, "{t} ");
                    }
                }
            }
            self.write_head(s, &n.head);
            if let Some(v) = &n.variable {
                s.push(' ');
                self.var(s, v);
            }
        }
        let inline_attrs = n.quantifier.is_some() && matches!(n.head, NodeHead::Type(_));
        let edges: Vec<&RelationEdge> = n
            .attachments
            .iter()
            .filter(|e| !(inline_attrs && is_inline_attribute(e)))
            .collect();
        for (i, e) in edges.iter().enumerate() {
            s.push_str(if i == 0 { " " } else { ", " });
            self.write_edge(s, e);
        }
    }

    fn write_head(&self, s: &mut String, head: &NodeHead) {
        match head {
            NodeHead::Type(t) => {
                let _ = write!(s, "{t}");
            }
            NodeHead::Literal(l) => {
                let _ = write!(s, "{l}");
            }
            NodeHead::Statement(g) => {
                s.push('`');
                self.write_node(s, &g.root);
                s.push('`');
            }
            NodeHead::Rule {
                source,
                premise,
                conclusion,
            } => {
                if !source.is_empty() {
                    let _ = write!(s, "{source}# ");
                }
                s.push_str("if `");
                self.write_node(s, &premise.root);
                s.push_str("` then `");
                self.write_node(s, &conclusion.root);
                s.push('`');
            }
        }
    }

    fn write_edge(&self, s: &mut String, e: &RelationEdge) {
        let rel = e.relation.to_string();
        match (e.modality, e.inverse) {
            (Modality::Plain, false) => {
                let _ = write!(s, "{rel}: ");
            }
            (Modality::Plain, true) => {
                let _ = write!(s, "{rel} of ");
            }
            (Modality::Possibility, true) => {
                let _ = write!(s, "can be {rel} of ");
            }
            (Modality::Possibility, false) => {
                let _ = write!(s, "can have for {rel} ");
            }
        }
        self.write_dest(s, &e.destination);
        if !e.meta.is_empty() {
            s.push_str(" __[");
            for (i, m) in e.meta.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push(' ');
                self.write_edge(s, m);
            }
            s.push_str(" ]");
        }
    }

    fn write_dest(&self, s: &mut String, d: &ConceptNode) {
        let inline_attrs = d.quantifier.is_some() && matches!(d.head, NodeHead::Type(_));
        let needs_parens = d
            .attachments
            .iter()
            .any(|e| !(inline_attrs && is_inline_attribute(e)))
            || (d.quantifier.is_none() && matches!(&d.head, NodeHead::Type(t) if !t.is_formal() && t.source.is_empty()));
        if needs_parens {
            s.push('(');
            self.write_node(s, d);
            s.push(')');
        } else {
            self.write_node(s, d);
        }
    }
}

pub(crate) fn write_quantifier(s: &mut String, q: &Quantifier) {
    let _ = match *q {
        Quantifier::Existential => write!(s, "a"),
        Quantifier::Universal => write!(s, "every"),
        Quantifier::AtLeastPercent(h) => {
            if h % 100 == 0 {
                write!(s, "at least {}% of", h / 100)
            } else {
                let frac = format!("{:02}", h % 100);
                write!(s, "at least {}.{}% of", h / 100, frac.trim_end_matches('0'))
            }
        }
        Quantifier::Cardinality { min, max } => match max {
            Some(max) if max == min => write!(s, "{min}"),
            Some(max) if min == 0 => write!(s, "at most {max}"),
            Some(max) => write!(s, "{min}..{max}"),
            None if min == 0 => write!(s, "0..*"),
            None => write!(s, "at least {min}"),
        },
    };
}

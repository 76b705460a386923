//! Structural subsumption between statement graphs.
//!
//! A statement is read as a constraint on its root: `a T C` says some T
//! satisfies C, `every T C` says all T do. Edge constraints count related
//! individuals: `r: a D` is "at least one r-successor that is a D",
//! `r: 0..2 D` bounds that count. Entailment between constraint sets is
//! decided edge by edge: the count of the general edge is bounded below by
//! specific edges whose destinations are more specific, and above by
//! specific edges whose destinations are more general.

use crate::fl::{canonical_text, canonically_equal, ConceptNode, Modality, NodeHead, Quantifier, RelationEdge, StatementGraph, Term, ATTRIBUTE};

use super::ontology::Ontology;

/// True when every model of `specific` is a model of `general`.
pub fn subsumes(general: &StatementGraph, specific: &StatementGraph, onto: &Ontology) -> bool {
    let (g, s) = (&general.root, &specific.root);
    if is_top(g) {
        return true;
    }
    if general.is_informal_root() || specific.is_informal_root() {
        return canonically_equal(general, specific);
    }
    let m = Matcher { onto };
    match (g.quantifier, s.quantifier) {
        (None, None) => m.head_le(&g.head, &s.head) && m.edges_entail(&g.attachments, &s.attachments),
        (Some(Quantifier::Existential), Some(Quantifier::Existential)) => {
            if m.unsat(s) {
                return true;
            }
            if m.head_le(&g.head, &s.head) && m.edges_entail(&g.attachments, &s.attachments) {
                return true;
            }
            // a forced neighbour of the specific root can witness an
            // unconstrained general statement
            tautological(&g.attachments)
                && g.variable.is_none()
                && s.attachments.iter().any(|e| {
                    e.modality == Modality::Plain
                        && count_interval(e.destination.quantifier).is_some_and(|(lo, _)| lo >= 1)
                        && e.destination.attachments.is_empty()
                        && m.head_le(&g.head, &e.destination.head)
                })
        }
        (Some(Quantifier::Universal), Some(Quantifier::Universal)) => {
            if tautological(&g.attachments) {
                return true;
            }
            let s_unsat = m.unsat(s);
            if m.head_le(&s.head, &g.head) && (s_unsat || m.edges_entail(&g.attachments, &s.attachments)) {
                return true;
            }
            // an unsatisfiable universal empties its type: general edges
            // that only ask for zero of those are met
            s_unsat
                && g.attachments.iter().all(|e| {
                    is_tautological_edge(e)
                        || (e.modality == Modality::Plain
                            && count_interval(e.destination.quantifier).is_some_and(|(lo, _)| lo == 0)
                            && e.destination.attachments.is_empty()
                            && m.head_le(&s.head, &e.destination.head))
                })
        }
        (Some(Quantifier::Universal), Some(Quantifier::Existential)) => {
            tautological(&g.attachments) || m.unsat(s)
        }
        (Some(Quantifier::AtLeastPercent(pg)), Some(Quantifier::AtLeastPercent(ps))) => {
            ps >= pg
                && g.head == s.head
                && attributes(g) == attributes(s)
                && m.edges_entail(&g.attachments, &s.attachments)
        }
        (Some(Quantifier::Cardinality { min: ga, max: gb }), Some(Quantifier::Cardinality { min: sa, max: sb })) => {
            sa >= ga
                && upper_le(sb, gb)
                && g.head == s.head
                && sorted_edge_texts(g) == sorted_edge_texts(s)
        }
        _ => false,
    }
}

/// Subsumption in both directions.
pub fn equivalent(a: &StatementGraph, b: &StatementGraph, onto: &Ontology) -> bool {
    subsumes(a, b, onto) && subsumes(b, a, onto)
}

/// True when the root's own constraints cannot be met by any individual.
pub fn unsatisfiable(g: &StatementGraph, onto: &Ontology) -> bool {
    Matcher { onto }.unsat(&g.root)
}

/// True when `a` and `b` cannot both hold: a universal statement imposes
/// constraints on the root of the other that contradict its own.
pub fn conflicting(a: &StatementGraph, b: &StatementGraph, onto: &Ontology) -> bool {
    let m = Matcher { onto };
    for (x, y) in [(&a.root, &b.root), (&b.root, &a.root)] {
        if x.quantifier != Some(Quantifier::Universal) {
            continue;
        }
        if !matches!(y.quantifier, Some(Quantifier::Universal | Quantifier::Existential)) {
            continue;
        }
        let (NodeHead::Type(tx), NodeHead::Type(ty)) = (&x.head, &y.head) else {
            continue;
        };
        if !tx.is_formal() || !ty.is_formal() || !onto.is_subtype(ty, tx) {
            continue;
        }
        if m.unsat(x) || m.unsat(y) {
            continue;
        }
        let mut merged = y.clone();
        merged.attachments.extend(x.attachments.iter().cloned());
        if m.unsat(&merged) {
            return true;
        }
    }
    false
}

fn is_top(n: &ConceptNode) -> bool {
    n.quantifier.is_none()
        && n.variable.is_none()
        && n.attachments.is_empty()
        && matches!(&n.head, NodeHead::Type(t) if t.is_thing())
}

/// Counting interval of a destination quantifier. Unquantified destinations
/// (literals, constants, variables) assert one related individual.
fn count_interval(q: Option<Quantifier>) -> Option<(u32, Option<u32>)> {
    match q {
        None => Some((1, None)),
        Some(q) => q.interval(),
    }
}

fn upper_le(a: Option<u32>, b: Option<u32>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}

fn is_tautological_edge(e: &RelationEdge) -> bool {
    e.meta.is_empty() && count_interval(e.destination.quantifier) == Some((0, None))
}

fn tautological(edges: &[RelationEdge]) -> bool {
    edges.iter().all(is_tautological_edge)
}

fn is_attribute(e: &RelationEdge) -> bool {
    e.relation == Term::builtin(ATTRIBUTE)
}

fn attributes(n: &ConceptNode) -> Vec<String> {
    let mut v: Vec<String> = n
        .attachments
        .iter()
        .filter(|e| is_attribute(e))
        .map(|e| crate::fl::print_node(&e.destination))
        .collect();
    v.sort();
    v
}

fn sorted_edge_texts(n: &ConceptNode) -> String {
    let mut bare = n.clone();
    bare.quantifier = None;
    bare.variable = None;
    canonical_text(&StatementGraph::new(bare))
}

struct Matcher<'a> {
    onto: &'a Ontology,
}

impl Matcher<'_> {
    fn term_le(&self, sub: &Term, sup: &Term) -> bool {
        if sub.is_formal() && sup.is_formal() {
            self.onto.is_subtype(sub, sup)
        } else {
            sub == sup || sup.is_thing()
        }
    }

    /// The general head `g` covers the specific head `s`.
    fn head_le(&self, g: &NodeHead, s: &NodeHead) -> bool {
        match (g, s) {
            (NodeHead::Type(t), _) if t.is_thing() => true,
            (NodeHead::Type(tg), NodeHead::Type(ts)) => self.term_le(ts, tg),
            (NodeHead::Literal(a), NodeHead::Literal(b)) => a == b,
            (NodeHead::Statement(a), NodeHead::Statement(b)) => canonically_equal(a, b),
            (
                NodeHead::Rule {
                    source: sa,
                    premise: pa,
                    conclusion: ca,
                },
                NodeHead::Rule {
                    source: sb,
                    premise: pb,
                    conclusion: cb,
                },
            ) => sa == sb && canonically_equal(pa, pb) && canonically_equal(ca, cb),
            _ => false,
        }
    }

    /// Every individual described by the specific destination `s` is
    /// described by the general destination `g`.
    fn dest_le(&self, g: &ConceptNode, s: &ConceptNode) -> bool {
        if g.is_bare_variable() {
            return true;
        }
        if s.is_bare_variable() {
            return is_top(g) || (g.attachments.is_empty() && matches!(&g.head, NodeHead::Type(t) if t.is_thing()));
        }
        self.head_le(&g.head, &s.head) && self.edges_entail(&g.attachments, &s.attachments)
    }

    fn edges_entail(&self, general: &[RelationEdge], specific: &[RelationEdge]) -> bool {
        general.iter().all(|ge| self.edge_entailed(ge, specific))
    }

    fn meta_covered(&self, g: &RelationEdge, s: &RelationEdge) -> bool {
        g.meta.iter().all(|gm| {
            let want = meta_text(gm);
            s.meta.iter().any(|sm| meta_text(sm) == want)
        })
    }

    /// `s` is an instance of the general edge `g`: its related individuals
    /// all count towards `g`.
    fn lower_compatible(&self, g: &RelationEdge, s: &RelationEdge) -> bool {
        s.inverse == g.inverse
            && (g.modality == Modality::Possibility || s.modality == Modality::Plain)
            && self.term_le(&s.relation, &g.relation)
            && self.meta_covered(g, s)
            && self.dest_le(&g.destination, &s.destination)
    }

    /// Individuals counted by `g` are all counted by `s`.
    fn upper_compatible(&self, g: &RelationEdge, s: &RelationEdge) -> bool {
        s.inverse == g.inverse
            && s.modality == Modality::Plain
            && s.meta.is_empty()
            && self.term_le(&g.relation, &s.relation)
            && self.dest_le(&s.destination, &g.destination)
    }

    fn edge_entailed(&self, ge: &RelationEdge, specific: &[RelationEdge]) -> bool {
        match ge.destination.quantifier {
            Some(Quantifier::Universal) => specific.iter().any(|se| {
                se.destination.quantifier == Some(Quantifier::Universal)
                    && se.inverse == ge.inverse
                    && (ge.modality == Modality::Possibility || se.modality == Modality::Plain)
                    && self.term_le(&se.relation, &ge.relation)
                    && self.meta_covered(ge, se)
                    && self.head_le(&se.destination.head, &ge.destination.head)
                    && self.edges_entail(&se.destination.attachments, &ge.destination.attachments)
            }),
            Some(Quantifier::AtLeastPercent(pg)) => specific.iter().any(|se| {
                matches!(se.destination.quantifier, Some(Quantifier::AtLeastPercent(ps)) if ps >= pg)
                    && se.inverse == ge.inverse
                    && se.relation == ge.relation
                    && (ge.modality == Modality::Possibility || se.modality == Modality::Plain)
                    && self.meta_covered(ge, se)
                    && se.destination.head == ge.destination.head
                    && self.edges_entail(&ge.destination.attachments, &se.destination.attachments)
            }),
            q => {
                let Some((ga, gb)) = count_interval(q) else {
                    return false;
                };
                if ga == 0 && gb.is_none() && ge.meta.is_empty() {
                    return true;
                }
                let lo = specific
                    .iter()
                    .filter(|se| self.lower_compatible(ge, se))
                    .filter_map(|se| count_interval(se.destination.quantifier))
                    .map(|(a, _)| a)
                    .max()
                    .unwrap_or(0);
                if lo < ga {
                    return false;
                }
                if gb.is_none() {
                    return true;
                }
                // an upper bound on the general count needs a plain general edge
                if ge.modality != Modality::Plain {
                    return false;
                }
                let hi = specific
                    .iter()
                    .filter(|se| self.upper_compatible(ge, se))
                    .filter_map(|se| count_interval(se.destination.quantifier))
                    .filter_map(|(_, b)| b)
                    .min();
                upper_le(hi, gb)
            }
        }
    }

    /// Root-level contradiction: a count forced above a bound that covers it,
    /// or a type disjoint with one of its attributes.
    fn unsat(&self, n: &ConceptNode) -> bool {
        let counted: Vec<&RelationEdge> = n
            .attachments
            .iter()
            .filter(|e| e.modality == Modality::Plain && count_interval(e.destination.quantifier).is_some())
            .collect();
        for e1 in &counted {
            let (a1, _) = count_interval(e1.destination.quantifier).expect("filtered");
            for e2 in &counted {
                let (_, b2) = count_interval(e2.destination.quantifier).expect("filtered");
                let Some(b2) = b2 else { continue };
                if a1 > b2
                    && e1.inverse == e2.inverse
                    && e2.meta.is_empty()
                    && self.term_le(&e1.relation, &e2.relation)
                    && self.dest_le(&e2.destination, &e1.destination)
                {
                    return true;
                }
            }
        }
        let mut types: Vec<&Term> = Vec::new();
        if let NodeHead::Type(t) = &n.head {
            types.push(t);
        }
        for e in n.attachments.iter().filter(|e| is_attribute(e) && e.modality == Modality::Plain) {
            if let NodeHead::Type(t) = &e.destination.head {
                types.push(t);
            }
        }
        types
            .iter()
            .enumerate()
            .any(|(i, a)| types[i + 1..].iter().any(|b| self.onto.are_disjoint(a, b)))
    }
}

fn meta_text(e: &RelationEdge) -> String {
    let holder = ConceptNode::typed(None, Term::thing()).with_edge(e.clone());
    canonical_text(&StatementGraph::new(holder))
}

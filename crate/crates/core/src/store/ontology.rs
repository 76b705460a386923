use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::fl::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("{child} subtype of {parent} would form a cycle")]
    Cycle { child: Term, parent: Term },
    #[error("{child} cannot specialize both {a} and {b}: declared disjoint")]
    Disjoint { child: Term, a: Term, b: Term },
}

/// Optional domain and range of a relation term.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub domain: Option<Term>,
    pub range: Option<Term>,
}

/// Subtype edges, disjointness declarations and relation signatures.
/// `thing` is above every term, declared or not.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    parents: BTreeMap<Term, BTreeSet<Term>>,
    disjoint: BTreeSet<(Term, Term)>,
    signatures: BTreeMap<Term, Signature>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Small ontology covering every term used by the fixture corpus.
    pub fn bootstrap() -> Self {
        let mut o = Ontology::new();
        let p = |n: &str| Term::formal("p", n);
        let t = Term::thing();
        let edges: &[(&str, Option<&str>)] = &[
            ("physical_entity", None),
            ("animal", Some("physical_entity")),
            ("person", Some("animal")),
            ("man", Some("person")),
            ("bird", Some("animal")),
            ("body_part", Some("physical_entity")),
            ("leg", Some("body_part")),
            ("spatial_entity", None),
            ("country", Some("spatial_entity")),
            ("France", Some("country")),
            ("characteristic", None),
            ("healthy", Some("characteristic")),
            ("process", None),
            ("flight", Some("process")),
            ("task", Some("process")),
            ("information_sharing", Some("task")),
            ("information_diffusion", Some("task")),
            ("information_retrieval", Some("task")),
            ("information_validation", Some("task")),
            ("information_object", None),
            ("relation_type", None),
            ("name", Some("relation_type")),
            ("part", Some("relation_type")),
            ("agent", Some("relation_type")),
            ("believer", Some("relation_type")),
            ("place", Some("relation_type")),
            ("time", Some("relation_type")),
            ("subtask", Some("relation_type")),
            ("object", Some("relation_type")),
            ("rule", Some("relation_type")),
            ("subtype", Some("relation_type")),
            ("author", Some("relation_type")),
            ("argument", Some("relation_type")),
            ("objection", Some("relation_type")),
            ("correction", Some("relation_type")),
            ("corrective_precision", Some("correction")),
            ("corrective_generalization", Some("correction")),
            ("restrictive_correction", Some("correction")),
            ("specialization", Some("relation_type")),
            ("specialization_or_equivalent_object", Some("relation_type")),
        ];
        for (child, parent) in edges {
            let parent = parent.map(p).unwrap_or_else(|| t.clone());
            o.add_subtype(p(child), parent).expect("bootstrap ontology is acyclic");
        }
        for (a, b) in [
            ("physical_entity", "process"),
            ("physical_entity", "spatial_entity"),
            ("physical_entity", "relation_type"),
            ("process", "relation_type"),
            ("person", "bird"),
            ("animal", "body_part"),
        ] {
            o.declare_disjoint(p(a), p(b)).expect("bootstrap disjointness is consistent");
        }
        o.set_signature(
            p("part"),
            Signature {
                domain: Some(p("physical_entity")),
                range: Some(p("physical_entity")),
            },
        );
        o.set_signature(
            p("subtask"),
            Signature {
                domain: Some(p("task")),
                range: Some(p("task")),
            },
        );
        o
    }

    pub fn contains(&self, t: &Term) -> bool {
        t.is_thing() || self.parents.contains_key(t)
    }

    /// Declared terms in sorted order, `thing` excluded.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.parents.keys()
    }

    pub fn direct_parents(&self, t: &Term) -> BTreeSet<Term> {
        match self.parents.get(t) {
            Some(ps) if !ps.is_empty() => ps.clone(),
            _ if t.is_thing() => BTreeSet::new(),
            _ => BTreeSet::from([Term::thing()]),
        }
    }

    /// Registers a term directly under `thing` when it is unknown.
    pub fn ensure(&mut self, t: &Term) {
        if !t.is_thing() {
            self.parents.entry(t.clone()).or_default();
        }
    }

    /// Adds `child ⊑ parent`. Returns false when the edge was already implied.
    pub fn add_subtype(&mut self, child: Term, parent: Term) -> Result<bool, OntologyError> {
        if self.is_subtype(&child, &parent) {
            self.ensure(&child);
            self.ensure(&parent);
            return Ok(false);
        }
        if self.is_subtype(&parent, &child) {
            return Err(OntologyError::Cycle { child, parent });
        }
        let mut above = self.ancestors(&parent);
        above.insert(parent.clone());
        let mut mine = self.ancestors(&child);
        mine.insert(child.clone());
        let below = self.descendants(&child);
        for a in &above {
            for b in &mine {
                if self.declared_disjoint(a, b) {
                    return Err(OntologyError::Disjoint {
                        child,
                        a: a.clone(),
                        b: b.clone(),
                    });
                }
            }
            for d in &below {
                if self.declared_disjoint(a, d) {
                    return Err(OntologyError::Disjoint {
                        child,
                        a: a.clone(),
                        b: d.clone(),
                    });
                }
            }
        }
        self.ensure(&child);
        self.ensure(&parent);
        let ps = self.parents.get_mut(&child).expect("ensured");
        ps.remove(&Term::thing());
        ps.insert(parent);
        Ok(true)
    }

    /// Reflexive subtype test. Everything is below `thing`.
    pub fn is_subtype(&self, sub: &Term, sup: &Term) -> bool {
        if sub == sup || sup.is_thing() {
            return true;
        }
        if !sub.is_formal() || !sup.is_formal() {
            return false;
        }
        let mut seen = BTreeSet::new();
        let mut todo = VecDeque::from([sub]);
        while let Some(t) = todo.pop_front() {
            if let Some(ps) = self.parents.get(t) {
                for p in ps {
                    if p == sup {
                        return true;
                    }
                    if seen.insert(p) {
                        todo.push_back(p);
                    }
                }
            }
        }
        false
    }

    /// Strict ancestors, `thing` included.
    pub fn ancestors(&self, t: &Term) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        let mut todo = vec![t.clone()];
        while let Some(x) = todo.pop() {
            for p in self.direct_parents(&x) {
                if out.insert(p.clone()) {
                    todo.push(p);
                }
            }
        }
        out
    }

    /// Strict descendants among declared terms.
    pub fn descendants(&self, t: &Term) -> BTreeSet<Term> {
        self.parents
            .keys()
            .filter(|k| *k != t && self.is_subtype(k, t))
            .cloned()
            .collect()
    }

    pub fn declare_disjoint(&mut self, a: Term, b: Term) -> Result<(), OntologyError> {
        let mut below_a = self.descendants(&a);
        below_a.insert(a.clone());
        for x in &below_a {
            if self.is_subtype(x, &b) {
                return Err(OntologyError::Disjoint {
                    child: x.clone(),
                    a,
                    b,
                });
            }
        }
        self.ensure(&a);
        self.ensure(&b);
        let pair = if a <= b { (a, b) } else { (b, a) };
        self.disjoint.insert(pair);
        Ok(())
    }

    fn declared_disjoint(&self, a: &Term, b: &Term) -> bool {
        let pair = if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        };
        self.disjoint.contains(&pair)
    }

    /// True when no individual can be both an `a` and a `b`.
    pub fn are_disjoint(&self, a: &Term, b: &Term) -> bool {
        let mut up_a = self.ancestors(a);
        up_a.insert(a.clone());
        let mut up_b = self.ancestors(b);
        up_b.insert(b.clone());
        up_a.iter()
            .any(|x| up_b.iter().any(|y| self.declared_disjoint(x, y)))
    }

    pub fn disjoint_pairs(&self) -> impl Iterator<Item = &(Term, Term)> {
        self.disjoint.iter()
    }

    pub fn set_signature(&mut self, relation: Term, sig: Signature) {
        self.ensure(&relation);
        self.signatures.insert(relation, sig);
    }

    pub fn signature(&self, relation: &Term) -> Option<&Signature> {
        self.signatures.get(relation)
    }
}

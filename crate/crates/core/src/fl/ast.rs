use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of the built-in top term of every hierarchy.
pub const THING: &str = "thing";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formality {
    Formal,
    Informal,
}

/// A formal identifier qualified by its creator (`p#man`) or an informal
/// quoted string (`"giving more precision takes more time"`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub source: String,
    pub name: String,
    pub formality: Formality,
}

impl Term {
    pub fn formal(source: impl Into<String>, name: impl Into<String>) -> Self {
        Term {
            source: source.into(),
            name: name.into(),
            formality: Formality::Formal,
        }
    }

    /// Built-in term with an empty source.
    pub fn builtin(name: impl Into<String>) -> Self {
        Term::formal("", name)
    }

    pub fn informal(text: impl Into<String>) -> Self {
        Term {
            source: String::new(),
            name: text.into(),
            formality: Formality::Informal,
        }
    }

    pub fn thing() -> Self {
        Term::builtin(THING)
    }

    pub fn is_formal(&self) -> bool {
        self.formality == Formality::Formal
    }

    pub fn is_thing(&self) -> bool {
        self.is_formal() && self.source.is_empty() && self.name == THING
    }

    /// Matches the local name regardless of the creator prefix.
    pub fn has_local_name(&self, name: &str) -> bool {
        self.is_formal() && self.name == name
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.source.is_empty() {
            write!(f, "{}#", self.source)?;
        }
        match self.formality {
            Formality::Formal => f.write_str(&self.name),
            Formality::Informal => write_quoted(f, &self.name),
        }
    }
}

pub(crate) fn write_quoted(f: &mut impl fmt::Write, text: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in text.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Quantifier of a concept node. `a`/`an`, `1..*` and `at least 1` all
/// canonicalize to `Existential`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    Existential,
    Universal,
    /// Percentage in hundredths of a percent (78% is 7800).
    AtLeastPercent(u32),
    Cardinality { min: u32, max: Option<u32> },
}

impl Quantifier {
    /// Builds a cardinality and folds `1..*` into `Existential`.
    pub fn cardinality(min: u32, max: Option<u32>) -> Self {
        if min == 1 && max.is_none() {
            Quantifier::Existential
        } else {
            Quantifier::Cardinality { min, max }
        }
    }

    /// Counting interval when the quantifier is a count (existential or cardinality).
    pub fn interval(&self) -> Option<(u32, Option<u32>)> {
        match *self {
            Quantifier::Existential => Some((1, None)),
            Quantifier::Cardinality { min, max } => Some((min, max)),
            _ => None,
        }
    }

    pub fn percent_value(hundredths: u32) -> f64 {
        hundredths as f64 / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Literal {
    Str(String),
    /// Numbers keep their source spelling so equality stays exact.
    Number(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write_quoted(f, s),
            Literal::Number(n) => f.write_str(n),
        }
    }
}

/// What a concept node denotes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeHead {
    Type(Term),
    Literal(Literal),
    /// An embedded statement used as an object (belief content, context-wrapped sentence).
    Statement(Box<StatementGraph>),
    /// `src# if `premise` then `conclusion``.
    Rule {
        source: String,
        premise: Box<StatementGraph>,
        conclusion: Box<StatementGraph>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Plain,
    Possibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptNode {
    pub quantifier: Option<Quantifier>,
    pub head: NodeHead,
    pub variable: Option<String>,
    pub attachments: Vec<RelationEdge>,
}

impl ConceptNode {
    pub fn new(quantifier: Option<Quantifier>, head: NodeHead) -> Self {
        ConceptNode {
            quantifier,
            head,
            variable: None,
            attachments: Vec::new(),
        }
    }

    pub fn typed(quantifier: Option<Quantifier>, ty: Term) -> Self {
        ConceptNode::new(quantifier, NodeHead::Type(ty))
    }

    pub fn literal(lit: Literal) -> Self {
        ConceptNode::new(None, NodeHead::Literal(lit))
    }

    pub fn variable(name: impl Into<String>) -> Self {
        let mut n = ConceptNode::typed(None, Term::thing());
        n.variable = Some(name.into());
        n
    }

    pub fn with_edge(mut self, edge: RelationEdge) -> Self {
        self.attachments.push(edge);
        self
    }

    pub fn type_term(&self) -> Option<&Term> {
        match &self.head {
            NodeHead::Type(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_bare_variable(&self) -> bool {
        self.variable.is_some()
            && self.quantifier.is_none()
            && matches!(&self.head, NodeHead::Type(t) if t.is_thing())
    }

    /// Depth-first visit of this node and everything reachable from it,
    /// including meta annotations and embedded statements.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ConceptNode)) {
        f(self);
        match &self.head {
            NodeHead::Statement(g) => g.root.visit(f),
            NodeHead::Rule {
                premise,
                conclusion,
                ..
            } => {
                premise.root.visit(f);
                conclusion.root.visit(f);
            }
            _ => {}
        }
        for e in &self.attachments {
            e.visit(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub relation: Term,
    pub destination: ConceptNode,
    pub modality: Modality,
    /// Set for `<rel> of <dest>`: the destination is the subject.
    pub inverse: bool,
    pub meta: Vec<RelationEdge>,
}

impl RelationEdge {
    pub fn new(relation: Term, destination: ConceptNode) -> Self {
        RelationEdge {
            relation,
            destination,
            modality: Modality::Plain,
            inverse: false,
            meta: Vec::new(),
        }
    }

    pub fn inverse(mut self) -> Self {
        self.inverse = true;
        self
    }

    pub fn possible(mut self) -> Self {
        self.modality = Modality::Possibility;
        self
    }

    pub fn with_meta(mut self, meta: RelationEdge) -> Self {
        self.meta.push(meta);
        self
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a ConceptNode)) {
        self.destination.visit(f);
        for m in &self.meta {
            m.visit(f);
        }
    }
}

/// One parsed FL statement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementGraph {
    pub root: ConceptNode,
    /// Original source text; ignored by equality.
    pub raw_text: String,
}

impl StatementGraph {
    pub fn new(root: ConceptNode) -> Self {
        StatementGraph {
            root,
            raw_text: String::new(),
        }
    }

    /// Every term used in the statement (types and relations), deduplicated and sorted.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = std::collections::BTreeSet::new();
        self.root.visit(&mut |n| {
            if let NodeHead::Type(t) = &n.head {
                if !(t.is_thing() && n.variable.is_some()) {
                    out.insert(t.clone());
                }
            }
            for e in &n.attachments {
                out.insert(e.relation.clone());
                collect_meta_relations(&e.meta, &mut out);
            }
        });
        out.into_iter().collect()
    }

    /// Formal terms only.
    pub fn formal_terms(&self) -> Vec<Term> {
        self.terms().into_iter().filter(Term::is_formal).collect()
    }

    pub fn is_informal_root(&self) -> bool {
        matches!(&self.root.head, NodeHead::Type(t) if !t.is_formal())
    }
}

fn collect_meta_relations(meta: &[RelationEdge], out: &mut std::collections::BTreeSet<Term>) {
    for m in meta {
        out.insert(m.relation.clone());
        collect_meta_relations(&m.meta, out);
    }
}

impl PartialEq for StatementGraph {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for StatementGraph {}

impl std::hash::Hash for StatementGraph {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.root.hash(state);
    }
}

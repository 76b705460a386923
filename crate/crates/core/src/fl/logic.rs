//! Export to a KIF-style s-expression logic form.
//!
//! Existential nodes become `exists` bindings, universal nodes `forall`
//! bindings with sorted variables. Constructs without a first-order reading
//! use a reified encoding under the `kb:` namespace and set `extended`:
//!
//! | construct                 | encoding                                           |
//! |---------------------------|----------------------------------------------------|
//! | cardinality on an edge    | `(kb:cardinality REL SUBJ TYPE MIN MAX [(lambda (?y) BODY)])` |
//! | cardinality at the root   | `(kb:count TYPE MIN MAX (lambda (?x) BODY))`        |
//! | at least N% on an edge    | `(kb:at-least-percent REL SUBJ TYPE N [(lambda (?y) BODY)])`  |
//! | at least N% at the root   | `(kb:at-least-percent-of TYPE N (lambda (?x) BODY))` |
//! | possibility               | `(kb:possible FORMULA)`                             |
//! | statement used as object  | `(kb:quote FORMULA)`                                |
//! | relation meta-annotation  | `(kb:meta ATOM (REL VALUE)...)`                     |
//! | rule                      | `(kb:rule SRC (=> PREMISE CONCLUSION))`             |
//!
//! `MAX` is `*` when unbounded.

use std::collections::HashMap;
use std::fmt;

use super::ast::*;
use super::canonical::canonicalize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn atom(s: impl Into<String>) -> Self {
        SExpr::Atom(s.into())
    }

    pub fn list(items: Vec<SExpr>) -> Self {
        SExpr::List(items)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn items(&self) -> &[SExpr] {
        match self {
            SExpr::List(v) => v,
            SExpr::Atom(_) => &[],
        }
    }

    /// Head atom of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.items().first().and_then(SExpr::as_atom)
    }

    /// Parses one s-expression. Quoted strings stay atoms including their quotes.
    pub fn parse(text: &str) -> Result<SExpr, String> {
        let mut chars = text.chars().peekable();
        let e = parse_sexpr(&mut chars)?;
        skip_ws(&mut chars);
        if chars.peek().is_some() {
            return Err("trailing input after s-expression".into());
        }
        Ok(e)
    }

    /// Renames `?`-variables to `?1`, `?2`, ... in order of first appearance.
    pub fn normalize_variables(&self) -> SExpr {
        let mut names = HashMap::new();
        self.renamed(&mut names)
    }

    fn renamed(&self, names: &mut HashMap<String, String>) -> SExpr {
        match self {
            SExpr::Atom(a) if a.starts_with('?') => {
                let next = format!("?{}", names.len() + 1);
                SExpr::Atom(names.entry(a.clone()).or_insert(next).clone())
            }
            SExpr::Atom(a) => SExpr::Atom(a.clone()),
            SExpr::List(v) => SExpr::List(v.iter().map(|e| e.renamed(names)).collect()),
        }
    }

    /// All sub-expressions, depth first.
    pub fn walk(&self) -> Vec<&SExpr> {
        let mut out = vec![self];
        for item in self.items() {
            out.extend(item.walk());
        }
        out
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(a) => f.write_str(a),
            SExpr::List(v) => {
                f.write_str("(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn skip_ws(chars: &mut std::iter::Peekable<std::str::Chars<'_>>) {
    while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
        chars.next();
    }
}

fn parse_sexpr(chars: &mut std::iter::Peekable<std::str::Chars<'_>>) -> Result<SExpr, String> {
    skip_ws(chars);
    match chars.peek() {
        None => Err("unexpected end of s-expression".into()),
        Some('(') => {
            chars.next();
            let mut items = Vec::new();
            loop {
                skip_ws(chars);
                match chars.peek() {
                    None => return Err("unclosed '('".into()),
                    Some(')') => {
                        chars.next();
                        return Ok(SExpr::List(items));
                    }
                    _ => items.push(parse_sexpr(chars)?),
                }
            }
        }
        Some(')') => Err("unexpected ')'".into()),
        Some('"') => {
            let mut s = String::new();
            s.push(chars.next().unwrap_or('"'));
            loop {
                match chars.next() {
                    None => return Err("unterminated string".into()),
                    Some('\\') => {
                        s.push('\\');
                        if let Some(c) = chars.next() {
                            s.push(c);
                        }
                    }
                    Some('"') => {
                        s.push('"');
                        return Ok(SExpr::Atom(s));
                    }
                    Some(c) => s.push(c),
                }
            }
        }
        Some(_) => {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() || c == '(' || c == ')' {
                    break;
                }
                s.push(c);
                chars.next();
            }
            Ok(SExpr::Atom(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicExport {
    pub formula: SExpr,
    /// Set when the reified encoding had to be used.
    pub extended: bool,
}

impl LogicExport {
    pub fn text(&self) -> String {
        self.formula.to_string()
    }
}

pub fn export_logic(g: &StatementGraph) -> LogicExport {
    let g = canonicalize(g);
    let mut ex = Exporter::default();
    let formula = ex.statement(&g.root);
    LogicExport {
        formula,
        extended: ex.extended,
    }
}

#[derive(Default)]
struct Exporter {
    used: HashMap<String, usize>,
    extended: bool,
}

#[derive(Default)]
struct Block {
    bindings: Vec<SExpr>,
    atoms: Vec<SExpr>,
}

impl Block {
    fn close(self) -> SExpr {
        let body = conj(self.atoms);
        if self.bindings.is_empty() {
            body
        } else {
            SExpr::list(vec![
                SExpr::atom("exists"),
                SExpr::List(self.bindings),
                body,
            ])
        }
    }
}

fn conj(mut atoms: Vec<SExpr>) -> SExpr {
    match atoms.len() {
        0 => SExpr::atom("true"),
        1 => atoms.remove(0),
        _ => {
            atoms.insert(0, SExpr::atom("and"));
            SExpr::List(atoms)
        }
    }
}

fn term_atom(t: &Term) -> SExpr {
    SExpr::atom(t.to_string())
}

fn binding(var: &SExpr, ty: &Term) -> SExpr {
    SExpr::list(vec![var.clone(), term_atom(ty)])
}

fn lambda(var: &SExpr, body: SExpr) -> SExpr {
    SExpr::list(vec![
        SExpr::atom("lambda"),
        SExpr::list(vec![var.clone()]),
        body,
    ])
}

fn count_atom(max: Option<u32>) -> SExpr {
    SExpr::atom(max.map(|m| m.to_string()).unwrap_or_else(|| "*".into()))
}

fn percent_atom(h: u32) -> SExpr {
    let mut s = String::new();
    super::printer::write_quantifier(&mut s, &Quantifier::AtLeastPercent(h));
    // "at least N% of" -> "N"
    SExpr::atom(s.trim_start_matches("at least ").trim_end_matches("% of").to_string())
}

impl Exporter {
    fn fresh(&mut self, node: &ConceptNode) -> SExpr {
        if let Some(v) = &node.variable {
            return SExpr::atom(format!("?{v}"));
        }
        let letter = match &node.head {
            NodeHead::Type(t) => t
                .name
                .chars()
                .find(|c| c.is_ascii_alphabetic())
                .map(|c| c.to_ascii_lowercase())
                .unwrap_or('x'),
            _ => 'x',
        };
        let key = letter.to_string();
        let n = self.used.entry(key.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            SExpr::atom(format!("?{key}"))
        } else {
            SExpr::atom(format!("?{key}{n}"))
        }
    }

    fn ty(node: &ConceptNode) -> Term {
        node.type_term().cloned().unwrap_or_else(Term::thing)
    }

    /// Formula asserting a whole statement rooted at `root`.
    fn statement(&mut self, root: &ConceptNode) -> SExpr {
        match root.quantifier {
            Some(Quantifier::Universal) => {
                let v = self.fresh(root);
                let body = self.node_block(&v, root, Block::default());
                SExpr::list(vec![
                    SExpr::atom("forall"),
                    SExpr::list(vec![binding(&v, &Self::ty(root))]),
                    body,
                ])
            }
            Some(Quantifier::Existential) => {
                let v = self.fresh(root);
                let mut block = Block::default();
                block.bindings.push(binding(&v, &Self::ty(root)));
                self.node_block(&v, root, block)
            }
            Some(Quantifier::Cardinality { min, max }) => {
                self.extended = true;
                let v = self.fresh(root);
                let body = self.node_block(&v, root, Block::default());
                SExpr::list(vec![
                    SExpr::atom("kb:count"),
                    term_atom(&Self::ty(root)),
                    SExpr::atom(min.to_string()),
                    count_atom(max),
                    lambda(&v, body),
                ])
            }
            Some(Quantifier::AtLeastPercent(h)) => {
                self.extended = true;
                let v = self.fresh(root);
                let body = self.node_block(&v, root, Block::default());
                SExpr::list(vec![
                    SExpr::atom("kb:at-least-percent-of"),
                    term_atom(&Self::ty(root)),
                    percent_atom(h),
                    lambda(&v, body),
                ])
            }
            None => {
                let t = self.constant(root);
                self.node_block(&t, root, Block::default())
            }
        }
    }

    /// Term for an unquantified node.
    fn constant(&mut self, node: &ConceptNode) -> SExpr {
        if node.is_bare_variable() {
            return SExpr::atom(format!("?{}", node.variable.as_deref().unwrap_or("x")));
        }
        match &node.head {
            NodeHead::Type(t) => term_atom(t),
            NodeHead::Literal(l) => SExpr::atom(l.to_string()),
            NodeHead::Statement(g) => {
                self.extended = true;
                let inner = self.statement(&g.root);
                SExpr::list(vec![SExpr::atom("kb:quote"), inner])
            }
            NodeHead::Rule {
                source,
                premise,
                conclusion,
            } => {
                self.extended = true;
                let p = self.statement(&premise.root);
                let c = self.statement(&conclusion.root);
                SExpr::list(vec![
                    SExpr::atom("kb:rule"),
                    SExpr::atom(if source.is_empty() { "-" } else { source.as_str() }),
                    SExpr::list(vec![SExpr::atom("=>"), p, c]),
                ])
            }
        }
    }

    /// Adds the edges of `node` (whose term is `subject`) to `block` and closes it.
    fn node_block(&mut self, subject: &SExpr, node: &ConceptNode, mut block: Block) -> SExpr {
        self.edges_into(subject, node, &mut block);
        block.close()
    }

    fn edges_into(&mut self, subject: &SExpr, node: &ConceptNode, block: &mut Block) {
        for e in &node.attachments {
            if e.modality == Modality::Possibility {
                self.extended = true;
                let mut inner = Block::default();
                self.edge_into(subject, e, &mut inner);
                block
                    .atoms
                    .push(SExpr::list(vec![SExpr::atom("kb:possible"), inner.close()]));
            } else {
                self.edge_into(subject, e, block);
            }
        }
    }

    fn atom(&mut self, e: &RelationEdge, subject: &SExpr, object: &SExpr) -> SExpr {
        let (a, b) = if e.inverse {
            (object.clone(), subject.clone())
        } else {
            (subject.clone(), object.clone())
        };
        let atom = SExpr::list(vec![term_atom(&e.relation), a, b]);
        if e.meta.is_empty() {
            return atom;
        }
        self.extended = true;
        let mut items = vec![SExpr::atom("kb:meta"), atom];
        for m in &e.meta {
            items.push(self.meta_entry(m));
        }
        SExpr::List(items)
    }

    fn meta_entry(&mut self, m: &RelationEdge) -> SExpr {
        let value = self.value_term(&m.destination);
        let mut items = vec![term_atom(&m.relation), value];
        for nested in &m.meta {
            items.push(self.meta_entry(nested));
        }
        SExpr::List(items)
    }

    /// Standalone term for a meta-annotation value.
    fn value_term(&mut self, node: &ConceptNode) -> SExpr {
        match node.quantifier {
            None if node.attachments.is_empty() => self.constant(node),
            _ => {
                let f = self.statement(node);
                SExpr::list(vec![SExpr::atom("kb:quote"), f])
            }
        }
    }

    fn edge_into(&mut self, subject: &SExpr, e: &RelationEdge, block: &mut Block) {
        let d = &e.destination;
        match d.quantifier {
            None => {
                let obj = self.constant(d);
                let a = self.atom(e, subject, &obj);
                block.atoms.push(a);
                self.edges_into(&obj, d, block);
            }
            Some(Quantifier::Existential) => {
                let v = self.fresh(d);
                block.bindings.push(binding(&v, &Self::ty(d)));
                let a = self.atom(e, subject, &v);
                block.atoms.push(a);
                self.edges_into(&v, d, block);
            }
            Some(Quantifier::Universal) => {
                let v = self.fresh(d);
                let mut inner = Block::default();
                let a = self.atom(e, subject, &v);
                inner.atoms.push(a);
                let body = self.node_block(&v, d, inner);
                block.atoms.push(SExpr::list(vec![
                    SExpr::atom("forall"),
                    SExpr::list(vec![binding(&v, &Self::ty(d))]),
                    body,
                ]));
            }
            Some(Quantifier::Cardinality { min, max }) => {
                self.extended = true;
                let v = self.fresh(d);
                let mut items = vec![
                    SExpr::atom("kb:cardinality"),
                    term_atom(&e.relation),
                    subject.clone(),
                    term_atom(&Self::ty(d)),
                    SExpr::atom(min.to_string()),
                    count_atom(max),
                ];
                if !d.attachments.is_empty() {
                    let body = self.node_block(&v, d, Block::default());
                    items.push(lambda(&v, body));
                }
                block.atoms.push(SExpr::List(items));
            }
            Some(Quantifier::AtLeastPercent(h)) => {
                self.extended = true;
                let v = self.fresh(d);
                let mut items = vec![
                    SExpr::atom("kb:at-least-percent"),
                    term_atom(&e.relation),
                    subject.clone(),
                    term_atom(&Self::ty(d)),
                    percent_atom(h),
                ];
                if !d.attachments.is_empty() {
                    let body = self.node_block(&v, d, Block::default());
                    items.push(lambda(&v, body));
                }
                block.atoms.push(SExpr::List(items));
            }
        }
    }
}

/// Reads back a `kb:cardinality` / `kb:count` form as (min, max).
pub fn decode_cardinality(e: &SExpr) -> Option<(u32, Option<u32>)> {
    let items = e.items();
    let (min_at, max_at) = match e.head()? {
        "kb:cardinality" => (4, 5),
        "kb:count" => (2, 3),
        _ => return None,
    };
    let min = items.get(min_at)?.as_atom()?.parse().ok()?;
    let max = match items.get(max_at)?.as_atom()? {
        "*" => None,
        m => Some(m.parse().ok()?),
    };
    Some((min, max))
}

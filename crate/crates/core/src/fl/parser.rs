//! Recursive-descent parser for the supported FL subset.
//!
//! ```text
//! document    := statement (';' statement)* ';'?
//! statement   := node
//! node        := quantifier? head var? attachments
//! quantifier  := 'a' | 'an' | 'every' | INT | RANGE | 'at' 'least' INT
//!              | 'at' 'most' INT | 'at' 'least' PERCENT 'of'
//! head        := term+ | STRING | NUMBER | VAR | '(' node ')'
//!              | '`' node ('`' | '\'') | SRC? 'if' '`' node '`' 'then' '`' node '`'
//! attachments := group (','? group)*
//! group       := ('with' | 'has' 'for' | 'that' 'has' 'for') rel dest meta?
//!                  ('and' ('for' | 'has' 'for' | 'with') rel dest meta?)*
//!              | 'can' 'be' rel 'of' dest meta?
//!              | 'can' 'have' 'for' rel dest meta?
//!              | rel 'of' dest meta?
//!              | rel ':' (dest meta?)+ (',' rel ':' (dest meta?)+)*
//! meta        := '__[' attachments ']'
//! ```
//!
//! Several type terms after a quantifier (`a p#red p#car`) are attributions:
//! the last term is the type, the others become `attribute` edges.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::FlError;

/// Relation used for attributive modifiers (`a p#healthy p#bird`).
pub const ATTRIBUTE: &str = "attribute";

const KEYWORDS: &[&str] = &[
    "a", "an", "every", "at", "least", "most", "of", "with", "that", "has", "for", "and", "can",
    "be", "have", "if", "then", "or", "not", "no",
];

#[derive(Debug, Clone, Default)]
pub struct ParseContext {
    /// Creator attributed to unprefixed formal terms.
    pub default_source: Option<String>,
}

impl ParseContext {
    pub fn with_default_source(source: impl Into<String>) -> Self {
        ParseContext {
            default_source: Some(source.into()),
        }
    }
}

/// Parses exactly one statement; a trailing `;` is allowed.
pub fn parse(text: &str) -> Result<StatementGraph, FlError> {
    parse_with(text, &ParseContext::default())
}

/// Parses a single formal term such as `p#man`.
pub fn parse_term(text: &str) -> Result<Term, FlError> {
    let g = parse(text)?;
    let n = &g.root;
    match &n.head {
        NodeHead::Type(t) if t.is_formal() && n.quantifier.is_none() && n.variable.is_none() && n.attachments.is_empty() => {
            Ok(t.clone())
        }
        _ => Err(FlError::syntax(1, 1, "a single formal term")),
    }
}

pub fn parse_with(text: &str, ctx: &ParseContext) -> Result<StatementGraph, FlError> {
    let mut stmts = parse_document_with(text, ctx)?;
    match stmts.len() {
        0 => Err(FlError::syntax(1, 1, "a statement")),
        1 => Ok(stmts.remove(0)),
        _ => {
            let (line, col) = second_statement_pos(text, ctx);
            Err(FlError::syntax(line, col, "end of input after one statement"))
        }
    }
}

fn second_statement_pos(text: &str, _ctx: &ParseContext) -> (usize, usize) {
    tokenize(text)
        .ok()
        .and_then(|toks| {
            let semi = toks.iter().position(|t| t.tok == Tok::Semi)?;
            toks.get(semi + 1).map(|t| (t.line, t.col))
        })
        .unwrap_or((1, 1))
}

pub fn parse_document(text: &str) -> Result<Vec<StatementGraph>, FlError> {
    parse_document_with(text, &ParseContext::default())
}

/// Parses `;`-separated statements. Each statement keeps its own slice of
/// the source as `raw_text`.
pub fn parse_document_with(text: &str, ctx: &ParseContext) -> Result<Vec<StatementGraph>, FlError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        ctx,
        open_quotes: Vec::new(),
    };
    let mut out = Vec::new();
    let line_starts = line_offsets(text);
    loop {
        while p.eat(&Tok::Semi) {}
        if p.at_end() {
            break;
        }
        let start = p.peek_token().map(|t| (t.line, t.col)).unwrap();
        let root = p.node(Ctx::Head)?;
        let end = match p.peek_token() {
            None => None,
            Some(t) if t.tok == Tok::Semi => Some((t.line, t.col)),
            Some(t) => {
                if matches!(t.tok, Tok::Backquote | Tok::RightQuote) {
                    return Err(FlError::UnbalancedQuote {
                        line: t.line,
                        column: t.col,
                    });
                }
                return Err(FlError::syntax(t.line, t.col, "';' or end of input"));
            }
        };
        let raw = slice_between(text, &line_starts, start, end);
        out.push(StatementGraph {
            root,
            raw_text: raw.trim().to_string(),
        });
    }
    if out.is_empty() {
        return Err(FlError::syntax(1, 1, "a statement"));
    }
    Ok(out)
}

fn line_offsets(text: &str) -> Vec<usize> {
    let mut v = vec![0];
    for (i, c) in text.char_indices() {
        if c == '\n' {
            v.push(i + 1);
        }
    }
    v
}

fn byte_at(text: &str, lines: &[usize], (line, col): (usize, usize)) -> usize {
    let start = lines[line - 1];
    text[start..]
        .char_indices()
        .nth(col - 1)
        .map(|(i, _)| start + i)
        .unwrap_or(text.len())
}

fn slice_between<'a>(
    text: &'a str,
    lines: &[usize],
    start: (usize, usize),
    end: Option<(usize, usize)>,
) -> &'a str {
    let s = byte_at(text, lines, start);
    let e = end.map(|p| byte_at(text, lines, p)).unwrap_or(text.len());
    &text[s..e]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ctx {
    /// Statement root or parenthesized node: every attachment form.
    Head,
    /// Destination inside a `with`/`has for` chain: chains and modal forms only.
    Chain,
    /// Destination inside a frame list: no attachments.
    Frame,
}

struct Parser<'c> {
    toks: Vec<Token>,
    pos: usize,
    ctx: &'c ParseContext,
    open_quotes: Vec<(usize, usize)>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    fn peek_token(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn err(&self, expected: impl Into<String>) -> FlError {
        let (line, col) = self.here();
        FlError::syntax(line, col, expected)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn is_kw(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(0, kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), FlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("'{kw}'")))
        }
    }

    fn formal(&self, source: Option<&str>, name: &str) -> Term {
        match source {
            Some(s) => Term::formal(s, name),
            None if name == THING || name == ATTRIBUTE => Term::builtin(name),
            None => Term::formal(self.ctx.default_source.clone().unwrap_or_default(), name),
        }
    }

    /// A token that can name a relation or a type: non-keyword identifier,
    /// prefixed name or (in relation position) a quoted string.
    fn term_at(&self, n: usize, allow_plain_string: bool) -> Option<Term> {
        match self.peek_at(n)? {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Some(self.formal(None, s)),
            Tok::Prefixed(src, name) => Some(self.formal(Some(src), name)),
            Tok::PrefixedStr(src, text) => Some(Term {
                source: src.clone(),
                name: text.clone(),
                formality: Formality::Informal,
            }),
            Tok::Str(text) if allow_plain_string => Some(Term::informal(text.clone())),
            _ => None,
        }
    }

    /// `rel ':'` or `rel 'of'` starting at offset `n`.
    fn relation_starts_at(&self, n: usize) -> bool {
        self.term_at(n, true).is_some()
            && (self.peek_at(n + 1) == Some(&Tok::Colon) || self.is_kw(n + 1, "of"))
    }

    fn chain_intro_len(&self) -> Option<usize> {
        if self.is_kw(0, "with") {
            Some(1)
        } else if self.is_kw(0, "has") && self.is_kw(1, "for") {
            Some(2)
        } else if self.is_kw(0, "that") && self.is_kw(1, "has") && self.is_kw(2, "for") {
            Some(3)
        } else {
            None
        }
    }

    fn group_starts(&self, ctx: Ctx) -> bool {
        match ctx {
            Ctx::Frame => false,
            Ctx::Chain => self.chain_intro_len().is_some() || self.is_kw(0, "can"),
            Ctx::Head => {
                self.chain_intro_len().is_some()
                    || self.is_kw(0, "can")
                    || self.relation_starts_at(0)
            }
        }
    }

    fn relation(&mut self) -> Result<Term, FlError> {
        match self.term_at(0, true) {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.err("a relation name")),
        }
    }

    fn quantifier(&mut self) -> Result<Option<Quantifier>, FlError> {
        if self.eat_kw("a") || self.eat_kw("an") {
            return Ok(Some(Quantifier::Existential));
        }
        if self.eat_kw("every") {
            return Ok(Some(Quantifier::Universal));
        }
        if self.is_kw(0, "at") {
            self.pos += 1;
            if self.eat_kw("least") {
                match self.peek().cloned() {
                    Some(Tok::Percent(p)) => {
                        self.pos += 1;
                        self.expect_kw("of")?;
                        return Ok(Some(Quantifier::AtLeastPercent(p)));
                    }
                    Some(Tok::Number(n)) => {
                        self.pos += 1;
                        let n = self.count(&n)?;
                        return Ok(Some(Quantifier::cardinality(n, None)));
                    }
                    _ => return Err(self.err("a count or percentage after 'at least'")),
                }
            }
            if self.eat_kw("most") {
                if let Some(Tok::Number(n)) = self.peek().cloned() {
                    self.pos += 1;
                    let n = self.count(&n)?;
                    return Ok(Some(Quantifier::cardinality(0, Some(n))));
                }
                return Err(self.err("a count after 'at most'"));
            }
            return Err(self.err("'least' or 'most' after 'at'"));
        }
        match self.peek().cloned() {
            Some(Tok::Range(min, max)) => {
                self.pos += 1;
                Ok(Some(Quantifier::cardinality(min, max)))
            }
            Some(Tok::Number(n)) if !n.contains('.') && self.term_at(1, false).is_some() => {
                self.pos += 1;
                let n = self.count(&n)?;
                Ok(Some(Quantifier::cardinality(n, Some(n))))
            }
            Some(Tok::Percent(_)) => Err(self.err("'at least' before a percentage")),
            _ => Ok(None),
        }
    }

    fn count(&self, n: &str) -> Result<u32, FlError> {
        n.parse().map_err(|_| self.err("an integer count"))
    }

    fn embedded(&mut self) -> Result<StatementGraph, FlError> {
        let open = self.here();
        // caller has checked the opening backquote
        self.pos += 1;
        self.open_quotes.push(open);
        let root = self.node(Ctx::Head)?;
        match self.peek() {
            Some(Tok::Backquote) | Some(Tok::RightQuote) => {
                self.pos += 1;
                self.open_quotes.pop();
                Ok(StatementGraph::new(root))
            }
            None => Err(FlError::UnbalancedQuote {
                line: open.0,
                column: open.1,
            }),
            _ => Err(self.err("closing quote of embedded statement")),
        }
    }

    fn rule(&mut self, source: String) -> Result<NodeHead, FlError> {
        self.expect_kw("if")?;
        if self.peek() != Some(&Tok::Backquote) {
            return Err(self.err("'`' opening the rule premise"));
        }
        let premise = self.embedded()?;
        self.expect_kw("then")?;
        if self.peek() != Some(&Tok::Backquote) {
            return Err(self.err("'`' opening the rule conclusion"));
        }
        let conclusion = self.embedded()?;
        Ok(NodeHead::Rule {
            source,
            premise: Box::new(premise),
            conclusion: Box::new(conclusion),
        })
    }

    fn node(&mut self, ctx: Ctx) -> Result<ConceptNode, FlError> {
        let quantifier = self.quantifier()?;
        let mut node = match self.peek().cloned() {
            Some(Tok::LParen) if quantifier.is_none() => {
                self.pos += 1;
                let inner = self.node(Ctx::Head)?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.err("')'"));
                }
                inner
            }
            Some(Tok::Backquote) if quantifier.is_none() => {
                let g = self.embedded()?;
                ConceptNode::new(None, NodeHead::Statement(Box::new(g)))
            }
            Some(Tok::SourcePrefix(src)) if quantifier.is_none() && self.is_kw(1, "if") => {
                self.pos += 1;
                ConceptNode::new(None, self.rule(src)?)
            }
            Some(Tok::Ident(kw)) if kw == "if" && quantifier.is_none() => {
                ConceptNode::new(None, self.rule(String::new())?)
            }
            Some(Tok::Var(v)) if quantifier.is_none() => {
                self.pos += 1;
                ConceptNode::variable(v)
            }
            Some(Tok::Number(n)) if quantifier.is_none() => {
                self.pos += 1;
                ConceptNode::literal(Literal::Number(n))
            }
            Some(Tok::Str(s)) if quantifier.is_none() && ctx != Ctx::Head => {
                self.pos += 1;
                ConceptNode::literal(Literal::Str(s))
            }
            _ => {
                let Some(first) = self.term_at(0, ctx == Ctx::Head && quantifier.is_none()) else {
                    return Err(self.err(if quantifier.is_some() {
                        "a type after the quantifier"
                    } else {
                        "a term, literal, '(' or '`'"
                    }));
                };
                self.pos += 1;
                let mut ty = first;
                let mut attributes = Vec::new();
                if quantifier.is_some() {
                    while let Some(next) = self.term_at(0, false) {
                        if self.relation_starts_at(0) {
                            break;
                        }
                        self.pos += 1;
                        attributes.push(std::mem::replace(&mut ty, next));
                    }
                }
                let mut node = ConceptNode::typed(quantifier, ty);
                for attr in attributes {
                    node.attachments.push(RelationEdge::new(
                        Term::builtin(ATTRIBUTE),
                        ConceptNode::typed(Some(Quantifier::Existential), attr),
                    ));
                }
                if let Some(Tok::Var(v)) = self.peek().cloned() {
                    self.pos += 1;
                    node.variable = Some(v);
                }
                node
            }
        };
        if quantifier.is_some() && node.quantifier.is_none() {
            node.quantifier = quantifier;
        }
        self.attachments(&mut node.attachments, ctx)?;
        Ok(node)
    }

    fn meta(&mut self) -> Result<Vec<RelationEdge>, FlError> {
        if !self.eat(&Tok::MetaOpen) {
            return Ok(Vec::new());
        }
        let mut edges = Vec::new();
        self.attachments(&mut edges, Ctx::Head)?;
        if edges.is_empty() {
            return Err(self.err("a relation inside '__['"));
        }
        if !self.eat(&Tok::RBracket) {
            return Err(self.err("']' closing '__['"));
        }
        Ok(edges)
    }

    fn edge(&mut self, relation: Term, dest_ctx: Ctx) -> Result<RelationEdge, FlError> {
        let destination = self.node(dest_ctx)?;
        let mut edge = RelationEdge::new(relation, destination);
        edge.meta = self.meta()?;
        Ok(edge)
    }

    fn attachments(&mut self, out: &mut Vec<RelationEdge>, ctx: Ctx) -> Result<(), FlError> {
        loop {
            if !self.group_starts(ctx) {
                if self.peek() == Some(&Tok::Comma) && ctx == Ctx::Head {
                    self.pos += 1;
                    if self.group_starts(ctx) {
                        continue;
                    }
                    return Err(self.err("a relation after ','"));
                }
                return Ok(());
            }
            if let Some(n) = self.chain_intro_len() {
                self.pos += n;
                loop {
                    let rel = self.relation()?;
                    out.push(self.edge(rel, Ctx::Chain)?);
                    if self.is_kw(0, "and") {
                        if self.is_kw(1, "for") || self.is_kw(1, "with") {
                            self.pos += 2;
                            continue;
                        }
                        if self.is_kw(1, "has") && self.is_kw(2, "for") {
                            self.pos += 3;
                            continue;
                        }
                    }
                    break;
                }
            } else if self.eat_kw("can") {
                if self.eat_kw("be") {
                    let rel = self.relation()?;
                    self.expect_kw("of")?;
                    out.push(self.edge(rel, Ctx::Chain)?.possible().inverse());
                } else if self.eat_kw("have") {
                    self.expect_kw("for")?;
                    let rel = self.relation()?;
                    out.push(self.edge(rel, Ctx::Chain)?.possible());
                } else {
                    return Err(self.err("'be' or 'have' after 'can'"));
                }
            } else if self.is_kw(1, "of") {
                let rel = self.relation()?;
                self.pos += 1;
                out.push(self.edge(rel, Ctx::Chain)?.inverse());
            } else {
                // frame group: rel ':' dest+
                let rel = self.relation()?;
                if !self.eat(&Tok::Colon) {
                    return Err(self.err("':'"));
                }
                out.push(self.edge(rel.clone(), Ctx::Frame)?);
                while self.dest_starts()
                    && !self.closes_embedding()
                    && !self.relation_starts_at(0)
                {
                    out.push(self.edge(rel.clone(), Ctx::Frame)?);
                }
            }
        }
    }

    /// Inside an embedding a backquote after a complete destination closes it.
    fn closes_embedding(&self) -> bool {
        self.peek() == Some(&Tok::Backquote) && !self.open_quotes.is_empty()
    }

    fn dest_starts(&self) -> bool {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                !KEYWORDS.contains(&s.as_str())
                    || matches!(s.as_str(), "a" | "an" | "every" | "at" | "if")
            }
            Some(Tok::SourcePrefix(_)) => self.is_kw(1, "if"),
            Some(
                Tok::Prefixed(..)
                | Tok::PrefixedStr(..)
                | Tok::Str(_)
                | Tok::Number(_)
                | Tok::Range(..)
                | Tok::Var(_)
                | Tok::LParen
                | Tok::Backquote,
            ) => true,
            _ => false,
        }
    }
}

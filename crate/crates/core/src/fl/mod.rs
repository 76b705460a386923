//! The FL notation subset: lexer, parser, canonical printer, logic export and
//! expressiveness report.

mod ast;
mod canonical;
mod lexer;
mod logic;
mod parser;
mod printer;
mod report;

pub use ast::*;
pub use canonical::{canonical_text, canonicalize, canonically_equal};
pub use logic::{decode_cardinality, export_logic, LogicExport, SExpr};
pub use parser::{
    parse, parse_document, parse_document_with, parse_term, parse_with, ParseContext, ATTRIBUTE,
};
pub use printer::{print, print_node};
pub use report::{
    constructs, expressiveness_report, Capability, Construct, Target, TargetCapability,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlError {
    #[error("syntax error at {line}:{column}: expected {expected}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
    },
    #[error("unbalanced statement quote at {line}:{column}")]
    UnbalancedQuote { line: usize, column: usize },
}

impl FlError {
    pub(crate) fn syntax(line: usize, column: usize, expected: impl Into<String>) -> Self {
        FlError::Syntax {
            line,
            column,
            expected: expected.into(),
        }
    }

    pub fn position(&self) -> Option<(usize, usize)> {
        match *self {
            FlError::Syntax { line, column, .. } | FlError::UnbalancedQuote { line, column } => {
                Some((line, column))
            }
        }
    }
}

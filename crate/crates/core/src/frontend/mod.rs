//! MicroC front end: lexing, parsing, condition decomposition and
//! canonical printing. The accepted grammar is documented in
//! `docs/grammar.md`.

mod ast;
mod lexer;
mod parser;
mod pretty;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_program;
pub use pretty::{cond as pretty_cond, expr as pretty_expr, leaf as pretty_leaf, pretty_print};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{file}:{line}:{col}: {message}")]
pub struct ParseError {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn at(span: &SourceSpan, message: String) -> Self {
        ParseError { file: span.file.to_string(), line: span.line_start, col: span.col_start, message }
    }
}

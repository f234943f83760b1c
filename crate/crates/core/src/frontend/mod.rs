//! Tokenizer, parser and printer for SL-mini source files.

pub mod ast;
pub mod parser;
pub mod printer;
pub mod token;

use std::fmt;

pub use ast::AstProgram;
pub use parser::{parse_program, split_arguments};
pub use printer::print_ast;
pub use token::{tokenize, SourceSpan, Token, TokenKind};

/// A lexical or syntax error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub message: String,
}

impl SyntaxError {
    pub fn new(span: SourceSpan, message: impl Into<String>) -> Self {
        SyntaxError {
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: error: {}", self.span, self.message)
    }
}

/// Tokenize and parse `source`, attributing spans to `file`.
pub fn parse_source(source: &str, file: &str) -> Result<AstProgram, SyntaxError> {
    let tokens = tokenize(source, file)?;
    parse_program(&tokens)
}

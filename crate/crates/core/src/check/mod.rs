//! Name resolution, channel-usage rules and the compile pipeline.
//!
//! Diagnostic codes are stable; the full list with meanings is in
//! `docs/diagnostics.md`.

mod resolve;
mod rules;

use std::fmt;

use serde::Serialize;

use crate::frontend::{self, AstProgram, SourceSpan, SyntaxError};
use crate::ir::IrProgram;
use crate::lower;

pub use resolve::{resolve, FunctionSymbol, ParamSig, SymbolTable, ThreadSymbol, BUILTINS};
pub use rules::check_channels;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Stable diagnostic codes.
pub mod codes {
    pub const SYNTAX: &str = "E_SYNTAX";
    pub const UNDEF: &str = "E_UNDEF";
    pub const DUP: &str = "E_DUP";
    pub const NOT_THREAD: &str = "E_NOT_THREAD";
    pub const NOT_CALLABLE: &str = "E_NOT_CALLABLE";
    pub const NO_MAIN: &str = "E_NO_MAIN";
    pub const DECL_MISMATCH: &str = "E_DECL_MISMATCH";
    pub const DUP_PARAM: &str = "E_DUP_PARAM";
    pub const SETP_GLOBAL: &str = "E_SETP_GLOBAL";
    pub const GETA_BEFORE_SYNC: &str = "E_GETA_BEFORE_SYNC";
    pub const GETA_AFTER_DETACH: &str = "E_GETA_AFTER_DETACH";
    pub const SIG_MISMATCH: &str = "E_SIG_MISMATCH";
    pub const SETA_OUTSIDE: &str = "E_SETA_OUTSIDE";
    pub const UNFED_CHANNEL: &str = "E_UNFED_CHANNEL";
    pub const UNDEF_CHANNEL: &str = "E_UNDEF_CHANNEL";
    pub const DOUBLE_SETP: &str = "E_DOUBLE_SETP";
    pub const DOUBLE_SETA: &str = "E_DOUBLE_SETA";
    pub const INDEX_OUTSIDE: &str = "E_INDEX_OUTSIDE";
    pub const DUP_INDEX: &str = "E_DUP_INDEX";
    pub const UNDEF_VAR: &str = "E_UNDEF_VAR";
    pub const REDECL: &str = "E_REDECL";
    pub const ARITY: &str = "E_ARITY";
    pub const TYPE: &str = "E_TYPE";
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    #[serde(serialize_with = "span_string")]
    pub span: SourceSpan,
}

fn span_string<S: serde::Serializer>(span: &SourceSpan, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&span.to_string())
}

impl Diagnostic {
    pub fn error(code: &'static str, span: &SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span: span.clone(),
        }
    }
}

impl From<SyntaxError> for Diagnostic {
    fn from(e: SyntaxError) -> Self {
        Diagnostic::error(codes::SYNTAX, &e.span, e.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}: {} [{}]",
            self.span, self.severity, self.message, self.code
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Parse, resolve and check `source`. Returns the AST and symbols, or every
/// diagnostic found.
pub fn analyze(source: &str, file: &str) -> Result<(AstProgram, SymbolTable), Vec<Diagnostic>> {
    let ast = frontend::parse_source(source, file).map_err(|e| vec![Diagnostic::from(e)])?;
    let symbols = resolve(&ast)?;
    let diags = check_channels(&ast, &symbols);
    if has_errors(&diags) {
        return Err(diags);
    }
    Ok((ast, symbols))
}

/// Full pipeline from source text to lowered IR.
pub fn compile(source: &str, file: &str) -> Result<IrProgram, Vec<Diagnostic>> {
    let (ast, symbols) = analyze(source, file)?;
    Ok(lower::lower(&ast, &symbols))
}

/// Parse, resolve and lower without the body rules. Lets tests reach
/// runtime behaviour that the checker would reject.
pub fn compile_unchecked(source: &str, file: &str) -> Result<IrProgram, Vec<Diagnostic>> {
    let ast = frontend::parse_source(source, file).map_err(|e| vec![Diagnostic::from(e)])?;
    let symbols = resolve(&ast)?;
    Ok(lower::lower(&ast, &symbols))
}

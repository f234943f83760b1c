//! Tokenizer for SL-mini source text.
//!
//! SL constructs are recognized without looking at the surrounding C text:
//! a keyword is a whole identifier-shaped word found in [`SL_KEYWORDS`] or
//! [`C_KEYWORDS`]. Everything else shaped like a word is an identifier.

use std::fmt;
use std::sync::Arc;

use super::SyntaxError;

/// Keywords introduced by the SL extension.
pub const SL_KEYWORDS: &[&str] = &[
    "sl_def",
    "sl_enddef",
    "sl_decl",
    "sl_create",
    "sl_sync",
    "sl_detach",
    "sl_index",
    "sl_getp",
    "sl_setp",
    "sl_geta",
    "sl_seta",
    "sl_glparm",
    "sl_shparm",
    "sl_glfparm",
    "sl_shfparm",
    "sl_glarg",
    "sl_sharg",
    "sl_glfarg",
    "sl_shfarg",
    "sl__static",
    "sl__exclusive",
    "sl__forcewait",
    "sl__forceseq",
];

/// Host-language keywords of the C subset, including the type names.
pub const C_KEYWORDS: &[&str] = &[
    "int",
    "long",
    "unsigned",
    "size_t",
    "sl_place_t",
    "sl_placement_t",
    "float",
    "double",
    "void",
    "if",
    "else",
    "while",
    "for",
    "return",
];

pub fn is_sl_keyword(word: &str) -> bool {
    SL_KEYWORDS.contains(&word)
}

pub fn is_keyword(word: &str) -> bool {
    is_sl_keyword(word) || C_KEYWORDS.contains(&word)
}

/// Position of a token or AST node. Lines and columns are 1-based; columns
/// count characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, column: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        SourceSpan { file, line, column }
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan {
            file: Arc::from(""),
            line: 1,
            column: 1,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    IntLiteral,
    FloatLiteral,
    StringLiteral,
    Punct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Raw source text of the token (string literals keep quotes and escapes).
    pub text: String,
    pub span: SourceSpan,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == k
    }
}

const PUNCT2: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "++", "--",
];
const PUNCT1: &str = "(){}[],;+-*/%<>=!";

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    file: Arc<str>,
}

impl Cursor {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span(&self) -> SourceSpan {
        SourceSpan::new(self.file.clone(), self.line, self.column)
    }

    fn at_line_start(&self) -> bool {
        self.chars[..self.pos]
            .iter()
            .rev()
            .take_while(|&&c| c != '\n')
            .all(|c| c.is_whitespace())
    }
}

/// Split `source` into tokens. Whitespace, comments and preprocessor lines
/// (`#include ...`) are dropped.
pub fn tokenize(source: &str, file: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 1,
        file: Arc::from(file),
    };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let span = cur.span();
        if c == '#' && cur.at_line_start() {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.peek() {
                    None => return Err(SyntaxError::new(span, "unterminated comment")),
                    Some('*') if cur.peek_at(1) == Some('/') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let kind = if is_keyword(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            out.push(Token { kind, text, span });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            out.push(lex_number(&mut cur, span)?);
            continue;
        }
        if c == '"' {
            let mut text = String::from('"');
            cur.bump();
            loop {
                match cur.peek() {
                    None | Some('\n') => {
                        return Err(SyntaxError::new(span, "unterminated string literal"))
                    }
                    Some('\\') => {
                        text.push('\\');
                        cur.bump();
                        match cur.peek() {
                            None | Some('\n') => {
                                return Err(SyntaxError::new(span, "unterminated string literal"))
                            }
                            Some(e) => {
                                text.push(e);
                                cur.bump();
                            }
                        }
                    }
                    Some('"') => {
                        text.push('"');
                        cur.bump();
                        break;
                    }
                    Some(other) => {
                        text.push(other);
                        cur.bump();
                    }
                }
            }
            out.push(Token {
                kind: TokenKind::StringLiteral,
                text,
                span,
            });
            continue;
        }
        if let Some(next) = cur.peek_at(1) {
            let pair: String = [c, next].iter().collect();
            if PUNCT2.contains(&pair.as_str()) {
                cur.bump();
                cur.bump();
                out.push(Token {
                    kind: TokenKind::Punct,
                    text: pair,
                    span,
                });
                continue;
            }
        }
        if PUNCT1.contains(c) {
            cur.bump();
            out.push(Token {
                kind: TokenKind::Punct,
                text: c.to_string(),
                span,
            });
            continue;
        }
        return Err(SyntaxError::new(
            span,
            format!("illegal character {:?}", c),
        ));
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor, span: SourceSpan) -> Result<Token, SyntaxError> {
    let mut text = String::new();
    let mut is_float = false;
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() {
            text.push(c);
            cur.bump();
        } else if c == '.' && !is_float {
            is_float = true;
            text.push(c);
            cur.bump();
        } else if (c == 'e' || c == 'E')
            && (cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                || (matches!(cur.peek_at(1), Some('+') | Some('-'))
                    && cur.peek_at(2).is_some_and(|d| d.is_ascii_digit())))
        {
            is_float = true;
            text.push(c);
            cur.bump();
            if let Some(sign @ ('+' | '-')) = cur.peek() {
                text.push(sign);
                cur.bump();
            }
        } else {
            break;
        }
    }
    if cur.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
        return Err(SyntaxError::new(
            span,
            format!("malformed number literal starting with {:?}", text),
        ));
    }
    if is_float {
        if text.parse::<f64>().is_err() {
            return Err(SyntaxError::new(span, "malformed float literal"));
        }
        Ok(Token {
            kind: TokenKind::FloatLiteral,
            text,
            span,
        })
    } else {
        if text.parse::<i64>().is_err() {
            return Err(SyntaxError::new(span, "integer literal out of range"));
        }
        Ok(Token {
            kind: TokenKind::IntLiteral,
            text,
            span,
        })
    }
}

/// Decode the escapes of a string literal token (quotes included).
pub fn unescape_string(raw: &str) -> String {
    let inner = raw
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(raw);
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('\\') => out.push('\\'),
            Some('"') => out.push('"'),
            Some('\'') => out.push('\''),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Inverse of [`unescape_string`]; returns the literal with quotes.
pub fn escape_string(s: &str) -> String {
    let mut out = String::from('"');
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_text(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src, "t.sl")
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn sync_statement() {
        assert_eq!(
            kinds_and_text("sl_sync();"),
            vec![
                (TokenKind::Keyword, "sl_sync".into()),
                (TokenKind::Punct, "(".into()),
                (TokenKind::Punct, ")".into()),
                (TokenKind::Punct, ";".into()),
            ]
        );
    }

    #[test]
    fn keywords_are_whole_words() {
        assert_eq!(
            kinds_and_text("slx_create("),
            vec![
                (TokenKind::Identifier, "slx_create".into()),
                (TokenKind::Punct, "(".into()),
            ]
        );
        assert_eq!(kinds_and_text("sl_createx")[0].0, TokenKind::Identifier);
    }

    #[test]
    fn comments_and_preprocessor_are_dropped() {
        let toks = kinds_and_text("#include <stdio.h>\n// c\nint /* x */ y;");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[0].1, "int");
    }

    #[test]
    fn spans_are_one_based() {
        let toks = tokenize("a\n  b", "f.sl").unwrap();
        assert_eq!((toks[0].span.line, toks[0].span.column), (1, 1));
        assert_eq!((toks[1].span.line, toks[1].span.column), (2, 3));
        assert_eq!(toks[1].span.to_string(), "f.sl:2:3");
    }

    #[test]
    fn lexical_errors_carry_spans() {
        let e = tokenize("x = \"abc", "f.sl").unwrap_err();
        assert!(e.message.contains("unterminated string"));
        assert_eq!((e.span.line, e.span.column), (1, 5));
        let e = tokenize("/* open", "f.sl").unwrap_err();
        assert!(e.message.contains("unterminated comment"));
        let e = tokenize("a @ b", "f.sl").unwrap_err();
        assert_eq!(e.span.column, 3);
    }

    #[test]
    fn numbers() {
        let toks = kinds_and_text("3 3.0 .5 1e3 2.5e-2");
        assert_eq!(toks[0].0, TokenKind::IntLiteral);
        assert!(toks[1..].iter().all(|t| t.0 == TokenKind::FloatLiteral));
        assert!(tokenize("12abc", "f").is_err());
    }

    #[test]
    fn string_escapes_round_trip() {
        let s = "hello world\n\t\"q\"\\";
        assert_eq!(unescape_string(&escape_string(s)), s);
        assert_eq!(unescape_string("\"a\\nb\""), "a\nb");
    }
}

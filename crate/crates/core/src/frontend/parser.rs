//! Recursive-descent parser for SL-mini.
//!
//! SL constructs (`sl_def`, `sl_create`, channel specs, ...) are handled the
//! way the original toolchain did it: keyword, opening parenthesis, then a
//! list of comma-separated token slices split at top-level commas. Each slice
//! is parsed on its own. Plain C statements and expressions use an ordinary
//! precedence-climbing parser.

use super::ast::*;
use super::token::{unescape_string, SourceSpan, Token, TokenKind};
use super::SyntaxError;

type PResult<T> = Result<T, SyntaxError>;

const CREATE_SLOTS: usize = 7;

/// Split the tokens found between the parentheses of an SL construct at
/// top-level commas. Empty slices are kept: they stand for defaulted slots.
/// An empty input yields a single empty slice.
pub fn split_arguments(tokens: &[Token]) -> PResult<Vec<&[Token]>> {
    let mut slices = Vec::new();
    let mut stack: Vec<&Token> = Vec::new();
    let mut start = 0;
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Punct {
            continue;
        }
        match tok.text.as_str() {
            "(" | "[" | "{" => stack.push(tok),
            ")" | "]" | "}" => {
                let open = stack.pop().ok_or_else(|| {
                    SyntaxError::new(tok.span.clone(), format!("unbalanced '{}'", tok.text))
                })?;
                if closing_for(&open.text) != tok.text {
                    return Err(SyntaxError::new(
                        tok.span.clone(),
                        format!("'{}' does not match '{}' opened at {}", tok.text, open.text, open.span),
                    ));
                }
            }
            "," if stack.is_empty() => {
                slices.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(SyntaxError::new(
            open.span.clone(),
            format!("unbalanced '{}'", open.text),
        ));
    }
    slices.push(&tokens[start..]);
    Ok(slices)
}

fn closing_for(open: &str) -> &'static str {
    match open {
        "(" => ")",
        "[" => "]",
        _ => "}",
    }
}

/// Parse a whole token stream into a program.
pub fn parse_program(tokens: &[Token]) -> PResult<AstProgram> {
    let eof = tokens
        .last()
        .map(|t| t.span.clone())
        .unwrap_or_default();
    let mut p = Parser::new(tokens, eof);
    let mut items = Vec::new();
    while !p.at_end() {
        items.push(p.item()?);
    }
    Ok(AstProgram { items })
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    /// Span reported when input runs out.
    end_span: SourceSpan,
}

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token], end_span: SourceSpan) -> Self {
        Parser {
            toks,
            pos: 0,
            end_span,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn span(&self) -> SourceSpan {
        self.peek()
            .map(|t| t.span.clone())
            .unwrap_or_else(|| self.end_span.clone())
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(SyntaxError::new(self.span(), msg))
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => format!("'{}'", t.text),
            None => "end of input".to_string(),
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<&'t Token> {
        if self.at_punct(p) {
            Ok(self.bump().unwrap())
        } else {
            self.error(format!("expected '{}', found {}", p, self.found()))
        }
    }

    fn expect_ident(&mut self) -> PResult<Ident> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(Ident::new(t.text.clone(), t.span.clone()))
            }
            _ => self.error(format!("expected identifier, found {}", self.found())),
        }
    }

    fn expect_end(&self, what: &str) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.error(format!("unexpected {} in {}", self.found(), what))
        }
    }

    /// Consume `keyword ( ... )` and return the argument slices plus the
    /// keyword's span.
    fn construct_args(&mut self) -> PResult<(SourceSpan, Vec<&'t [Token]>)> {
        let kw = self.bump().expect("caller checked keyword");
        let open = self.expect_punct("(")?;
        let inner_start = self.pos;
        let mut depth = 1usize;
        while depth > 0 {
            match self.bump() {
                None => {
                    return Err(SyntaxError::new(
                        open.span.clone(),
                        format!("unbalanced '(' after {}", kw.text),
                    ))
                }
                Some(t) if t.is_punct("(") => depth += 1,
                Some(t) if t.is_punct(")") => depth -= 1,
                _ => {}
            }
        }
        let inner = &self.toks[inner_start..self.pos - 1];
        Ok((kw.span.clone(), split_arguments(inner)?))
    }

    // ---- top level -------------------------------------------------------

    fn item(&mut self) -> PResult<Item> {
        let tok = self.peek().unwrap();
        if tok.is_keyword("sl_def") {
            return self.thread_def().map(Item::ThreadDef);
        }
        if tok.is_keyword("sl_decl") {
            return self.thread_decl().map(Item::ThreadDecl);
        }
        if is_type_start(tok) {
            return self.function_def().map(Item::Function);
        }
        self.error(format!(
            "expected a function or thread function definition, found {}",
            self.found()
        ))
    }

    fn thread_header(
        &mut self,
        allow_arg_spelling: bool,
    ) -> PResult<(SourceSpan, Ident, bool, Vec<ChannelParam>)> {
        let (span, slices) = self.construct_args()?;
        let name = single_ident(slices[0], &span, "thread function name")?;
        let mut is_static = false;
        if let Some(spec) = slices.get(1) {
            match spec {
                [] => {}
                [t] if t.is_keyword("sl__static") => is_static = true,
                [t, ..] => {
                    return Err(SyntaxError::new(
                        t.span.clone(),
                        format!("expected sl__static or nothing, found '{}'", t.text),
                    ))
                }
            }
        }
        let mut params = Vec::new();
        for slice in slices.iter().skip(2) {
            params.push(channel_param(slice, &span, allow_arg_spelling)?);
        }
        Ok((span, name, is_static, params))
    }

    fn thread_def(&mut self) -> PResult<ThreadFunctionDef> {
        let (span, name, is_static, params) = self.thread_header(false)?;
        if !self.at_punct("{") {
            return self.error(format!(
                "expected '{{' to open the body of thread function '{}', found {}",
                name.name,
                self.found()
            ));
        }
        let body = self.block()?;
        match self.peek() {
            Some(t) if t.is_keyword("sl_enddef") => {
                self.pos += 1;
            }
            Some(t) if t.text == "sl_endif" => {
                return Err(SyntaxError::new(
                    t.span.clone(),
                    format!(
                        "missing sl_enddef after thread function '{}' (found sl_endif)",
                        name.name
                    ),
                ))
            }
            _ => {
                return self.error(format!(
                    "missing sl_enddef after thread function '{}', found {}",
                    name.name,
                    self.found()
                ))
            }
        }
        Ok(ThreadFunctionDef {
            name,
            is_static,
            params,
            body,
            span,
        })
    }

    fn thread_decl(&mut self) -> PResult<ThreadFunctionDecl> {
        let (span, name, is_static, params) = self.thread_header(true)?;
        self.expect_punct(";")?;
        Ok(ThreadFunctionDecl {
            name,
            is_static,
            params,
            span,
        })
    }

    fn function_def(&mut self) -> PResult<FunctionDef> {
        let span = self.span();
        let base = self.base_type()?;
        let pointer = self.eat_punct("*");
        let ret = CType { base, pointer };
        let name = self.expect_ident()?;
        if !self.at_punct("(") {
            return self.error(format!(
                "expected '(' after '{}' (global variables are not supported)",
                name.name
            ));
        }
        self.bump();
        let mut params = Vec::new();
        let void_only = self.at_keyword("void") && self.peek_at(1).is_some_and(|t| t.is_punct(")"));
        if void_only {
            self.bump();
        }
        if !self.at_punct(")") {
            loop {
                let base = self.base_type()?;
                let pointer = self.eat_punct("*");
                let pname = self.expect_ident()?;
                if base == BaseType::Void && !pointer {
                    return Err(SyntaxError::new(
                        pname.span,
                        "parameter cannot have type void",
                    ));
                }
                params.push(Param {
                    ty: CType { base, pointer },
                    name: pname,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(FunctionDef {
            ret,
            name,
            params,
            body,
            span,
        })
    }

    fn base_type(&mut self) -> PResult<BaseType> {
        let t = match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => t,
            _ => return self.error(format!("expected a type, found {}", self.found())),
        };
        let base = match t.text.as_str() {
            "int" => BaseType::Int,
            "long" => {
                if self.peek_at(1).is_some_and(|n| n.is_keyword("int")) {
                    self.pos += 1;
                }
                BaseType::Long
            }
            "unsigned" => {
                if self.peek_at(1).is_some_and(|n| n.is_keyword("int")) {
                    self.pos += 1;
                }
                BaseType::UnsignedInt
            }
            "size_t" => BaseType::SizeT,
            "sl_place_t" | "sl_placement_t" => BaseType::PlaceT,
            "float" => BaseType::Float,
            "double" => BaseType::Double,
            "void" => BaseType::Void,
            _ => return self.error(format!("expected a type, found {}", self.found())),
        };
        self.pos += 1;
        Ok(base)
    }

    // ---- statements ------------------------------------------------------

    fn block(&mut self) -> PResult<Block> {
        let open = self.expect_punct("{")?;
        let mut items = Vec::new();
        loop {
            if self.at_end() {
                return Err(SyntaxError::new(open.span.clone(), "unterminated block"));
            }
            if self.eat_punct("}") {
                break;
            }
            items.push(self.block_item()?);
        }
        Ok(Block {
            items,
            span: open.span.clone(),
        })
    }

    fn block_item(&mut self) -> PResult<Stmt> {
        let tok = self.peek().unwrap();
        if tok.is_keyword("sl_create") {
            return self.create();
        }
        if is_type_start(tok) {
            let span = tok.span.clone();
            let decl = self.declaration()?;
            self.expect_punct(";")?;
            return Ok(Stmt {
                kind: StmtKind::Decl(decl),
                span,
            });
        }
        self.statement()
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        let base = self.base_type()?;
        if base == BaseType::Void {
            return self.error("variables cannot have type void");
        }
        let mut declarators = Vec::new();
        loop {
            let pointer = self.eat_punct("*");
            let name = self.expect_ident()?;
            let mut array_len = None;
            if self.eat_punct("[") {
                match self.peek() {
                    Some(t) if t.kind == TokenKind::IntLiteral => {
                        let n: u32 = t.text.parse().map_err(|_| {
                            SyntaxError::new(t.span.clone(), "array size out of range")
                        })?;
                        if n == 0 {
                            return Err(SyntaxError::new(t.span.clone(), "array size must be positive"));
                        }
                        self.pos += 1;
                        array_len = Some(n);
                    }
                    _ => return self.error("array size must be an integer literal"),
                }
                self.expect_punct("]")?;
                if pointer {
                    return Err(SyntaxError::new(name.span, "arrays of pointers are not supported"));
                }
            }
            let init = if self.eat_punct("=") {
                if self.at_punct("{") {
                    self.bump();
                    let mut list = Vec::new();
                    if !self.at_punct("}") {
                        loop {
                            list.push(self.expr()?);
                            if !self.eat_punct(",") || self.at_punct("}") {
                                break;
                            }
                        }
                    }
                    self.expect_punct("}")?;
                    Some(Initializer::List(list))
                } else {
                    Some(Initializer::Expr(self.expr()?))
                }
            } else {
                None
            };
            declarators.push(Declarator {
                name,
                pointer,
                array_len,
                init,
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(Declaration { base, declarators })
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let tok = self.peek().unwrap();
        let span = tok.span.clone();
        let kind = match tok.text.as_str() {
            "sl_create" if tok.kind == TokenKind::Keyword => {
                return self.error(
                    "create construct must appear within a compound statement (enclose it in braces)",
                )
            }
            "sl_sync" | "sl_detach" if tok.kind == TokenKind::Keyword => {
                return self.error(format!("{} without a matching sl_create", tok.text))
            }
            "sl_enddef" if tok.kind == TokenKind::Keyword => {
                return self.error("sl_enddef outside of a thread function definition")
            }
            "{" if tok.kind == TokenKind::Punct => StmtKind::Block(self.block()?),
            ";" if tok.kind == TokenKind::Punct => {
                self.bump();
                StmtKind::Empty
            }
            "if" if tok.kind == TokenKind::Keyword => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then = Box::new(self.statement()?);
                let otherwise = if self.at_keyword("else") {
                    self.bump();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then,
                    otherwise,
                }
            }
            "while" if tok.kind == TokenKind::Keyword => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                StmtKind::While { cond, body }
            }
            "for" if tok.kind == TokenKind::Keyword => {
                self.bump();
                self.expect_punct("(")?;
                let init = if self.at_punct(";") {
                    None
                } else if self.peek().is_some_and(is_type_start) {
                    let s = self.span();
                    Some(Box::new(Stmt {
                        kind: StmtKind::Decl(self.declaration()?),
                        span: s,
                    }))
                } else {
                    Some(Box::new(self.simple_statement()?))
                };
                self.expect_punct(";")?;
                let cond = if self.at_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                let step = if self.at_punct(")") {
                    None
                } else {
                    Some(Box::new(self.simple_statement()?))
                };
                self.expect_punct(")")?;
                let body = Box::new(self.statement()?);
                StmtKind::For {
                    init,
                    cond,
                    step,
                    body,
                }
            }
            "return" if tok.kind == TokenKind::Keyword => {
                self.bump();
                let value = if self.at_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                StmtKind::Return(value)
            }
            "sl_setp" | "sl_seta" if tok.kind == TokenKind::Keyword => {
                let is_setp = tok.text == "sl_setp";
                let (kspan, slices) = self.construct_args()?;
                if slices.len() != 2 {
                    return Err(SyntaxError::new(
                        kspan,
                        format!("{} takes a channel name and a value", tok.text),
                    ));
                }
                let name = single_ident(slices[0], &kspan, "channel name")?;
                let value = expr_in_slice(slices[1], &kspan, "channel value")?;
                self.expect_punct(";")?;
                if is_setp {
                    StmtKind::SetP { name, value }
                } else {
                    StmtKind::SetA { name, value }
                }
            }
            "sl_index" if tok.kind == TokenKind::Keyword => {
                let (kspan, slices) = self.construct_args()?;
                if slices.len() != 1 {
                    return Err(SyntaxError::new(kspan, "sl_index takes one identifier"));
                }
                let name = single_ident(slices[0], &kspan, "index variable")?;
                self.expect_punct(";")?;
                StmtKind::Index(name)
            }
            _ if is_type_start(tok) => {
                return self.error("declaration not allowed here (a statement is required)")
            }
            _ => {
                let s = self.simple_statement()?;
                self.expect_punct(";")?;
                return Ok(s);
            }
        };
        Ok(Stmt { kind, span })
    }

    /// Expression, assignment or `x++`/`x--`, without the trailing `;`.
    fn simple_statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let target = self.expr()?;
        let op = match self.peek() {
            Some(t) if t.kind == TokenKind::Punct => match t.text.as_str() {
                "=" => Some(AssignOp::Set),
                "+=" => Some(AssignOp::Add),
                "-=" => Some(AssignOp::Sub),
                "*=" => Some(AssignOp::Mul),
                "/=" => Some(AssignOp::Div),
                "%=" => Some(AssignOp::Rem),
                "++" | "--" => {
                    let increment = t.text == "++";
                    check_lvalue(&target)?;
                    self.bump();
                    return Ok(Stmt {
                        kind: StmtKind::Step { target, increment },
                        span,
                    });
                }
                _ => None,
            },
            _ => None,
        };
        let kind = match op {
            Some(op) => {
                check_lvalue(&target)?;
                self.bump();
                let value = self.expr()?;
                StmtKind::Assign { target, op, value }
            }
            None => StmtKind::Expr(target),
        };
        Ok(Stmt { kind, span })
    }

    fn create(&mut self) -> PResult<Stmt> {
        let (span, slices) = self.construct_args()?;
        self.expect_punct(";")?;
        let head = create_head(&slices, &span)?;
        let mut body = Vec::new();
        let (terminator, terminator_span) = loop {
            match self.peek() {
                None => {
                    return Err(SyntaxError::new(
                        span,
                        "sl_create is missing its sl_sync or sl_detach",
                    ))
                }
                Some(t) if t.is_punct("}") => {
                    return Err(SyntaxError::new(
                        span,
                        "sl_create is missing its sl_sync or sl_detach before the end of the block",
                    ))
                }
                Some(t) if t.is_keyword("sl_sync") || t.is_keyword("sl_detach") => {
                    let term = if t.text == "sl_sync" {
                        Terminator::Sync
                    } else {
                        Terminator::Detach
                    };
                    let (tspan, slices) = self.construct_args()?;
                    if !(slices.len() == 1 && slices[0].is_empty()) {
                        return Err(SyntaxError::new(tspan, format!("{} takes no arguments", t.text)));
                    }
                    self.expect_punct(";")?;
                    break (term, tspan);
                }
                Some(_) => body.push(self.block_item()?),
            }
        };
        let CreateHead {
            placement,
            start,
            limit,
            step,
            window,
            specifier,
            target,
            args,
        } = head;
        Ok(Stmt {
            kind: StmtKind::Create(Box::new(CreateConstruct {
                placement,
                start,
                limit,
                step,
                window,
                specifier,
                target,
                args,
                body,
                terminator,
                terminator_span,
                span: span.clone(),
            })),
            span,
        })
    }

    // ---- expressions -----------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek().and_then(binary_op) {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.clone();
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Neg, Box::new(e)),
                span,
            });
        }
        if self.eat_punct("!") {
            let e = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Not, Box::new(e)),
                span,
            });
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        if self.at_punct("*") || self.peek().is_some_and(|t| t.is_punct("&")) {
            return self.error("pointer dereference and address-of are not supported");
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.at_punct("[") {
            self.bump();
            let idx = self.expr()?;
            self.expect_punct("]")?;
            let span = e.span.clone();
            e = Expr {
                kind: ExprKind::Index(Box::new(e), Box::new(idx)),
                span,
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return self.error("expected an expression, found end of input");
        };
        let span = tok.span.clone();
        let kind = match tok.kind {
            TokenKind::IntLiteral => {
                self.bump();
                ExprKind::Int(tok.text.parse().expect("lexer validated integer"))
            }
            TokenKind::FloatLiteral => {
                self.bump();
                ExprKind::Float(tok.text.parse().expect("lexer validated float"))
            }
            TokenKind::StringLiteral => {
                self.bump();
                ExprKind::Str(unescape_string(&tok.text))
            }
            TokenKind::Identifier => {
                self.bump();
                if self.at_punct("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    ExprKind::Call(Ident::new(tok.text.clone(), span.clone()), args)
                } else {
                    ExprKind::Var(tok.text.clone())
                }
            }
            TokenKind::Keyword if tok.text == "sl_getp" || tok.text == "sl_geta" => {
                let (kspan, slices) = self.construct_args()?;
                if slices.len() != 1 {
                    return Err(SyntaxError::new(
                        kspan,
                        format!("{} takes one channel name", tok.text),
                    ));
                }
                let name = single_ident(slices[0], &kspan, "channel name")?;
                if tok.text == "sl_getp" {
                    ExprKind::GetP(name)
                } else {
                    ExprKind::GetA(name)
                }
            }
            TokenKind::Punct if tok.text == "(" => {
                self.bump();
                let mut e = self.expr()?;
                self.expect_punct(")")?;
                e.span = span;
                return Ok(e);
            }
            _ => return self.error(format!("expected an expression, found {}", self.found())),
        };
        Ok(Expr { kind, span })
    }
}

fn binary_op(t: &Token) -> Option<BinaryOp> {
    if t.kind != TokenKind::Punct {
        return None;
    }
    Some(match t.text.as_str() {
        "+" => BinaryOp::Add,
        "-" => BinaryOp::Sub,
        "*" => BinaryOp::Mul,
        "/" => BinaryOp::Div,
        "%" => BinaryOp::Rem,
        "<" => BinaryOp::Lt,
        "<=" => BinaryOp::Le,
        ">" => BinaryOp::Gt,
        ">=" => BinaryOp::Ge,
        "==" => BinaryOp::Eq,
        "!=" => BinaryOp::Ne,
        "&&" => BinaryOp::And,
        "||" => BinaryOp::Or,
        _ => return None,
    })
}

fn is_type_start(t: &Token) -> bool {
    t.kind == TokenKind::Keyword
        && matches!(
            t.text.as_str(),
            "int" | "long" | "unsigned" | "size_t" | "sl_place_t" | "sl_placement_t" | "float" | "double" | "void"
        )
}

fn check_lvalue(e: &Expr) -> PResult<()> {
    match e.kind {
        ExprKind::Var(_) | ExprKind::Index(..) => Ok(()),
        _ => Err(SyntaxError::new(e.span.clone(), "invalid assignment target")),
    }
}

fn slice_span(slice: &[Token], fallback: &SourceSpan) -> SourceSpan {
    slice
        .first()
        .map(|t| t.span.clone())
        .unwrap_or_else(|| fallback.clone())
}

fn single_ident(slice: &[Token], ctx: &SourceSpan, what: &str) -> PResult<Ident> {
    match slice {
        [t] if t.kind == TokenKind::Identifier => Ok(Ident::new(t.text.clone(), t.span.clone())),
        _ => Err(SyntaxError::new(
            slice_span(slice, ctx),
            format!("expected {} (an identifier)", what),
        )),
    }
}

fn expr_in_slice(slice: &[Token], ctx: &SourceSpan, what: &str) -> PResult<Expr> {
    if slice.is_empty() {
        return Err(SyntaxError::new(ctx.clone(), format!("missing {}", what)));
    }
    let end = slice.last().unwrap().span.clone();
    let mut p = Parser::new(slice, end);
    let e = p.expr()?;
    p.expect_end(what)?;
    Ok(e)
}

/// Normalized text and parsed type of a channel's declared type.
fn channel_type(slice: &[Token], ctx: &SourceSpan) -> PResult<(String, CType)> {
    if slice.is_empty() {
        return Err(SyntaxError::new(ctx.clone(), "missing channel type"));
    }
    let end = slice.last().unwrap().span.clone();
    let mut p = Parser::new(slice, end);
    let base = p.base_type()?;
    let pointer = p.eat_punct("*");
    p.expect_end("channel type")?;
    if base == BaseType::Void && !pointer {
        return Err(SyntaxError::new(slice[0].span.clone(), "channel cannot carry void"));
    }
    Ok((normalize_type_text(slice), CType { base, pointer }))
}

pub(crate) fn normalize_type_text(slice: &[Token]) -> String {
    let mut out = String::new();
    for t in slice {
        if !out.is_empty() && t.text != "*" {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

struct ChannelKeyword {
    direction: Direction,
    float: bool,
    is_arg: bool,
}

fn channel_keyword(t: &Token) -> Option<ChannelKeyword> {
    if t.kind != TokenKind::Keyword {
        return None;
    }
    let (direction, float, is_arg) = match t.text.as_str() {
        "sl_glparm" => (Direction::Global, false, false),
        "sl_shparm" => (Direction::Shared, false, false),
        "sl_glfparm" => (Direction::Global, true, false),
        "sl_shfparm" => (Direction::Shared, true, false),
        "sl_glarg" => (Direction::Global, false, true),
        "sl_sharg" => (Direction::Shared, false, true),
        "sl_glfarg" => (Direction::Global, true, true),
        "sl_shfarg" => (Direction::Shared, true, true),
        _ => return None,
    };
    Some(ChannelKeyword {
        direction,
        float,
        is_arg,
    })
}

fn value_class_for(kw: &ChannelKeyword, ty: CType, keyword: &Token) -> PResult<ValueClass> {
    let class = ty.value_class();
    match (kw.float, class) {
        (true, ValueClass::FloatScalar) => Ok(ValueClass::FloatScalar),
        (true, _) => Err(SyntaxError::new(
            keyword.span.clone(),
            format!("{} requires a floating-point scalar type", keyword.text),
        )),
        (false, ValueClass::FloatScalar) => Err(SyntaxError::new(
            keyword.span.clone(),
            format!(
                "floating-point channels must use the {} keyword, not {}",
                keyword.text.replacen("sl_gl", "sl_glf", 1).replacen("sl_sh", "sl_shf", 1),
                keyword.text
            ),
        )),
        (false, c) => Ok(c),
    }
}

/// Split `kw ( inner )` occupying a whole slice into the keyword token and
/// its inner argument slices.
fn construct_in_slice<'t>(slice: &'t [Token], ctx: &SourceSpan) -> PResult<(&'t Token, Vec<&'t [Token]>)> {
    let end = slice_span(slice, ctx);
    let mut p = Parser::new(slice, end);
    let (_, inner) = p.construct_args()?;
    p.expect_end("channel specification")?;
    Ok((&slice[0], inner))
}

fn channel_param(slice: &[Token], ctx: &SourceSpan, allow_arg_spelling: bool) -> PResult<ChannelParam> {
    let kw = slice.first().and_then(channel_keyword).ok_or_else(|| {
        SyntaxError::new(
            slice_span(slice, ctx),
            "expected a channel parameter (sl_glparm, sl_shparm, sl_glfparm or sl_shfparm)",
        )
    })?;
    if kw.is_arg && !allow_arg_spelling {
        return Err(SyntaxError::new(
            slice[0].span.clone(),
            format!("{} is only valid in sl_create and sl_decl", slice[0].text),
        ));
    }
    let (kw_tok, inner) = construct_in_slice(slice, ctx)?;
    if inner.len() != 2 {
        return Err(SyntaxError::new(
            kw_tok.span.clone(),
            format!("{} takes a type and a name", kw_tok.text),
        ));
    }
    let (declared_type, ty) = channel_type(inner[0], &kw_tok.span)?;
    let name = single_ident(inner[1], &kw_tok.span, "channel name")?;
    let value_class = value_class_for(&kw, ty, kw_tok)?;
    Ok(ChannelParam {
        direction: kw.direction,
        value_class,
        declared_type,
        ty,
        name,
        span: kw_tok.span.clone(),
    })
}

fn channel_arg(slice: &[Token], ctx: &SourceSpan) -> PResult<ChannelArg> {
    let kw = slice.first().and_then(channel_keyword).filter(|k| k.is_arg).ok_or_else(|| {
        SyntaxError::new(
            slice_span(slice, ctx),
            "expected a channel argument (sl_glarg, sl_sharg, sl_glfarg or sl_shfarg)",
        )
    })?;
    let (kw_tok, inner) = construct_in_slice(slice, ctx)?;
    if !(2..=3).contains(&inner.len()) {
        return Err(SyntaxError::new(
            kw_tok.span.clone(),
            format!("{} takes a type, an optional name and an optional value", kw_tok.text),
        ));
    }
    let (declared_type, ty) = channel_type(inner[0], &kw_tok.span)?;
    let name = if inner[1].is_empty() {
        None
    } else {
        Some(single_ident(inner[1], &kw_tok.span, "channel name")?)
    };
    let init = match inner.get(2) {
        Some(s) => Some(expr_in_slice(s, &kw_tok.span, "channel initializer")?),
        None => None,
    };
    if name.is_none() && init.is_none() {
        return Err(SyntaxError::new(
            kw_tok.span.clone(),
            "an anonymous channel argument must provide a value",
        ));
    }
    let value_class = value_class_for(&kw, ty, kw_tok)?;
    Ok(ChannelArg {
        direction: kw.direction,
        value_class,
        declared_type,
        ty,
        name,
        init,
        span: kw_tok.span.clone(),
    })
}

struct CreateHead {
    placement: Option<Expr>,
    start: Option<Expr>,
    limit: Option<Expr>,
    step: Option<Expr>,
    window: Option<Expr>,
    specifier: Option<CreateSpecifier>,
    target: Ident,
    args: Vec<ChannelArg>,
}

fn specifier_in(slice: &[Token]) -> Option<CreateSpecifier> {
    match slice {
        [t] if t.kind == TokenKind::Keyword => CreateSpecifier::from_keyword(&t.text),
        _ => None,
    }
}

/// Interpret the slices of `sl_create(...)`:
/// `[reserved], placement, start, limit, step, ws, specifier, target, args...`.
/// Fewer than seven leading slots are accepted; missing trailing slots are
/// absent, and a specifier keyword may close a shortened list.
fn create_head(slices: &[&[Token]], span: &SourceSpan) -> PResult<CreateHead> {
    let first_arg = slices
        .iter()
        .position(|s| s.first().and_then(channel_keyword).is_some())
        .unwrap_or(slices.len());
    for s in &slices[first_arg..] {
        if s.first().and_then(channel_keyword).is_none() {
            return Err(SyntaxError::new(
                slice_span(s, span),
                "channel arguments must follow the thread function name",
            ));
        }
    }
    if first_arg == 0 {
        return Err(SyntaxError::new(span.clone(), "sl_create requires a thread function name"));
    }
    let target = single_ident(slices[first_arg - 1], span, "thread function name")?;
    let mut pre: Vec<&[Token]> = slices[..first_arg - 1].to_vec();
    if pre.is_empty() {
        return Err(SyntaxError::new(
            span.clone(),
            "sl_create requires its leading empty parameter before the thread function name",
        ));
    }
    if pre.len() > CREATE_SLOTS {
        return Err(SyntaxError::new(
            span.clone(),
            format!(
                "sl_create takes at most {} parameters before the thread function name, found {}",
                CREATE_SLOTS,
                pre.len()
            ),
        ));
    }
    if !pre[0].is_empty() {
        return Err(SyntaxError::new(
            pre[0][0].span.clone(),
            "the first parameter of sl_create is reserved and must be empty",
        ));
    }
    let mut specifier = None;
    if pre.len() == CREATE_SLOTS {
        let last = pre.pop().unwrap();
        if !last.is_empty() {
            specifier = Some(specifier_in(last).ok_or_else(|| {
                SyntaxError::new(
                    last[0].span.clone(),
                    "expected sl__exclusive, sl__forceseq or sl__forcewait",
                )
            })?);
        }
    } else if let Some(spec) = pre.last().and_then(|s| specifier_in(s)) {
        specifier = Some(spec);
        pre.pop();
    }
    for s in &pre {
        if let Some(t) = s.iter().find(|t| CreateSpecifier::from_keyword(&t.text).is_some()) {
            return Err(SyntaxError::new(
                t.span.clone(),
                format!("{} must be the last parameter before the thread function name", t.text),
            ));
        }
    }
    let slot = |i: usize, what: &str| -> PResult<Option<Expr>> {
        match pre.get(i) {
            Some(s) if !s.is_empty() => Ok(Some(expr_in_slice(s, span, what)?)),
            _ => Ok(None),
        }
    };
    let placement = slot(1, "placement")?;
    let start = slot(2, "start index")?;
    let limit = slot(3, "limit index")?;
    let step = slot(4, "step")?;
    let window = slot(5, "window size")?;
    let mut args = Vec::new();
    for s in &slices[first_arg..] {
        args.push(channel_arg(s, span)?);
    }
    Ok(CreateHead {
        placement,
        start,
        limit,
        step,
        window,
        specifier,
        target,
        args,
    })
}

//! Semantic checks over function bodies: variables, calls, and the channel
//! endpoint rules of thread functions and create constructs.

use std::collections::{BTreeMap, BTreeSet};

use super::resolve::{builtin_arity, SymbolTable};
use super::{codes, Diagnostic};
use crate::frontend::ast::*;
use crate::frontend::SourceSpan;

/// Run every body check. Assumes `symbols` came from a successful resolve.
pub fn check_channels(program: &AstProgram, symbols: &SymbolTable) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for item in &program.items {
        match item {
            Item::ThreadDef(d) => {
                let mut c = Checker::new(symbols, &mut diags);
                c.params = Some(&d.params);
                c.check_double_setp(&d.body);
                c.block(&d.body);
            }
            Item::Function(f) => {
                let mut c = Checker::new(symbols, &mut diags);
                c.ret = Some(f.ret);
                for p in &f.params {
                    let ty = if p.ty.pointer {
                        VarType::Pointer
                    } else {
                        VarType::Scalar(p.ty.value_class())
                    };
                    c.declare(&p.name, ty);
                }
                c.block(&f.body);
            }
            Item::ThreadDecl(_) => {}
        }
    }
    diags
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarType {
    Scalar(ValueClass),
    Pointer,
    Array,
}

/// Static shape of an expression.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Float,
    /// Scalar of unknown class (array elements read through a handle).
    Scalar,
    Handle,
    Void,
    Unknown,
}

impl Ty {
    fn of_class(c: ValueClass) -> Ty {
        match c {
            ValueClass::IntegerScalar => Ty::Int,
            ValueClass::FloatScalar => Ty::Float,
            ValueClass::ArrayHandle => Ty::Handle,
        }
    }

    fn is_scalar(self) -> bool {
        matches!(self, Ty::Int | Ty::Float | Ty::Scalar | Ty::Unknown)
    }

    fn is_handle(self) -> bool {
        matches!(self, Ty::Handle | Ty::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Open,
    Synced,
    Detached,
}

struct Endpoint {
    class: ValueClass,
    phase: Phase,
}

#[derive(Default)]
struct Scope {
    vars: BTreeMap<String, VarType>,
    endpoints: BTreeMap<String, usize>,
}

struct Checker<'a, 'd> {
    symbols: &'a SymbolTable,
    diags: &'d mut Vec<Diagnostic>,
    params: Option<&'a [ChannelParam]>,
    ret: Option<CType>,
    scopes: Vec<Scope>,
    endpoints: Vec<Endpoint>,
    /// Names targeted by `sl_seta` where no open endpoint existed.
    misplaced_seta: BTreeSet<String>,
    index_seen: bool,
}

impl<'a, 'd> Checker<'a, 'd> {
    fn new(symbols: &'a SymbolTable, diags: &'d mut Vec<Diagnostic>) -> Self {
        Checker {
            symbols,
            diags,
            params: None,
            ret: None,
            scopes: vec![Scope::default()],
            endpoints: Vec::new(),
            misplaced_seta: BTreeSet::new(),
            index_seen: false,
        }
    }

    fn err(&mut self, code: &'static str, span: &SourceSpan, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn declare(&mut self, name: &Ident, ty: VarType) {
        let scope = self.scopes.last_mut().unwrap();
        if scope.vars.contains_key(&name.name) {
            let msg = format!("'{}' is already declared in this scope", name.name);
            self.err(codes::REDECL, &name.span, msg);
            return;
        }
        scope.vars.insert(name.name.clone(), ty);
    }

    fn var(&self, name: &str) -> Option<VarType> {
        self.scopes.iter().rev().find_map(|s| s.vars.get(name).copied())
    }

    fn endpoint(&self, name: &str) -> Option<usize> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.endpoints.get(name).copied())
    }

    fn param(&self, name: &str) -> Option<&'a ChannelParam> {
        self.params
            .and_then(|ps| ps.iter().find(|p| p.name.name == name))
    }

    /// Two `sl_setp` on one channel in the straight-line part of a thread
    /// body can never both succeed.
    fn check_double_setp(&mut self, body: &Block) {
        let mut seen = BTreeSet::new();
        for s in &body.items {
            if let StmtKind::SetP { name, .. } = &s.kind {
                if self.param(&name.name).is_some() && !seen.insert(name.name.clone()) {
                    let msg = format!("channel '{}' is written more than once by sl_setp", name.name);
                    self.err(codes::DOUBLE_SETP, &s.span, msg);
                }
            }
        }
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push(Scope::default());
        for s in &b.items {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(d) => self.declaration(d),
            StmtKind::Assign { target, op, value } => {
                let vt = self.value(value);
                match &target.kind {
                    ExprKind::Var(name) => match self.var(name) {
                        None => {
                            self.err(codes::UNDEF_VAR, &target.span, format!("undefined variable '{}'", name))
                        }
                        Some(VarType::Array) => {
                            self.err(codes::TYPE, &target.span, format!("cannot assign to array '{}'", name))
                        }
                        Some(VarType::Pointer) => {
                            if *op != AssignOp::Set {
                                self.err(codes::TYPE, &target.span, "pointer arithmetic is not supported");
                            } else if !vt.is_handle() {
                                self.err(codes::TYPE, &value.span, format!("'{}' needs an array handle", name));
                            }
                        }
                        Some(VarType::Scalar(_)) => {
                            if !vt.is_scalar() {
                                self.err(codes::TYPE, &value.span, "expected a scalar value");
                            }
                        }
                    },
                    _ => {
                        self.expr(target);
                        if !vt.is_scalar() {
                            self.err(codes::TYPE, &value.span, "array elements hold scalars");
                        }
                    }
                }
            }
            StmtKind::Step { target, .. } => {
                let t = self.expr(target);
                if !t.is_scalar() {
                    self.err(codes::TYPE, &target.span, "++/-- need a scalar");
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e);
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                self.condition(cond);
                self.sub_stmt(then);
                if let Some(o) = otherwise {
                    self.sub_stmt(o);
                }
            }
            StmtKind::While { cond, body } => {
                self.condition(cond);
                self.sub_stmt(body);
            }
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                self.scopes.push(Scope::default());
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.condition(c);
                }
                if let Some(st) = step {
                    self.stmt(st);
                }
                self.sub_stmt(body);
                self.scopes.pop();
            }
            StmtKind::Return(value) => self.return_stmt(value.as_ref(), &s.span),
            StmtKind::Block(b) => self.block(b),
            StmtKind::Empty => {}
            StmtKind::SetP { name, value } => {
                if let Some(p) = self.param(&name.name) {
                    let vt = self.value(value);
                    if p.direction == Direction::Global {
                        let msg = format!("sl_setp on global channel '{}'; only shared channels can be written", name.name);
                        self.err(codes::SETP_GLOBAL, &s.span, msg);
                    }
                    self.check_class(p.value_class, vt, &value.span);
                } else if self.endpoint(&name.name).is_some() {
                    self.seta(name, value, &s.span);
                } else {
                    let msg = format!("'{}' is not a channel parameter of the enclosing thread function", name.name);
                    self.err(codes::UNDEF_CHANNEL, &name.span, msg);
                    self.value(value);
                }
            }
            StmtKind::SetA { name, value } => self.seta(name, value, &s.span),
            StmtKind::Index(name) => {
                if self.params.is_none() {
                    self.err(codes::INDEX_OUTSIDE, &s.span, "sl_index is only valid inside a thread function");
                } else if self.index_seen {
                    self.err(codes::DUP_INDEX, &s.span, "sl_index may appear only once per thread function");
                } else {
                    self.index_seen = true;
                }
                self.declare(name, VarType::Scalar(ValueClass::IntegerScalar));
            }
            StmtKind::Create(c) => self.create(c),
        }
    }

    /// Sub-statement of if/while/for; declarations there get their own scope.
    fn sub_stmt(&mut self, s: &Stmt) {
        self.scopes.push(Scope::default());
        self.stmt(s);
        self.scopes.pop();
    }

    fn condition(&mut self, e: &Expr) {
        let t = self.value(e);
        if !t.is_scalar() {
            self.err(codes::TYPE, &e.span, "condition must be a scalar");
        }
    }

    fn return_stmt(&mut self, value: Option<&Expr>, span: &SourceSpan) {
        let vt = value.map(|v| self.value(v));
        match (self.ret, vt) {
            (None, Some(_)) => self.err(codes::TYPE, span, "thread functions cannot return a value"),
            (Some(r), Some(_)) if r.base == BaseType::Void && !r.pointer => {
                self.err(codes::TYPE, span, "void function cannot return a value")
            }
            (Some(r), Some(t)) => {
                if r.pointer && !t.is_handle() {
                    self.err(codes::TYPE, span, "expected an array handle");
                } else if !r.pointer && !t.is_scalar() {
                    self.err(codes::TYPE, span, "expected a scalar return value");
                }
            }
            (Some(r), None) if !(r.base == BaseType::Void && !r.pointer) => {
                self.err(codes::TYPE, span, "non-void function must return a value")
            }
            _ => {}
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        for dd in &d.declarators {
            let ty = if dd.array_len.is_some() {
                VarType::Array
            } else if dd.pointer {
                VarType::Pointer
            } else {
                VarType::Scalar(CType { base: d.base, pointer: false }.value_class())
            };
            match (&dd.init, ty) {
                (None, _) => {}
                (Some(Initializer::List(list)), VarType::Array) => {
                    if list.len() > dd.array_len.unwrap() as usize {
                        self.err(codes::TYPE, &dd.name.span, "too many initializers for array");
                    }
                    for e in list {
                        let t = self.value(e);
                        if !t.is_scalar() {
                            self.err(codes::TYPE, &e.span, "array elements hold scalars");
                        }
                    }
                }
                (Some(Initializer::List(_)), _) => {
                    self.err(codes::TYPE, &dd.name.span, "brace initializer requires an array")
                }
                (Some(Initializer::Expr(e)), VarType::Array) => {
                    self.value(e);
                    self.err(codes::TYPE, &e.span, "arrays are initialized with a brace list");
                }
                (Some(Initializer::Expr(e)), VarType::Pointer) => {
                    let t = self.value(e);
                    let null = matches!(e.kind, ExprKind::Int(0));
                    if !t.is_handle() && !null {
                        self.err(codes::TYPE, &e.span, format!("'{}' needs an array handle", dd.name.name));
                    }
                }
                (Some(Initializer::Expr(e)), VarType::Scalar(_)) => {
                    let t = self.value(e);
                    if !t.is_scalar() {
                        self.err(codes::TYPE, &e.span, "expected a scalar value");
                    }
                }
            }
            self.declare(&dd.name, ty);
        }
    }

    fn check_class(&mut self, class: ValueClass, t: Ty, span: &SourceSpan) {
        let ok = match class {
            ValueClass::ArrayHandle => t.is_handle(),
            _ => t.is_scalar(),
        };
        if !ok {
            let msg = match class {
                ValueClass::ArrayHandle => "channel carries an array handle",
                _ => "channel carries a scalar",
            };
            self.err(codes::TYPE, span, msg);
        }
    }

    fn seta(&mut self, name: &Ident, value: &Expr, span: &SourceSpan) {
        let vt = self.value(value);
        match self.endpoint(&name.name) {
            None => {
                self.misplaced_seta.insert(name.name.clone());
                let msg = format!(
                    "'{}' is not a channel endpoint of an enclosing sl_create (source values are set between sl_create and its terminator)",
                    name.name
                );
                self.err(codes::SETA_OUTSIDE, span, msg);
            }
            Some(id) => {
                let ep = &self.endpoints[id];
                if ep.phase != Phase::Open {
                    let msg = format!("'{}' is written after its family was synchronized or detached", name.name);
                    self.err(codes::SETA_OUTSIDE, span, msg);
                } else {
                    let class = ep.class;
                    self.check_class(class, vt, &value.span);
                }
            }
        }
    }

    fn geta(&mut self, name: &Ident, span: &SourceSpan) -> Ty {
        match self.endpoint(&name.name) {
            None => {
                let msg = format!("'{}' is not a channel endpoint of a preceding sl_create", name.name);
                self.err(codes::UNDEF_CHANNEL, span, msg);
                Ty::Unknown
            }
            Some(id) => {
                let ep = &self.endpoints[id];
                let class = ep.class;
                match ep.phase {
                    Phase::Open => {
                        let msg = format!("'{}' is read before sl_sync", name.name);
                        self.err(codes::GETA_BEFORE_SYNC, span, msg);
                    }
                    Phase::Detached => {
                        let msg = format!("'{}' belongs to a detached family and can never be read", name.name);
                        self.err(codes::GETA_AFTER_DETACH, span, msg);
                    }
                    Phase::Synced => {}
                }
                Ty::of_class(class)
            }
        }
    }

    fn create(&mut self, c: &CreateConstruct) {
        for (e, what) in [
            (&c.placement, "placement"),
            (&c.start, "start index"),
            (&c.limit, "limit index"),
            (&c.step, "step"),
            (&c.window, "window size"),
        ] {
            if let Some(e) = e {
                let t = self.value(e);
                if !matches!(t, Ty::Int | Ty::Scalar | Ty::Unknown) {
                    self.err(codes::TYPE, &e.span, format!("{} must be an integer", what));
                }
            }
        }
        for a in &c.args {
            if let Some(init) = &a.init {
                let t = self.value(init);
                self.check_class(a.value_class, t, &init.span);
            }
        }
        self.check_signature(c);

        let mut ids = Vec::new();
        for a in &c.args {
            if let Some(name) = &a.name {
                let id = self.endpoints.len();
                self.endpoints.push(Endpoint {
                    class: a.value_class,
                    phase: Phase::Open,
                });
                let scope = self.scopes.last_mut().unwrap();
                if scope.endpoints.values().any(|&e| ids.contains(&e))
                    && scope.endpoints.contains_key(&name.name)
                    && ids.contains(&scope.endpoints[&name.name])
                {
                    let msg = format!("duplicate channel endpoint name '{}'", name.name);
                    self.err(codes::DUP_PARAM, &name.span, msg);
                }
                self.scopes
                    .last_mut()
                    .unwrap()
                    .endpoints
                    .insert(name.name.clone(), id);
                ids.push(id);
            }
        }

        for s in &c.body {
            self.stmt(s);
        }

        // Straight-line feeding: initializers plus top-level sl_seta items.
        let mut fed: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &c.body {
            let name = match &s.kind {
                StmtKind::SetA { name, .. } => name,
                StmtKind::SetP { name, .. } if self.param(&name.name).is_none() => name,
                _ => continue,
            };
            *fed.entry(name.name.as_str()).or_default() += 1;
        }
        for a in &c.args {
            let count = a.init.is_some() as usize
                + a.name
                    .as_ref()
                    .and_then(|n| fed.get(n.name.as_str()))
                    .copied()
                    .unwrap_or(0);
            let label = a
                .name
                .as_ref()
                .map(|n| n.name.clone())
                .unwrap_or_else(|| "<anonymous>".into());
            if count == 0 {
                let excused = a
                    .name
                    .as_ref()
                    .is_some_and(|n| self.misplaced_seta.contains(&n.name));
                if !excused {
                    let msg = format!(
                        "channel '{}' receives no source value before {} (give it a value in sl_create or an unconditional sl_seta)",
                        label,
                        match c.terminator {
                            Terminator::Sync => "sl_sync",
                            Terminator::Detach => "sl_detach",
                        }
                    );
                    self.err(codes::UNFED_CHANNEL, &a.span, msg);
                }
            } else if count > 1 {
                let msg = format!("channel '{}' receives more than one source value", label);
                self.err(codes::DOUBLE_SETA, &a.span, msg);
            }
        }

        let phase = match c.terminator {
            Terminator::Sync => Phase::Synced,
            Terminator::Detach => Phase::Detached,
        };
        for id in ids {
            self.endpoints[id].phase = phase;
        }
    }

    fn check_signature(&mut self, c: &CreateConstruct) {
        let Some(target) = self.symbols.thread(&c.target.name) else {
            return;
        };
        let params = &target.params;
        let mut problem = None;
        if params.len() != c.args.len() {
            problem = Some(format!(
                "'{}' expects {} channel(s), {} given",
                target.name,
                params.len(),
                c.args.len()
            ));
        } else {
            for (i, (p, a)) in params.iter().zip(&c.args).enumerate() {
                if p.direction != a.direction {
                    problem = Some(format!(
                        "channel {} of '{}' is {}, argument is {}",
                        i,
                        target.name,
                        dir_name(p.direction),
                        dir_name(a.direction)
                    ));
                } else if p.value_class != a.value_class {
                    problem = Some(format!(
                        "channel {} of '{}' carries {}, argument carries {}",
                        i,
                        target.name,
                        class_name(p.value_class),
                        class_name(a.value_class)
                    ));
                } else if p.declared_type != a.declared_type {
                    problem = Some(format!(
                        "channel {} of '{}' has type '{}', argument has type '{}'",
                        i, target.name, p.declared_type, a.declared_type
                    ));
                }
                if problem.is_some() {
                    break;
                }
            }
        }
        if let Some(msg) = problem {
            self.err(codes::SIG_MISMATCH, &c.span, msg);
        }
    }

    /// Expression whose value is used.
    fn value(&mut self, e: &Expr) -> Ty {
        let t = self.expr(e);
        if t == Ty::Void {
            self.err(codes::TYPE, &e.span, "void value used in an expression");
            return Ty::Unknown;
        }
        t
    }

    fn expr(&mut self, e: &Expr) -> Ty {
        match &e.kind {
            ExprKind::Int(_) => Ty::Int,
            ExprKind::Float(_) => Ty::Float,
            ExprKind::Str(_) => {
                self.err(codes::TYPE, &e.span, "string literals may only be passed to print_str");
                Ty::Unknown
            }
            ExprKind::Var(name) => match self.var(name) {
                None => {
                    self.err(codes::UNDEF_VAR, &e.span, format!("undefined variable '{}'", name));
                    Ty::Unknown
                }
                Some(VarType::Scalar(c)) => Ty::of_class(c),
                Some(VarType::Pointer) | Some(VarType::Array) => Ty::Handle,
            },
            ExprKind::Unary(op, a) => {
                let t = self.value(a);
                if !t.is_scalar() {
                    self.err(codes::TYPE, &a.span, "operator needs a scalar operand");
                    return Ty::Unknown;
                }
                match op {
                    UnaryOp::Neg => t,
                    UnaryOp::Not => Ty::Int,
                }
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.value(a);
                let tb = self.value(b);
                if !ta.is_scalar() || !tb.is_scalar() {
                    let span = if ta.is_scalar() { &b.span } else { &a.span };
                    self.err(codes::TYPE, span, "arithmetic on array handles is not supported");
                    return Ty::Unknown;
                }
                match op {
                    BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
                        if ta == Ty::Float || tb == Ty::Float {
                            Ty::Float
                        } else if ta == Ty::Int && tb == Ty::Int {
                            Ty::Int
                        } else {
                            Ty::Scalar
                        }
                    }
                    BinaryOp::Rem => {
                        if ta == Ty::Float || tb == Ty::Float {
                            self.err(codes::TYPE, &e.span, "% needs integer operands");
                        }
                        Ty::Int
                    }
                    _ => Ty::Int,
                }
            }
            ExprKind::Index(base, idx) => {
                let tb = self.value(base);
                let ti = self.value(idx);
                if !tb.is_handle() {
                    self.err(codes::TYPE, &base.span, "only arrays and array handles can be indexed");
                }
                if !matches!(ti, Ty::Int | Ty::Scalar | Ty::Unknown) {
                    self.err(codes::TYPE, &idx.span, "array index must be an integer");
                }
                Ty::Scalar
            }
            ExprKind::Call(name, args) => self.call(name, args, &e.span),
            ExprKind::GetP(name) => {
                if let Some(p) = self.param(&name.name) {
                    Ty::of_class(p.value_class)
                } else if self.endpoint(&name.name).is_some() {
                    self.geta(name, &e.span)
                } else {
                    let msg = format!("'{}' is not a channel parameter of the enclosing thread function", name.name);
                    self.err(codes::UNDEF_CHANNEL, &name.span, msg);
                    Ty::Unknown
                }
            }
            ExprKind::GetA(name) => self.geta(name, &e.span),
        }
    }

    fn call(&mut self, name: &Ident, args: &[Expr], span: &SourceSpan) -> Ty {
        if let Some(arity) = builtin_arity(&name.name) {
            if args.len() != arity {
                let msg = format!("'{}' takes {} argument(s), {} given", name.name, arity, args.len());
                self.err(codes::ARITY, span, msg);
            }
            if name.name == "print_str" {
                for a in args {
                    if !matches!(a.kind, ExprKind::Str(_)) {
                        self.err(codes::TYPE, &a.span, "print_str takes a string literal");
                    }
                }
                return Ty::Void;
            }
            for a in args {
                let t = self.value(a);
                if !t.is_scalar() {
                    self.err(codes::TYPE, &a.span, format!("'{}' takes scalar arguments", name.name));
                }
            }
            return match name.name.as_str() {
                "print_int" | "print_float" => Ty::Void,
                _ => Ty::Int,
            };
        }
        if self.symbols.thread(&name.name).is_some() {
            let msg = format!("thread function '{}' can only be run with sl_create", name.name);
            self.err(codes::NOT_CALLABLE, &name.span, msg);
            for a in args {
                self.value(a);
            }
            return Ty::Unknown;
        }
        let Some(f) = self.symbols.function(&name.name) else {
            self.err(codes::UNDEF, &name.span, format!("undefined function '{}'", name.name));
            for a in args {
                self.value(a);
            }
            return Ty::Unknown;
        };
        let params = f.params.clone();
        let ret = f.ret;
        if params.len() != args.len() {
            let msg = format!("'{}' takes {} argument(s), {} given", name.name, params.len(), args.len());
            self.err(codes::ARITY, span, msg);
        }
        for (i, a) in args.iter().enumerate() {
            let t = self.value(a);
            if let Some(p) = params.get(i) {
                let ok = if p.pointer { t.is_handle() } else { t.is_scalar() };
                if !ok {
                    self.err(codes::TYPE, &a.span, format!("argument {} of '{}' has the wrong kind", i + 1, name.name));
                }
            }
        }
        if ret.pointer {
            Ty::Handle
        } else if ret.base == BaseType::Void {
            Ty::Void
        } else {
            Ty::of_class(ret.value_class())
        }
    }
}

fn dir_name(d: Direction) -> &'static str {
    match d {
        Direction::Global => "global",
        Direction::Shared => "shared",
    }
}

fn class_name(c: ValueClass) -> &'static str {
    match c {
        ValueClass::IntegerScalar => "an integer",
        ValueClass::FloatScalar => "a float",
        ValueClass::ArrayHandle => "an array handle",
    }
}

#[cfg(test)]
mod tests {
    use super::super::analyze;
    use super::*;

    const INNERPROD: &str = "sl_def(innerprod, , sl_glparm(int*, a), sl_glparm(int*, b), sl_shparm(int, s))\n{\n    sl_index(i);\n    int *a = sl_getp(a), *b = sl_getp(b);\n    sl_setp(s, sl_getp(s) + a[i] * b[i]);\n}\nsl_enddef\n";

    fn codes_of(src: &str) -> Vec<&'static str> {
        match analyze(src, "t.sl") {
            Ok(_) => vec![],
            Err(d) => d.into_iter().map(|d| d.code).collect(),
        }
    }

    #[test]
    fn valid_innerprod_program() {
        let src = format!(
            "{}int main(void) {{\n int v1[5] = {{1, 2, 3, 4, 5}}, v2[5] = {{3, 5, 7, 11, 13}};\n sl_create(, , , 5, , , , innerprod, sl_glarg(int *, , v1), sl_glarg(int *, , v2), sl_sharg(int, s, 0));\n sl_sync();\n print_int(sl_geta(s));\n return 0;\n}}\n",
            INNERPROD
        );
        assert_eq!(codes_of(&src), Vec::<&str>::new());
    }

    #[test]
    fn missing_shared_argument_is_a_signature_mismatch() {
        let src = format!(
            "{}int main(void) {{ int v[5]; sl_create(, , , 5, , , , innerprod, sl_glarg(int*, , v), sl_glarg(int*, , v)); sl_sync(); return 0; }}",
            INNERPROD
        );
        assert_eq!(codes_of(&src), vec![codes::SIG_MISMATCH]);
    }

    #[test]
    fn endpoint_misuse_before_create_and_before_sync() {
        let src = "sl_def(foo, , sl_glparm(int, x)) { } sl_enddef\nint main(void) {\n    sl_seta(x, 3);\n    sl_create(, , , , , , , foo, sl_glarg(int, x));\n    int y = sl_geta(x);\n    sl_sync();\n    return 0;\n}\n";
        let diags = analyze(src, "t.sl").unwrap_err();
        let got: Vec<(&str, u32)> = diags.iter().map(|d| (d.code, d.span.line)).collect();
        assert_eq!(got, vec![(codes::SETA_OUTSIDE, 3), (codes::GETA_BEFORE_SYNC, 5)]);
    }

    #[test]
    fn setp_on_global() {
        let src = "sl_def(foo, , sl_glparm(int, x)) { sl_setp(x, 1); } sl_enddef\nint main(void) { return 0; }";
        assert_eq!(codes_of(src), vec![codes::SETP_GLOBAL]);
    }

    #[test]
    fn geta_after_detach() {
        let src = "sl_def(foo, , sl_shparm(int, x)) { sl_setp(x, sl_getp(x)); } sl_enddef\nint main(void) { sl_create(,,,,,,, foo, sl_sharg(int, x, 0)); sl_detach(); print_int(sl_geta(x)); return 0; }";
        assert_eq!(codes_of(src), vec![codes::GETA_AFTER_DETACH]);
    }

    #[test]
    fn conditional_feeding_is_rejected() {
        let src = "sl_def(foo, , sl_glparm(int, x)) { } sl_enddef\nint main(void) { int c = 1; sl_create(,,,,,,, foo, sl_glarg(int, x)); if (c) { sl_seta(x, 1); } sl_sync(); return 0; }";
        assert_eq!(codes_of(src), vec![codes::UNFED_CHANNEL]);
    }

    #[test]
    fn setp_alias_in_creator() {
        let src = "sl_def(foo, , sl_shparm(int, a)) { sl_setp(a, sl_getp(a) + 1); } sl_enddef\nint main(void) { sl_create(, , 0, 10, 1, 0, , foo, sl_sharg(int, x)); sl_setp(x, 0); sl_sync(); print_int(sl_getp(x)); return 0; }";
        assert_eq!(codes_of(src), Vec::<&str>::new());
    }

    #[test]
    fn getp_outside_thread_function() {
        let src = "int main(void) { int y = sl_getp(q); return 0; }";
        assert_eq!(codes_of(src), vec![codes::UNDEF_CHANNEL]);
    }

    #[test]
    fn index_rules() {
        assert_eq!(
            codes_of("int main(void) { sl_index(i); return 0; }"),
            vec![codes::INDEX_OUTSIDE]
        );
        assert_eq!(
            codes_of("sl_def(f) { sl_index(i); sl_index(j); } sl_enddef\nint main(void) { return 0; }"),
            vec![codes::DUP_INDEX]
        );
    }

    #[test]
    fn double_setp_in_straight_line() {
        let src = "sl_def(f, , sl_shparm(int, s)) { sl_setp(s, 1); sl_setp(s, 2); } sl_enddef\nint main(void) { return 0; }";
        assert_eq!(codes_of(src), vec![codes::DOUBLE_SETP]);
    }

    #[test]
    fn double_source_value() {
        let src = "sl_def(f, , sl_glparm(int, x)) { } sl_enddef\nint main(void) { sl_create(,,,,,,, f, sl_glarg(int, x, 1)); sl_seta(x, 2); sl_sync(); return 0; }";
        assert_eq!(codes_of(src), vec![codes::DOUBLE_SETA]);
    }

    #[test]
    fn variables_and_calls() {
        assert_eq!(codes_of("int main(void) { x = 1; return 0; }"), vec![codes::UNDEF_VAR]);
        assert_eq!(codes_of("int main(void) { int x; int x; return 0; }"), vec![codes::REDECL]);
        assert_eq!(codes_of("int main(void) { print_int(1, 2); return 0; }"), vec![codes::ARITY]);
        assert_eq!(codes_of("int main(void) { print_int(\"a\"); return 0; }"), vec![codes::TYPE]);
        assert_eq!(codes_of("int main(void) { int a[2]; a = 1; return 0; }"), vec![codes::TYPE]);
        assert_eq!(codes_of("sl_def(f) { } sl_enddef\nint main(void) { f(); return 0; }"), vec![codes::NOT_CALLABLE]);
    }
}

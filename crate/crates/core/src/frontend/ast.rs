//! Parse tree of an SL-mini source file.

use super::token::SourceSpan;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AstProgram {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    ThreadDef(ThreadFunctionDef),
    ThreadDecl(ThreadFunctionDecl),
    Function(FunctionDef),
}

impl Item {
    pub fn name(&self) -> &Ident {
        match self {
            Item::ThreadDef(d) => &d.name,
            Item::ThreadDecl(d) => &d.name,
            Item::Function(f) => &f.name,
        }
    }

    pub fn span(&self) -> &SourceSpan {
        match self {
            Item::ThreadDef(d) => &d.span,
            Item::ThreadDecl(d) => &d.span,
            Item::Function(f) => &f.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: SourceSpan) -> Self {
        Ident {
            name: name.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Global,
    Shared,
}

/// What a channel transports. Array handles travel with the integer
/// keywords (`sl_glparm(float*, a)`), floats need the `f` keywords.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueClass {
    IntegerScalar,
    FloatScalar,
    ArrayHandle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseType {
    Int,
    Long,
    UnsignedInt,
    SizeT,
    PlaceT,
    Float,
    Double,
    Void,
}

impl BaseType {
    pub fn is_float(self) -> bool {
        matches!(self, BaseType::Float | BaseType::Double)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            BaseType::Int => "int",
            BaseType::Long => "long",
            BaseType::UnsignedInt => "unsigned",
            BaseType::SizeT => "size_t",
            BaseType::PlaceT => "sl_place_t",
            BaseType::Float => "float",
            BaseType::Double => "double",
            BaseType::Void => "void",
        }
    }
}

/// A declared C type: a base type, optionally a pointer to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CType {
    pub base: BaseType,
    pub pointer: bool,
}

impl CType {
    pub fn value_class(self) -> ValueClass {
        if self.pointer {
            ValueClass::ArrayHandle
        } else if self.base.is_float() {
            ValueClass::FloatScalar
        } else {
            ValueClass::IntegerScalar
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParam {
    pub direction: Direction,
    pub value_class: ValueClass,
    /// Type tokens joined by single spaces, no space before `*`.
    pub declared_type: String,
    pub ty: CType,
    pub name: Ident,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadFunctionDef {
    pub name: Ident,
    pub is_static: bool,
    pub params: Vec<ChannelParam>,
    pub body: Block,
    pub span: SourceSpan,
}

impl ThreadFunctionDef {
    /// The variable bound by the body's top-level `sl_index`, if any.
    pub fn index_var(&self) -> Option<&Ident> {
        self.body.items.iter().find_map(|s| match &s.kind {
            StmtKind::Index(name) => Some(name),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadFunctionDecl {
    pub name: Ident,
    pub is_static: bool,
    pub params: Vec<ChannelParam>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: CType,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub ret: CType,
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub items: Vec<Stmt>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl AssignOp {
    pub fn text(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
        }
    }

    pub fn binary(self) -> Option<BinaryOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinaryOp::Add),
            AssignOp::Sub => Some(BinaryOp::Sub),
            AssignOp::Mul => Some(BinaryOp::Mul),
            AssignOp::Div => Some(BinaryOp::Div),
            AssignOp::Rem => Some(BinaryOp::Rem),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Decl(Declaration),
    Assign {
        target: Expr,
        op: AssignOp,
        value: Expr,
    },
    /// `x++` / `x--` (statement form only).
    Step {
        target: Expr,
        increment: bool,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
    Block(Block),
    Empty,
    SetP {
        name: Ident,
        value: Expr,
    },
    SetA {
        name: Ident,
        value: Expr,
    },
    Index(Ident),
    Create(Box<CreateConstruct>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub base: BaseType,
    pub declarators: Vec<Declarator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: Ident,
    pub pointer: bool,
    pub array_len: Option<u32>,
    pub init: Option<Initializer>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    Expr(Expr),
    List(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreateSpecifier {
    Exclusive,
    ForceSeq,
    ForceWait,
}

impl CreateSpecifier {
    pub fn keyword(self) -> &'static str {
        match self {
            CreateSpecifier::Exclusive => "sl__exclusive",
            CreateSpecifier::ForceSeq => "sl__forceseq",
            CreateSpecifier::ForceWait => "sl__forcewait",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "sl__exclusive" => Some(CreateSpecifier::Exclusive),
            "sl__forceseq" => Some(CreateSpecifier::ForceSeq),
            "sl__forcewait" => Some(CreateSpecifier::ForceWait),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminator {
    Sync,
    Detach,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelArg {
    pub direction: Direction,
    pub value_class: ValueClass,
    pub declared_type: String,
    pub ty: CType,
    pub name: Option<Ident>,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateConstruct {
    pub placement: Option<Expr>,
    pub start: Option<Expr>,
    pub limit: Option<Expr>,
    pub step: Option<Expr>,
    pub window: Option<Expr>,
    pub specifier: Option<CreateSpecifier>,
    pub target: Ident,
    pub args: Vec<ChannelArg>,
    pub body: Vec<Stmt>,
    pub terminator: Terminator,
    pub terminator_span: SourceSpan,
    pub span: SourceSpan,
}

impl CreateConstruct {
    pub fn has_shared_arg(&self) -> bool {
        self.args.iter().any(|a| a.direction == Direction::Shared)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn text(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    /// Decoded string literal; only meaningful as a print argument.
    Str(String),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Call(Ident, Vec<Expr>),
    GetP(Ident),
    GetA(Ident),
}

/// Reset every span in the tree to the default so that two programs can be
/// compared structurally.
pub fn erase_spans(program: &mut AstProgram) {
    for item in &mut program.items {
        match item {
            Item::ThreadDef(d) => {
                d.span = SourceSpan::default();
                d.name.span = SourceSpan::default();
                d.params.iter_mut().for_each(erase_param);
                erase_block(&mut d.body);
            }
            Item::ThreadDecl(d) => {
                d.span = SourceSpan::default();
                d.name.span = SourceSpan::default();
                d.params.iter_mut().for_each(erase_param);
            }
            Item::Function(f) => {
                f.span = SourceSpan::default();
                f.name.span = SourceSpan::default();
                for p in &mut f.params {
                    p.name.span = SourceSpan::default();
                }
                erase_block(&mut f.body);
            }
        }
    }
}

fn erase_param(p: &mut ChannelParam) {
    p.span = SourceSpan::default();
    p.name.span = SourceSpan::default();
}

fn erase_block(b: &mut Block) {
    b.span = SourceSpan::default();
    b.items.iter_mut().for_each(erase_stmt);
}

fn erase_stmt(s: &mut Stmt) {
    s.span = SourceSpan::default();
    match &mut s.kind {
        StmtKind::Decl(d) => {
            for decl in &mut d.declarators {
                decl.name.span = SourceSpan::default();
                match &mut decl.init {
                    Some(Initializer::Expr(e)) => erase_expr(e),
                    Some(Initializer::List(list)) => list.iter_mut().for_each(erase_expr),
                    None => {}
                }
            }
        }
        StmtKind::Assign { target, value, .. } => {
            erase_expr(target);
            erase_expr(value);
        }
        StmtKind::Step { target, .. } => erase_expr(target),
        StmtKind::Expr(e) => erase_expr(e),
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            erase_expr(cond);
            erase_stmt(then);
            if let Some(o) = otherwise {
                erase_stmt(o);
            }
        }
        StmtKind::While { cond, body } => {
            erase_expr(cond);
            erase_stmt(body);
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => {
            if let Some(i) = init {
                erase_stmt(i);
            }
            if let Some(c) = cond {
                erase_expr(c);
            }
            if let Some(s) = step {
                erase_stmt(s);
            }
            erase_stmt(body);
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                erase_expr(e);
            }
        }
        StmtKind::Block(b) => erase_block(b),
        StmtKind::Empty => {}
        StmtKind::SetP { name, value } | StmtKind::SetA { name, value } => {
            name.span = SourceSpan::default();
            erase_expr(value);
        }
        StmtKind::Index(name) => name.span = SourceSpan::default(),
        StmtKind::Create(c) => {
            c.span = SourceSpan::default();
            c.terminator_span = SourceSpan::default();
            c.target.span = SourceSpan::default();
            for e in [
                &mut c.placement,
                &mut c.start,
                &mut c.limit,
                &mut c.step,
                &mut c.window,
            ]
            .into_iter()
            .flatten()
            {
                erase_expr(e);
            }
            for a in &mut c.args {
                a.span = SourceSpan::default();
                if let Some(n) = &mut a.name {
                    n.span = SourceSpan::default();
                }
                if let Some(e) = &mut a.init {
                    erase_expr(e);
                }
            }
            c.body.iter_mut().for_each(erase_stmt);
        }
    }
}

fn erase_expr(e: &mut Expr) {
    e.span = SourceSpan::default();
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) | ExprKind::Var(_) => {}
        ExprKind::Unary(_, a) => erase_expr(a),
        ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) => {
            erase_expr(a);
            erase_expr(b);
        }
        ExprKind::Call(name, args) => {
            name.span = SourceSpan::default();
            args.iter_mut().for_each(erase_expr);
        }
        ExprKind::GetP(name) | ExprKind::GetA(name) => name.span = SourceSpan::default(),
    }
}

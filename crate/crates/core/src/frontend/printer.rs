//! Canonical source printer: `parse(print(ast))` is structurally `ast`.

use std::fmt::Write;

use super::ast::*;
use super::token::escape_string;

const INDENT: &str = "    ";

pub fn print_ast(program: &AstProgram) -> String {
    let mut out = String::new();
    for (i, item) in program.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::ThreadDef(d) => {
                out.push_str(&thread_header("sl_def", &d.name.name, d.is_static, &d.params));
                out.push('\n');
                block(&mut out, &d.body, 0);
                out.push_str("\nsl_enddef\n");
            }
            Item::ThreadDecl(d) => {
                out.push_str(&thread_header("sl_decl", &d.name.name, d.is_static, &d.params));
                out.push_str(";\n");
            }
            Item::Function(f) => {
                let params = if f.params.is_empty() {
                    "void".to_string()
                } else {
                    f.params
                        .iter()
                        .map(|p| format!("{} {}", ctype(p.ty), p.name.name))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                let _ = writeln!(out, "{} {}({})", ctype(f.ret), f.name.name, params);
                block(&mut out, &f.body, 0);
                out.push('\n');
            }
        }
    }
    out
}

fn thread_header(kw: &str, name: &str, is_static: bool, params: &[ChannelParam]) -> String {
    let mut parts = vec![name.to_string()];
    if is_static || !params.is_empty() {
        parts.push(if is_static { "sl__static".into() } else { String::new() });
    }
    for p in params {
        let kw = match (p.direction, p.value_class) {
            (Direction::Global, ValueClass::FloatScalar) => "sl_glfparm",
            (Direction::Shared, ValueClass::FloatScalar) => "sl_shfparm",
            (Direction::Global, _) => "sl_glparm",
            (Direction::Shared, _) => "sl_shparm",
        };
        parts.push(format!("{}({}, {})", kw, p.declared_type, p.name.name));
    }
    format!("{}({})", kw, parts.join(", "))
}

fn ctype(t: CType) -> String {
    if t.pointer {
        format!("{}*", t.base.keyword())
    } else {
        t.base.keyword().to_string()
    }
}

fn block(out: &mut String, b: &Block, depth: usize) {
    indent(out, depth);
    out.push_str("{\n");
    for s in &b.items {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Block(b) => {
            block(out, b, depth);
            out.push('\n');
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            indent(out, depth);
            let _ = writeln!(out, "if ({})", expr(cond));
            nested(out, then, depth);
            if let Some(o) = otherwise {
                indent(out, depth);
                out.push_str("else\n");
                nested(out, o, depth);
            }
        }
        StmtKind::While { cond, body } => {
            indent(out, depth);
            let _ = writeln!(out, "while ({})", expr(cond));
            nested(out, body, depth);
        }
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => {
            indent(out, depth);
            let _ = writeln!(
                out,
                "for ({}; {}; {})",
                init.as_deref().map(simple).unwrap_or_default(),
                cond.as_ref().map(expr).unwrap_or_default(),
                step.as_deref().map(simple).unwrap_or_default()
            );
            nested(out, body, depth);
        }
        StmtKind::Create(c) => create(out, c, depth),
        _ => {
            indent(out, depth);
            out.push_str(&simple(s));
            out.push_str(";\n");
        }
    }
}

/// Sub-statements of if/while/for: blocks at the same depth, others indented.
fn nested(out: &mut String, s: &Stmt, depth: usize) {
    if matches!(s.kind, StmtKind::Block(_)) {
        stmt(out, s, depth);
    } else {
        stmt(out, s, depth + 1);
    }
}

/// Statements that fit on one line, without the trailing `;`.
fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl(d) => declaration(d),
        StmtKind::Assign { target, op, value } => {
            format!("{} {} {}", expr(target), op.text(), expr(value))
        }
        StmtKind::Step { target, increment } => {
            format!("{}{}", expr(target), if *increment { "++" } else { "--" })
        }
        StmtKind::Expr(e) => expr(e),
        StmtKind::Return(None) => "return".into(),
        StmtKind::Return(Some(e)) => format!("return {}", expr(e)),
        StmtKind::Empty => String::new(),
        StmtKind::SetP { name, value } => format!("sl_setp({}, {})", name.name, expr(value)),
        StmtKind::SetA { name, value } => format!("sl_seta({}, {})", name.name, expr(value)),
        StmtKind::Index(name) => format!("sl_index({})", name.name),
        StmtKind::Block(_)
        | StmtKind::If { .. }
        | StmtKind::While { .. }
        | StmtKind::For { .. }
        | StmtKind::Create(_) => unreachable!("compound statement printed inline"),
    }
}

fn declaration(d: &Declaration) -> String {
    let decls: Vec<String> = d
        .declarators
        .iter()
        .map(|dd| {
            let mut s = String::new();
            if dd.pointer {
                s.push('*');
            }
            s.push_str(&dd.name.name);
            if let Some(n) = dd.array_len {
                let _ = write!(s, "[{}]", n);
            }
            match &dd.init {
                Some(Initializer::Expr(e)) => {
                    let _ = write!(s, " = {}", expr(e));
                }
                Some(Initializer::List(list)) => {
                    let items: Vec<String> = list.iter().map(expr).collect();
                    let _ = write!(s, " = {{{}}}", items.join(", "));
                }
                None => {}
            }
            s
        })
        .collect();
    format!("{} {}", d.base.keyword(), decls.join(", "))
}

fn create(out: &mut String, c: &CreateConstruct, depth: usize) {
    let slot = |e: &Option<Expr>| e.as_ref().map(expr).unwrap_or_default();
    let mut parts = vec![
        String::new(),
        slot(&c.placement),
        slot(&c.start),
        slot(&c.limit),
        slot(&c.step),
        slot(&c.window),
        c.specifier.map(|s| s.keyword().to_string()).unwrap_or_default(),
        c.target.name.clone(),
    ];
    for a in &c.args {
        let kw = match (a.direction, a.value_class) {
            (Direction::Global, ValueClass::FloatScalar) => "sl_glfarg",
            (Direction::Shared, ValueClass::FloatScalar) => "sl_shfarg",
            (Direction::Global, _) => "sl_glarg",
            (Direction::Shared, _) => "sl_sharg",
        };
        let name = a.name.as_ref().map(|n| n.name.as_str()).unwrap_or("");
        let s = match &a.init {
            Some(e) => format!("{}({}, {}, {})", kw, a.declared_type, name, expr(e)),
            None => format!("{}({}, {})", kw, a.declared_type, name),
        };
        parts.push(s);
    }
    indent(out, depth);
    let _ = writeln!(out, "sl_create({});", parts.join(", "));
    for s in &c.body {
        stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push_str(match c.terminator {
        Terminator::Sync => "sl_sync();\n",
        Terminator::Detach => "sl_detach();\n",
    });
}

pub(crate) fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn float_text(f: f64) -> String {
    let s = format!("{:?}", f);
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{}.0", s)
    }
}

fn expr_prec(e: &Expr, min: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Float(f) => float_text(*f),
        ExprKind::Str(s) => escape_string(s),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Unary(op, a) => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
            };
            let operand = match a.kind {
                ExprKind::Unary(..) => format!("({})", expr(a)),
                _ => expr_prec(a, 7),
            };
            format!("{}{}", sym, operand)
        }
        ExprKind::Binary(op, a, b) => {
            let p = op.precedence();
            let s = format!("{} {} {}", expr_prec(a, p), op.text(), expr_prec(b, p + 1));
            if p < min {
                format!("({})", s)
            } else {
                s
            }
        }
        ExprKind::Index(a, i) => format!("{}[{}]", expr_prec(a, 8), expr(i)),
        ExprKind::Call(name, args) => {
            let args: Vec<String> = args.iter().map(expr).collect();
            format!("{}({})", name.name, args.join(", "))
        }
        ExprKind::GetP(n) => format!("sl_getp({})", n.name),
        ExprKind::GetA(n) => format!("sl_geta({})", n.name),
    }
}

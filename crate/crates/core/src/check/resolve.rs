use std::collections::BTreeMap;

use super::{codes, Diagnostic};
use crate::frontend::ast::*;
use crate::frontend::SourceSpan;

/// Built-in functions and their arity.
pub const BUILTINS: &[(&str, usize)] = &[
    ("print_int", 1),
    ("print_float", 1),
    ("print_str", 1),
    ("sl_default_placement", 0),
    ("sl_placement_size", 1),
    ("sl_first_processor_address", 1),
    ("sl_local_processor_address", 0),
    ("sl_placement", 2),
];

pub fn builtin_arity(name: &str) -> Option<usize> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSig {
    pub direction: Direction,
    pub value_class: ValueClass,
    pub declared_type: String,
    pub name: String,
}

impl ParamSig {
    fn from_param(p: &ChannelParam) -> Self {
        ParamSig {
            direction: p.direction,
            value_class: p.value_class,
            declared_type: p.declared_type.clone(),
            name: p.name.name.clone(),
        }
    }

    fn same_shape(&self, other: &ParamSig) -> bool {
        self.direction == other.direction
            && self.value_class == other.value_class
            && self.declared_type == other.declared_type
    }
}

#[derive(Debug, Clone)]
pub struct ThreadSymbol {
    pub name: String,
    pub is_static: bool,
    pub params: Vec<ParamSig>,
    pub defined: bool,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub struct FunctionSymbol {
    pub name: String,
    pub ret: CType,
    pub params: Vec<CType>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    pub threads: BTreeMap<String, ThreadSymbol>,
    pub functions: BTreeMap<String, FunctionSymbol>,
}

impl SymbolTable {
    pub fn thread(&self, name: &str) -> Option<&ThreadSymbol> {
        self.threads.get(name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSymbol> {
        self.functions.get(name)
    }
}

/// Collect definitions and check that every create target resolves to a
/// defined thread function.
pub fn resolve(program: &AstProgram) -> Result<SymbolTable, Vec<Diagnostic>> {
    let mut table = SymbolTable::default();
    let mut diags = Vec::new();
    let mut decls: Vec<&ThreadFunctionDecl> = Vec::new();

    for item in &program.items {
        let name = &item.name().name;
        if builtin_arity(name).is_some() {
            diags.push(Diagnostic::error(
                codes::DUP,
                &item.name().span,
                format!("'{}' redefines a built-in function", name),
            ));
            continue;
        }
        match item {
            Item::ThreadDecl(d) => decls.push(d),
            Item::ThreadDef(d) => {
                if let Some(prev) = defined_span(&table, name) {
                    diags.push(dup(&d.name, prev));
                    continue;
                }
                check_unique_params(&d.params, &mut diags);
                table.threads.insert(
                    name.clone(),
                    ThreadSymbol {
                        name: name.clone(),
                        is_static: d.is_static,
                        params: d.params.iter().map(ParamSig::from_param).collect(),
                        defined: true,
                        span: d.span.clone(),
                    },
                );
            }
            Item::Function(f) => {
                if let Some(prev) = defined_span(&table, name) {
                    diags.push(dup(&f.name, prev));
                    continue;
                }
                table.functions.insert(
                    name.clone(),
                    FunctionSymbol {
                        name: name.clone(),
                        ret: f.ret,
                        params: f.params.iter().map(|p| p.ty).collect(),
                        span: f.span.clone(),
                    },
                );
            }
        }
    }

    for d in decls {
        let name = &d.name.name;
        check_unique_params(&d.params, &mut diags);
        let sig: Vec<ParamSig> = d.params.iter().map(ParamSig::from_param).collect();
        if table.functions.contains_key(name) {
            diags.push(Diagnostic::error(
                codes::DUP,
                &d.name.span,
                format!("'{}' is declared as a thread function but defined as a C function", name),
            ));
            continue;
        }
        match table.threads.get(name) {
            Some(def) => {
                let matches = def.params.len() == sig.len()
                    && def.params.iter().zip(&sig).all(|(a, b)| a.same_shape(b));
                if !matches {
                    diags.push(Diagnostic::error(
                        codes::DECL_MISMATCH,
                        &d.span,
                        format!("declaration of '{}' does not match its definition", name),
                    ));
                }
                if def.is_static != d.is_static {
                    diags.push(Diagnostic::error(
                        codes::DECL_MISMATCH,
                        &d.span,
                        format!("declaration of '{}' disagrees on sl__static", name),
                    ));
                }
            }
            None => {
                table.threads.insert(
                    name.clone(),
                    ThreadSymbol {
                        name: name.clone(),
                        is_static: d.is_static,
                        params: sig,
                        defined: false,
                        span: d.span.clone(),
                    },
                );
            }
        }
    }

    match table.functions.get("main") {
        Some(_) => {}
        None => diags.push(Diagnostic::error(
            codes::NO_MAIN,
            &program
                .items
                .first()
                .map(|i| i.span().clone())
                .unwrap_or_default(),
            "program has no 'main' function",
        )),
    }

    for item in &program.items {
        let body = match item {
            Item::ThreadDef(d) => &d.body,
            Item::Function(f) => &f.body,
            Item::ThreadDecl(_) => continue,
        };
        visit_creates(&body.items, &mut |c| resolve_target(&table, c, &mut diags));
    }

    if diags.is_empty() {
        Ok(table)
    } else {
        Err(diags)
    }
}

fn defined_span<'a>(table: &'a SymbolTable, name: &str) -> Option<&'a SourceSpan> {
    table
        .threads
        .get(name)
        .map(|t| &t.span)
        .or_else(|| table.functions.get(name).map(|f| &f.span))
}

fn dup(name: &Ident, prev: &SourceSpan) -> Diagnostic {
    Diagnostic::error(
        codes::DUP,
        &name.span,
        format!("'{}' is already defined at {}", name.name, prev),
    )
}

fn check_unique_params(params: &[ChannelParam], diags: &mut Vec<Diagnostic>) {
    for (i, p) in params.iter().enumerate() {
        if params[..i].iter().any(|q| q.name.name == p.name.name) {
            diags.push(Diagnostic::error(
                codes::DUP_PARAM,
                &p.name.span,
                format!("duplicate channel parameter '{}'", p.name.name),
            ));
        }
    }
}

fn resolve_target(table: &SymbolTable, c: &CreateConstruct, diags: &mut Vec<Diagnostic>) {
    let name = &c.target.name;
    match table.threads.get(name) {
        Some(t) if t.defined => {}
        Some(_) => diags.push(Diagnostic::error(
            codes::UNDEF,
            &c.target.span,
            format!("thread function '{}' is declared but never defined in this file", name),
        )),
        None if table.functions.contains_key(name) => diags.push(Diagnostic::error(
            codes::NOT_THREAD,
            &c.target.span,
            format!("'{}' is a C function, not a thread function", name),
        )),
        None => diags.push(Diagnostic::error(
            codes::UNDEF,
            &c.target.span,
            format!("undefined thread function '{}'", name),
        )),
    }
}

/// Call `f` on every create construct nested anywhere in `stmts`.
pub(crate) fn visit_creates<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a CreateConstruct)) {
    for s in stmts {
        visit_stmt(s, f);
    }
}

fn visit_stmt<'a>(s: &'a Stmt, f: &mut dyn FnMut(&'a CreateConstruct)) {
    match &s.kind {
        StmtKind::Create(c) => {
            f(c);
            visit_creates(&c.body, f);
        }
        StmtKind::Block(b) => visit_creates(&b.items, f),
        StmtKind::If {
            then, otherwise, ..
        } => {
            visit_stmt(then, f);
            if let Some(o) = otherwise {
                visit_stmt(o, f);
            }
        }
        StmtKind::While { body, .. } => visit_stmt(body, f),
        StmtKind::For { body, .. } => visit_stmt(body, f),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn codes_of(src: &str) -> Vec<&'static str> {
        match resolve(&parse_source(src, "t.sl").unwrap()) {
            Ok(_) => vec![],
            Err(d) => d.into_iter().map(|d| d.code).collect(),
        }
    }

    #[test]
    fn undefined_target() {
        assert_eq!(
            codes_of("int main(void) { sl_create(,,,,,,, nosuch); sl_sync(); return 0; }"),
            vec![codes::UNDEF]
        );
    }

    #[test]
    fn duplicate_definition() {
        assert_eq!(
            codes_of("sl_def(foo) { } sl_enddef\nsl_def(foo) { } sl_enddef\nint main(void) { return 0; }"),
            vec![codes::DUP]
        );
    }

    #[test]
    fn plain_function_target() {
        assert_eq!(
            codes_of("void f(void) { }\nint main(void) { sl_create(,,,,,,, f); sl_sync(); return 0; }"),
            vec![codes::NOT_THREAD]
        );
    }

    #[test]
    fn forward_declaration_then_definition() {
        let src = "sl_decl(foo, sl__static, sl_glarg(int, x));\nint main(void) { sl_create(,,,,,,, foo, sl_glarg(int, , 1)); sl_sync(); return 0; }\nsl_def(foo, sl__static, sl_glparm(int, x)) { } sl_enddef";
        let t = resolve(&parse_source(src, "t.sl").unwrap()).unwrap();
        assert!(t.thread("foo").unwrap().is_static);
        assert!(t.thread("foo").unwrap().defined);
    }

    #[test]
    fn declaration_without_definition() {
        assert_eq!(
            codes_of("sl_decl(foo);\nint main(void) { sl_create(,,,,,,, foo); sl_sync(); return 0; }"),
            vec![codes::UNDEF]
        );
    }

    #[test]
    fn mismatched_declaration() {
        assert_eq!(
            codes_of("sl_decl(foo, , sl_glparm(int, x));\nsl_def(foo, , sl_shparm(int, x)) { sl_setp(x, 1); } sl_enddef\nint main(void) { return 0; }"),
            vec![codes::DECL_MISMATCH]
        );
    }

    #[test]
    fn missing_main() {
        assert_eq!(codes_of("sl_def(foo) { } sl_enddef"), vec![codes::NO_MAIN]);
    }
}

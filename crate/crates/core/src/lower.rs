//! AST to IR lowering. Runs only on programs that passed the checker.

use std::collections::BTreeMap;

use crate::check::SymbolTable;
use crate::frontend::ast::*;
use crate::ir::*;

pub fn lower(program: &AstProgram, _symbols: &SymbolTable) -> IrProgram {
    let mut index = BTreeMap::new();
    for item in &program.items {
        match item {
            Item::ThreadDef(_) | Item::Function(_) => {
                let n = index.len();
                index.insert(item.name().name.clone(), n);
            }
            Item::ThreadDecl(_) => {}
        }
    }
    let mut out = IrProgram {
        entry: index.get("main").copied().unwrap_or(0),
        ..IrProgram::default()
    };
    for item in &program.items {
        match item {
            Item::ThreadDef(d) => {
                let mut l = Lowerer::new(&index, &mut out.strings);
                l.params = d
                    .params
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.name.name.clone(), (i as u32, p.value_class)))
                    .collect();
                l.block(&d.body);
                l.emit(IrOp::Return { value: None });
                let signature =
                    ChannelSignature(d.params.iter().map(|p| (p.direction, p.value_class)).collect());
                let f = l.finish(d.name.name.clone(), FunctionKind::Thread { signature });
                out.functions.push(f);
            }
            Item::Function(fd) => {
                let mut l = Lowerer::new(&index, &mut out.strings);
                let mut params = Vec::new();
                for p in &fd.params {
                    let kind = var_kind(p.ty, false);
                    l.bind(&p.name.name, kind);
                    params.push(coerce_of(kind));
                }
                let returns_value = !(fd.ret.base == BaseType::Void && !fd.ret.pointer);
                l.ret = if returns_value { Some(var_kind(fd.ret, false)) } else { None };
                l.block(&fd.body);
                l.emit(IrOp::Return { value: None });
                let f = l.finish(
                    fd.name.name.clone(),
                    FunctionKind::Plain {
                        params,
                        returns_value,
                    },
                );
                out.functions.push(f);
            }
            Item::ThreadDecl(_) => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarKind {
    Scalar(ValueClass),
    Handle,
}

fn var_kind(ty: CType, array: bool) -> VarKind {
    if array || ty.pointer {
        VarKind::Handle
    } else {
        VarKind::Scalar(ty.value_class())
    }
}

fn coerce_of(kind: VarKind) -> Option<Coerce> {
    match kind {
        VarKind::Scalar(c) => Coerce::for_class(c),
        VarKind::Handle => None,
    }
}

#[derive(Clone, Copy)]
struct Endpoint {
    ctx: Slot,
    chan: u32,
    /// Receives the endpoint's value after sync.
    result: Slot,
}

#[derive(Default)]
struct Scope {
    vars: BTreeMap<String, (Slot, VarKind)>,
    endpoints: BTreeMap<String, Endpoint>,
}

struct Lowerer<'a> {
    index: &'a BTreeMap<String, usize>,
    strings: &'a mut Vec<String>,
    params: BTreeMap<String, (u32, ValueClass)>,
    ret: Option<VarKind>,
    scopes: Vec<Scope>,
    slot_names: Vec<String>,
    ops: Vec<IrOp>,
}

impl<'a> Lowerer<'a> {
    fn new(index: &'a BTreeMap<String, usize>, strings: &'a mut Vec<String>) -> Self {
        Lowerer {
            index,
            strings,
            params: BTreeMap::new(),
            ret: None,
            scopes: vec![Scope::default()],
            slot_names: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn finish(self, name: String, kind: FunctionKind) -> IrFunction {
        IrFunction {
            name,
            kind,
            slot_names: self.slot_names,
            ops: self.ops,
        }
    }

    fn emit(&mut self, op: IrOp) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    fn here(&self) -> usize {
        self.ops.len()
    }

    fn patch(&mut self, at: usize, target: usize) {
        match &mut self.ops[at] {
            IrOp::Jump { target: t } => *t = target,
            IrOp::Branch { if_false, .. } => *if_false = target,
            _ => unreachable!("patching a non-jump op"),
        }
    }

    fn slot(&mut self, name: &str) -> Slot {
        self.slot_names.push(name.to_string());
        (self.slot_names.len() - 1) as Slot
    }

    fn temp(&mut self) -> Slot {
        self.slot("t")
    }

    fn bind(&mut self, name: &str, kind: VarKind) -> Slot {
        let s = self.slot(name);
        self.scopes
            .last_mut()
            .unwrap()
            .vars
            .insert(name.to_string(), (s, kind));
        s
    }

    fn var(&self, name: &str) -> (Slot, VarKind) {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.vars.get(name).copied())
            .unwrap_or_else(|| panic!("unresolved variable '{}' reached lowering", name))
    }

    fn endpoint(&self, name: &str) -> Option<Endpoint> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.endpoints.get(name).copied())
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push(Scope::default());
        for s in &b.items {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn scoped_stmt(&mut self, s: &Stmt) {
        self.scopes.push(Scope::default());
        self.stmt(s);
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(d) => self.declaration(d),
            StmtKind::Assign { target, op, value } => self.assign(target, *op, value),
            StmtKind::Step { target, increment } => {
                let op = if *increment { AssignOp::Add } else { AssignOp::Sub };
                let one = Expr {
                    kind: ExprKind::Int(1),
                    span: s.span.clone(),
                };
                self.assign(target, op, &one);
            }
            StmtKind::Expr(e) => self.effect(e),
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                let c = self.expr(cond);
                let br = self.emit(IrOp::Branch {
                    cond: c,
                    if_false: 0,
                });
                self.scoped_stmt(then);
                match otherwise {
                    Some(o) => {
                        let j = self.emit(IrOp::Jump { target: 0 });
                        let else_at = self.here();
                        self.patch(br, else_at);
                        self.scoped_stmt(o);
                        let end = self.here();
                        self.patch(j, end);
                    }
                    None => {
                        let end = self.here();
                        self.patch(br, end);
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let top = self.here();
                let c = self.expr(cond);
                let br = self.emit(IrOp::Branch {
                    cond: c,
                    if_false: 0,
                });
                self.scoped_stmt(body);
                self.emit(IrOp::Jump { target: top });
                let end = self.here();
                self.patch(br, end);
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
                let top = self.here();
                let br = cond.as_ref().map(|c| {
                    let c = self.expr(c);
                    self.emit(IrOp::Branch {
                        cond: c,
                        if_false: 0,
                    })
                });
                self.scoped_stmt(body);
                if let Some(st) = step {
                    self.stmt(st);
                }
                self.emit(IrOp::Jump { target: top });
                if let Some(br) = br {
                    let end = self.here();
                    self.patch(br, end);
                }
                self.scopes.pop();
            }
            StmtKind::Return(value) => {
                let value = value.as_ref().map(|v| {
                    let o = self.expr(v);
                    match self.ret.and_then(coerce_of) {
                        Some(c) => {
                            let t = self.temp();
                            self.emit(IrOp::Move {
                                dst: t,
                                src: o,
                                coerce: Some(c),
                            });
                            Operand::Slot(t)
                        }
                        None => o,
                    }
                });
                self.emit(IrOp::Return { value });
            }
            StmtKind::Block(b) => self.block(b),
            StmtKind::Empty => {}
            StmtKind::SetP { name, value } => {
                let src = self.expr(value);
                if let Some(&(chan, _)) = self.params.get(&name.name) {
                    self.emit(IrOp::Write { chan, src });
                } else {
                    let ep = self.endpoint(&name.name).expect("checked endpoint");
                    self.emit(IrOp::Put {
                        ctx: ep.ctx,
                        chan: ep.chan,
                        src,
                    });
                }
            }
            StmtKind::SetA { name, value } => {
                let src = self.expr(value);
                let ep = self.endpoint(&name.name).expect("checked endpoint");
                self.emit(IrOp::Put {
                    ctx: ep.ctx,
                    chan: ep.chan,
                    src,
                });
            }
            StmtKind::Index(name) => {
                let dst = self.bind(&name.name, VarKind::Scalar(ValueClass::IntegerScalar));
                self.emit(IrOp::Index { dst });
            }
            StmtKind::Create(c) => self.create(c),
        }
    }

    fn declaration(&mut self, d: &Declaration) {
        let float = d.base.is_float();
        for dd in &d.declarators {
            let init = match &dd.init {
                Some(Initializer::Expr(e)) => Some(self.expr(e)),
                _ => None,
            };
            let list: Vec<Operand> = match &dd.init {
                Some(Initializer::List(items)) => items.iter().map(|e| self.expr(e)).collect(),
                _ => Vec::new(),
            };
            let ty = CType {
                base: d.base,
                pointer: dd.pointer,
            };
            let kind = var_kind(ty, dd.array_len.is_some());
            let dst = self.bind(&dd.name.name, kind);
            if let Some(len) = dd.array_len {
                self.emit(IrOp::NewArray { dst, float, len });
                for (i, src) in list.into_iter().enumerate() {
                    self.emit(IrOp::Store {
                        base: Operand::Slot(dst),
                        index: Operand::Int(i as i64),
                        src,
                    });
                }
                continue;
            }
            let src = init.unwrap_or(if float && !dd.pointer {
                Operand::Float(0.0)
            } else {
                Operand::Int(0)
            });
            self.emit(IrOp::Move {
                dst,
                src,
                coerce: coerce_of(kind),
            });
        }
    }

    fn assign(&mut self, target: &Expr, op: AssignOp, value: &Expr) {
        let v = self.expr(value);
        match &target.kind {
            ExprKind::Var(name) => {
                let (slot, kind) = self.var(name);
                let src = match op.binary() {
                    None => v,
                    Some(bop) => {
                        let t = self.temp();
                        self.emit(IrOp::Binary {
                            dst: t,
                            op: bop,
                            a: Operand::Slot(slot),
                            b: v,
                        });
                        Operand::Slot(t)
                    }
                };
                self.emit(IrOp::Move {
                    dst: slot,
                    src,
                    coerce: coerce_of(kind),
                });
            }
            ExprKind::Index(base, idx) => {
                let base = self.expr(base);
                let index = self.expr(idx);
                let src = match op.binary() {
                    None => v,
                    Some(bop) => {
                        let old = self.temp();
                        self.emit(IrOp::Load {
                            dst: old,
                            base,
                            index,
                        });
                        let t = self.temp();
                        self.emit(IrOp::Binary {
                            dst: t,
                            op: bop,
                            a: Operand::Slot(old),
                            b: v,
                        });
                        Operand::Slot(t)
                    }
                };
                self.emit(IrOp::Store { base, index, src });
            }
            _ => unreachable!("assignment target checked by the parser"),
        }
    }

    fn create(&mut self, c: &CreateConstruct) {
        let opt = |l: &mut Self, e: &Option<Expr>, default: i64| match e {
            Some(e) => l.expr(e),
            None => Operand::Int(default),
        };
        let placement = opt(self, &c.placement, 0);
        let start = opt(self, &c.start, 0);
        let limit = opt(self, &c.limit, 1);
        let step = opt(self, &c.step, 1);
        let window = opt(self, &c.window, 0);
        let (kind, mode) = match c.specifier {
            Some(CreateSpecifier::Exclusive) => (ContextKind::Exclusive, FailureMode::Wait),
            Some(CreateSpecifier::ForceWait) => (ContextKind::Regular, FailureMode::Wait),
            Some(CreateSpecifier::ForceSeq) => (ContextKind::Regular, FailureMode::ForceSeq),
            None => (ContextKind::Regular, FailureMode::SerializeOnFail),
        };
        let ctx = self.slot(&format!("ctx.{}", c.target.name));
        self.emit(IrOp::Allocate {
            ctx,
            placement,
            kind,
            mode,
        });
        let signature = ChannelSignature(c.args.iter().map(|a| (a.direction, a.value_class)).collect());
        self.emit(IrOp::Configure {
            ctx,
            start,
            limit,
            step,
            window,
            signature,
        });
        for (i, a) in c.args.iter().enumerate() {
            if let Some(init) = &a.init {
                let src = self.expr(init);
                self.emit(IrOp::Put {
                    ctx,
                    chan: i as u32,
                    src,
                });
            }
        }
        let func = self.index[&c.target.name];
        self.emit(IrOp::Create { ctx, func });

        let mut named = Vec::new();
        for (i, a) in c.args.iter().enumerate() {
            if let Some(n) = &a.name {
                let result = self.slot(&n.name);
                let ep = Endpoint {
                    ctx,
                    chan: i as u32,
                    result,
                };
                self.scopes
                    .last_mut()
                    .unwrap()
                    .endpoints
                    .insert(n.name.clone(), ep);
                named.push(ep);
            }
        }
        for s in &c.body {
            self.stmt(s);
        }
        match c.terminator {
            Terminator::Sync => {
                self.emit(IrOp::Sync { ctx });
                for ep in named {
                    self.emit(IrOp::Get {
                        dst: ep.result,
                        ctx,
                        chan: ep.chan,
                    });
                }
                self.emit(IrOp::Release {
                    ctx,
                    deferred: false,
                });
            }
            Terminator::Detach => {
                self.emit(IrOp::Release {
                    ctx,
                    deferred: true,
                });
            }
        }
    }

    /// Expression evaluated for its side effects only.
    fn effect(&mut self, e: &Expr) {
        if let ExprKind::Call(name, args) = &e.kind {
            self.call(name, args, false);
        } else {
            self.expr(e);
        }
    }

    fn expr(&mut self, e: &Expr) -> Operand {
        match &e.kind {
            ExprKind::Int(v) => Operand::Int(*v),
            ExprKind::Float(v) => Operand::Float(*v),
            ExprKind::Str(_) => unreachable!("string literal outside print_str"),
            ExprKind::Var(name) => Operand::Slot(self.var(name).0),
            ExprKind::Unary(op, a) => {
                let a = self.expr(a);
                let dst = self.temp();
                self.emit(IrOp::Unary { dst, op: *op, a });
                Operand::Slot(dst)
            }
            ExprKind::Binary(BinaryOp::And, a, b) => self.logical(a, b, true),
            ExprKind::Binary(BinaryOp::Or, a, b) => self.logical(a, b, false),
            ExprKind::Binary(op, a, b) => {
                let a = self.expr(a);
                let b = self.expr(b);
                let dst = self.temp();
                self.emit(IrOp::Binary { dst, op: *op, a, b });
                Operand::Slot(dst)
            }
            ExprKind::Index(base, idx) => {
                let base = self.expr(base);
                let index = self.expr(idx);
                let dst = self.temp();
                self.emit(IrOp::Load { dst, base, index });
                Operand::Slot(dst)
            }
            ExprKind::Call(name, args) => self.call(name, args, true).unwrap_or(Operand::Int(0)),
            ExprKind::GetP(name) => {
                if let Some(&(chan, _)) = self.params.get(&name.name) {
                    let dst = self.temp();
                    self.emit(IrOp::Read { dst, chan });
                    Operand::Slot(dst)
                } else {
                    self.geta(name)
                }
            }
            ExprKind::GetA(name) => self.geta(name),
        }
    }

    fn geta(&mut self, name: &Ident) -> Operand {
        let ep = self.endpoint(&name.name).expect("checked endpoint");
        Operand::Slot(ep.result)
    }

    /// Short-circuit `&&` (`and`) or `||`, yielding 0 or 1.
    fn logical(&mut self, a: &Expr, b: &Expr, and: bool) -> Operand {
        let dst = self.temp();
        self.emit(IrOp::Move {
            dst,
            src: Operand::Int(if and { 0 } else { 1 }),
            coerce: None,
        });
        let av = self.expr(a);
        let skip = if and {
            self.emit(IrOp::Branch {
                cond: av,
                if_false: 0,
            })
        } else {
            let br = self.emit(IrOp::Branch {
                cond: av,
                if_false: 0,
            });
            let j = self.emit(IrOp::Jump { target: 0 });
            let rhs = self.here();
            self.patch(br, rhs);
            j
        };
        let bv = self.expr(b);
        self.emit(IrOp::Binary {
            dst,
            op: BinaryOp::Ne,
            a: bv,
            b: Operand::Int(0),
        });
        let end = self.here();
        self.patch(skip, end);
        Operand::Slot(dst)
    }

    fn call(&mut self, name: &Ident, args: &[Expr], want: bool) -> Option<Operand> {
        match name.name.as_str() {
            "print_str" => {
                let ExprKind::Str(s) = &args[0].kind else {
                    unreachable!("print_str argument checked")
                };
                let id = match self.strings.iter().position(|x| x == s) {
                    Some(i) => i,
                    None => {
                        self.strings.push(s.clone());
                        self.strings.len() - 1
                    }
                };
                self.emit(IrOp::PrintStr { id });
                return None;
            }
            "print_int" | "print_float" => {
                let src = self.expr(&args[0]);
                self.emit(if name.name == "print_int" {
                    IrOp::PrintInt { src }
                } else {
                    IrOp::PrintFloat { src }
                });
                return None;
            }
            _ => {}
        }
        let ops: Vec<Operand> = args.iter().map(|a| self.expr(a)).collect();
        let dst = self.temp();
        let op = match name.name.as_str() {
            "sl_default_placement" => IrOp::PlaceDefault { dst },
            "sl_local_processor_address" => IrOp::PlaceLocal { dst },
            "sl_placement_size" => IrOp::PlaceSize { dst, addr: ops[0] },
            "sl_first_processor_address" => IrOp::PlaceFirst { dst, addr: ops[0] },
            "sl_placement" => IrOp::PlaceMake {
                dst,
                core: ops[0],
                size: ops[1],
            },
            _ => {
                let func = self.index[&name.name];
                IrOp::Call {
                    dst: if want { Some(dst) } else { None },
                    func,
                    args: ops,
                }
            }
        };
        self.emit(op);
        Some(Operand::Slot(dst))
    }
}

#[cfg(test)]
mod tests {
    use crate::check::compile;
    use crate::ir::{ir_dump, IrOp};

    const HW: &str = "sl_def(hw) { print_str(\"hello world\\n\"); } sl_enddef\nint main(void) {\n    sl_create(,,,,,, hw);\n    sl_sync();\n    return 0;\n}\n";

    #[test]
    fn defaults_fill_the_range() {
        let ir = compile(HW, "hw.sl").unwrap();
        assert!(ir_dump(&ir).contains("CONFIGURE range=(0,1,1) ws=0"));
    }

    #[test]
    fn dump_is_deterministic() {
        assert_eq!(
            ir_dump(&compile(HW, "a.sl").unwrap()),
            ir_dump(&compile(HW, "a.sl").unwrap())
        );
    }

    #[test]
    fn empty_main_has_no_family_ops() {
        let ir = compile("int main(void) { return 0; }", "e.sl").unwrap();
        let d = ir_dump(&ir);
        assert!(d.starts_with("entry main\n"));
        assert!(!d.contains("ALLOCATE"));
    }

    #[test]
    fn event_order_per_construct() {
        let src = "sl_def(foo, , sl_shparm(int, a)) { sl_setp(a, sl_getp(a) + 1); } sl_enddef\nint main(void) { sl_create(, , 0, 10, 1, 0, , foo, sl_sharg(int, x)); sl_setp(x, 0); sl_sync(); print_int(sl_getp(x)); return 0; }";
        let ir = compile(src, "l2.sl").unwrap();
        let main = &ir.functions[ir.entry];
        let names: Vec<&str> = main
            .ops
            .iter()
            .filter_map(|op| match op {
                IrOp::Allocate { .. } => Some("allocate"),
                IrOp::Configure { .. } => Some("configure"),
                IrOp::Create { .. } => Some("create"),
                IrOp::Put { .. } => Some("put"),
                IrOp::Sync { .. } => Some("sync"),
                IrOp::Get { .. } => Some("get"),
                IrOp::Release { .. } => Some("release"),
                _ => None,
            })
            .collect();
        assert_eq!(
            names,
            ["allocate", "configure", "create", "put", "sync", "get", "release"]
        );
        assert!(ir_dump(&ir).contains("CONFIGURE range=(0,10,1) ws=0"));
    }

    #[test]
    fn detach_has_no_sync() {
        let src = "sl_def(p) { print_str(\"x\"); } sl_enddef\nint main(void) { sl_create(,,,,,, sl__exclusive, p); sl_detach(); return 0; }";
        let ir = compile(src, "d.sl").unwrap();
        let main = &ir.functions[ir.entry];
        assert!(!main.ops.iter().any(|o| matches!(o, IrOp::Sync { .. })));
        assert!(ir_dump(&ir).contains("kind=exclusive mode=wait"));
        assert!(main
            .ops
            .iter()
            .any(|o| matches!(o, IrOp::Release { deferred: true, .. })));
    }
}

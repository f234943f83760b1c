//! Lowered program representation. Concurrency operations are exactly the
//! SVP control events; everything else is plumbing for the C subset.

use std::fmt::{self, Write};

use crate::frontend::ast::{BinaryOp, Direction, UnaryOp, ValueClass};
use crate::frontend::token::escape_string;

/// Index of a frame-local storage cell.
pub type Slot = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operand {
    Slot(Slot),
    Int(i64),
    Float(f64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Slot(s) => write!(f, "%{}", s),
            Operand::Int(v) => write!(f, "{}", v),
            Operand::Float(v) => write!(f, "{:?}", v),
        }
    }
}

/// Conversion applied when a value is stored into a typed location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coerce {
    Int,
    Float,
}

impl Coerce {
    pub fn for_class(class: ValueClass) -> Option<Coerce> {
        match class {
            ValueClass::IntegerScalar => Some(Coerce::Int),
            ValueClass::FloatScalar => Some(Coerce::Float),
            ValueClass::ArrayHandle => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextKind {
    Regular,
    Exclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMode {
    SerializeOnFail,
    Wait,
    ForceSeq,
}

impl ContextKind {
    pub fn name(self) -> &'static str {
        match self {
            ContextKind::Regular => "regular",
            ContextKind::Exclusive => "exclusive",
        }
    }
}

impl FailureMode {
    pub fn name(self) -> &'static str {
        match self {
            FailureMode::SerializeOnFail => "serialize-on-fail",
            FailureMode::Wait => "wait",
            FailureMode::ForceSeq => "force-seq",
        }
    }
}

/// Channel interface of a thread function, in parameter order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChannelSignature(pub Vec<(Direction, ValueClass)>);

impl ChannelSignature {
    pub fn has_shared(&self) -> bool {
        self.0.iter().any(|(d, _)| *d == Direction::Shared)
    }
}

impl fmt::Display for ChannelSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('[')?;
        for (i, (d, c)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let d = match d {
                Direction::Global => "global",
                Direction::Shared => "shared",
            };
            let c = match c {
                ValueClass::IntegerScalar => "int",
                ValueClass::FloatScalar => "float",
                ValueClass::ArrayHandle => "handle",
            };
            write!(f, "{} {}", d, c)?;
        }
        f.write_char(']')
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrOp {
    Allocate {
        ctx: Slot,
        placement: Operand,
        kind: ContextKind,
        mode: FailureMode,
    },
    Configure {
        ctx: Slot,
        start: Operand,
        limit: Operand,
        step: Operand,
        window: Operand,
        signature: ChannelSignature,
    },
    Create {
        ctx: Slot,
        func: usize,
    },
    Sync {
        ctx: Slot,
    },
    /// `deferred` hands release to the runtime at family termination.
    Release {
        ctx: Slot,
        deferred: bool,
    },
    Put {
        ctx: Slot,
        chan: u32,
        src: Operand,
    },
    Get {
        dst: Slot,
        ctx: Slot,
        chan: u32,
    },
    Read {
        dst: Slot,
        chan: u32,
    },
    Write {
        chan: u32,
        src: Operand,
    },
    Index {
        dst: Slot,
    },
    Move {
        dst: Slot,
        src: Operand,
        coerce: Option<Coerce>,
    },
    Unary {
        dst: Slot,
        op: UnaryOp,
        a: Operand,
    },
    Binary {
        dst: Slot,
        op: BinaryOp,
        a: Operand,
        b: Operand,
    },
    NewArray {
        dst: Slot,
        float: bool,
        len: u32,
    },
    Load {
        dst: Slot,
        base: Operand,
        index: Operand,
    },
    Store {
        base: Operand,
        index: Operand,
        src: Operand,
    },
    Jump {
        target: usize,
    },
    Branch {
        cond: Operand,
        if_false: usize,
    },
    Call {
        dst: Option<Slot>,
        func: usize,
        args: Vec<Operand>,
    },
    Return {
        value: Option<Operand>,
    },
    PrintInt {
        src: Operand,
    },
    PrintFloat {
        src: Operand,
    },
    PrintStr {
        id: usize,
    },
    PlaceDefault {
        dst: Slot,
    },
    PlaceSize {
        dst: Slot,
        addr: Operand,
    },
    PlaceFirst {
        dst: Slot,
        addr: Operand,
    },
    PlaceLocal {
        dst: Slot,
    },
    PlaceMake {
        dst: Slot,
        core: Operand,
        size: Operand,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    Thread {
        signature: ChannelSignature,
    },
    /// Parameters occupy slots `0..params.len()`.
    Plain {
        params: Vec<Option<Coerce>>,
        returns_value: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrFunction {
    pub name: String,
    pub kind: FunctionKind,
    /// Source name of each slot; temporaries are named `t`.
    pub slot_names: Vec<String>,
    pub ops: Vec<IrOp>,
}

impl IrFunction {
    pub fn slot_count(&self) -> usize {
        self.slot_names.len()
    }

    pub fn signature(&self) -> Option<&ChannelSignature> {
        match &self.kind {
            FunctionKind::Thread { signature } => Some(signature),
            FunctionKind::Plain { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IrProgram {
    pub functions: Vec<IrFunction>,
    pub entry: usize,
    /// String constants referenced by `PrintStr`.
    pub strings: Vec<String>,
}

impl IrProgram {
    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }
}

/// Deterministic line-oriented text form.
pub fn ir_dump(program: &IrProgram) -> String {
    let mut out = String::new();
    if let Some(f) = program.functions.get(program.entry) {
        let _ = writeln!(out, "entry {}", f.name);
    }
    for (i, s) in program.strings.iter().enumerate() {
        let _ = writeln!(out, "const ${} = {}", i, escape_string(s));
    }
    for f in &program.functions {
        out.push('\n');
        match &f.kind {
            FunctionKind::Thread { signature } => {
                let _ = writeln!(out, "thread {} {}", f.name, signature);
            }
            FunctionKind::Plain { params, returns_value } => {
                let _ = writeln!(
                    out,
                    "function {} params={}{}",
                    f.name,
                    params.len(),
                    if *returns_value { " returns" } else { "" }
                );
            }
        }
        let names: Vec<String> = f
            .slot_names
            .iter()
            .enumerate()
            .map(|(i, n)| format!("%{}={}", i, n))
            .collect();
        let _ = writeln!(out, "  slots {}", names.join(" "));
        for (i, op) in f.ops.iter().enumerate() {
            let _ = writeln!(out, "  {:4}: {}", i, OpText(op, program));
        }
    }
    out
}

struct OpText<'a>(&'a IrOp, &'a IrProgram);

impl fmt::Display for OpText<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fname = |i: usize| {
            self.1
                .functions
                .get(i)
                .map(|f| f.name.as_str())
                .unwrap_or("?")
        };
        match self.0 {
            IrOp::Allocate {
                ctx,
                placement,
                kind,
                mode,
            } => write!(
                f,
                "ALLOCATE %{} place={} kind={} mode={}",
                ctx,
                placement,
                kind.name(),
                mode.name()
            ),
            IrOp::Configure {
                ctx,
                start,
                limit,
                step,
                window,
                signature,
            } => write!(
                f,
                "CONFIGURE range=({},{},{}) ws={} ctx=%{} sig={}",
                start, limit, step, window, ctx, signature
            ),
            IrOp::Create { ctx, func } => write!(f, "CREATE %{} {}", ctx, fname(*func)),
            IrOp::Sync { ctx } => write!(f, "SYNC %{}", ctx),
            IrOp::Release { ctx, deferred } => {
                write!(f, "RELEASE %{}{}", ctx, if *deferred { " deferred" } else { "" })
            }
            IrOp::Put { ctx, chan, src } => write!(f, "PUT %{} chan={} {}", ctx, chan, src),
            IrOp::Get { dst, ctx, chan } => write!(f, "%{} = GET %{} chan={}", dst, ctx, chan),
            IrOp::Read { dst, chan } => write!(f, "%{} = READ chan={}", dst, chan),
            IrOp::Write { chan, src } => write!(f, "WRITE chan={} {}", chan, src),
            IrOp::Index { dst } => write!(f, "%{} = index", dst),
            IrOp::Move { dst, src, coerce } => match coerce {
                None => write!(f, "%{} = {}", dst, src),
                Some(Coerce::Int) => write!(f, "%{} = int {}", dst, src),
                Some(Coerce::Float) => write!(f, "%{} = float {}", dst, src),
            },
            IrOp::Unary { dst, op, a } => {
                let sym = match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                };
                write!(f, "%{} = {}{}", dst, sym, a)
            }
            IrOp::Binary { dst, op, a, b } => write!(f, "%{} = {} {} {}", dst, a, op.text(), b),
            IrOp::NewArray { dst, float, len } => write!(
                f,
                "%{} = array {}[{}]",
                dst,
                if *float { "float" } else { "int" },
                len
            ),
            IrOp::Load { dst, base, index } => write!(f, "%{} = {}[{}]", dst, base, index),
            IrOp::Store { base, index, src } => write!(f, "{}[{}] = {}", base, index, src),
            IrOp::Jump { target } => write!(f, "jump {}", target),
            IrOp::Branch { cond, if_false } => write!(f, "branch {} else {}", cond, if_false),
            IrOp::Call { dst, func, args } => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                match dst {
                    Some(d) => write!(f, "%{} = call {}({})", d, fname(*func), args.join(", ")),
                    None => write!(f, "call {}({})", fname(*func), args.join(", ")),
                }
            }
            IrOp::Return { value: Some(v) } => write!(f, "return {}", v),
            IrOp::Return { value: None } => f.write_str("return"),
            IrOp::PrintInt { src } => write!(f, "print_int {}", src),
            IrOp::PrintFloat { src } => write!(f, "print_float {}", src),
            IrOp::PrintStr { id } => write!(f, "print_str ${}", id),
            IrOp::PlaceDefault { dst } => write!(f, "%{} = place.default", dst),
            IrOp::PlaceSize { dst, addr } => write!(f, "%{} = place.size {}", dst, addr),
            IrOp::PlaceFirst { dst, addr } => write!(f, "%{} = place.first {}", dst, addr),
            IrOp::PlaceLocal { dst } => write!(f, "%{} = place.local", dst),
            IrOp::PlaceMake { dst, core, size } => {
                write!(f, "%{} = place.make {} {}", dst, core, size)
            }
        }
    }
}

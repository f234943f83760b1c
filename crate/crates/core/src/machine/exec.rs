//! The interpreter and scheduler.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FamilyReport, MachineConfig, RunResult, RunStatus, TraceEvent};
use crate::channels::{Channel, ChannelError};
use crate::frontend::ast::{BinaryOp, UnaryOp};
use crate::ir::*;
use crate::placement::{self, PlacementAddress, ResolvedPlacement};
use crate::value::{ArrayId, FamilyId, Value};

type ThreadId = usize;

const MAX_FRAMES: usize = 4096;

struct Fault {
    code: &'static str,
    message: String,
}

fn fault(code: &'static str, message: impl Into<String>) -> Fault {
    Fault {
        code,
        message: message.into(),
    }
}

impl From<ChannelError> for Fault {
    fn from(e: ChannelError) -> Self {
        let code = match e {
            ChannelError::DoubleWrite { .. } => "E_DOUBLE_WRITE",
            ChannelError::WriteGlobal { .. } => "E_SETP_GLOBAL",
        };
        fault(code, e.to_string())
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    family: FamilyId,
    ordinal: u64,
    index: i64,
}

struct Frame {
    func: usize,
    pc: usize,
    slots: Vec<Value>,
    ret: Option<Slot>,
    ctx: Ctx,
    /// Body frame of a logical thread, as opposed to a plain call.
    member: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Wait {
    Read { family: FamilyId, chan: u32, ordinal: u64 },
    Sync(FamilyId),
    Alloc { placement: ResolvedPlacement, exclusive: bool },
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Ready,
    Blocked(Wait),
    Done,
}

struct Thread {
    core: u32,
    stack: Vec<Frame>,
    state: State,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Boot,
    Regular,
    Exclusive,
    Serialized,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Allocated,
    Configured,
    Running,
    Done,
    Released,
}

struct Share {
    core: u32,
    next: u64,
    end: u64,
    active: u64,
    held: u64,
    /// The first held slot is the exclusive context's own, not the pool's.
    dedicated: bool,
}

struct Family {
    func: usize,
    kind: Kind,
    placement: ResolvedPlacement,
    creator_core: u32,
    range: (i64, i64, i64),
    window: u64,
    n: u64,
    channels: Vec<Channel>,
    phase: Phase,
    shares: Vec<Share>,
    finished: u64,
    serial_started: bool,
    detached: bool,
}

struct Core {
    free_entries: u32,
    free_slots: u32,
    exclusive: Option<FamilyId>,
    waiters: VecDeque<ThreadId>,
    exclusive_waiters: VecDeque<ThreadId>,
}

struct Array {
    float: bool,
    data: Vec<Value>,
}

pub(super) struct Machine<'p> {
    prog: &'p IrProgram,
    cfg: MachineConfig,
    rng: ChaCha8Rng,
    step: u64,
    cores: Vec<Core>,
    families: Vec<Family>,
    /// Families that may still have threads to activate.
    spawning: Vec<FamilyId>,
    threads: Vec<Thread>,
    live: Vec<ThreadId>,
    arrays: Vec<Array>,
    output: String,
    trace: Vec<TraceEvent>,
    reports: Vec<FamilyReport>,
    /// Thread currently holding the scheduler and the ops it has left.
    burst: Option<(ThreadId, u32)>,
}

/// Longest run of consecutive ops one thread gets before a new pick.
const MAX_BURST: u32 = 64;

impl<'p> Machine<'p> {
    pub(super) fn new(prog: &'p IrProgram, cfg: &MachineConfig) -> Self {
        let cores = (0..cfg.cores)
            .map(|_| Core {
                free_entries: cfg.family_entries,
                free_slots: cfg.hw_threads,
                exclusive: None,
                waiters: VecDeque::new(),
                exclusive_waiters: VecDeque::new(),
            })
            .collect();
        Machine {
            prog,
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            step: 0,
            cores,
            families: Vec::new(),
            spawning: Vec::new(),
            threads: Vec::new(),
            live: Vec::new(),
            arrays: Vec::new(),
            output: String::new(),
            trace: Vec::new(),
            reports: Vec::new(),
            burst: None,
        }
    }

    pub(super) fn run(mut self) -> RunResult {
        let status = match self.cfg.validate() {
            Err(e) => RunStatus::RuntimeError {
                code: "E_CONFIG",
                message: e,
            },
            Ok(()) => {
                self.boot();
                self.main_loop()
            }
        };
        RunResult {
            status,
            output: self.output,
            trace: self.trace,
            steps: self.step,
            families: self.reports,
        }
    }

    fn emit(&mut self, event: &str, core: u32, family: FamilyId, thread: Option<i64>, detail: String) {
        self.trace.push(TraceEvent {
            step: self.step,
            event: event.to_string(),
            core,
            family,
            thread,
            detail,
        });
    }

    fn boot(&mut self) {
        let entry = self.prog.entry;
        self.families.push(Family {
            func: entry,
            kind: Kind::Boot,
            placement: ResolvedPlacement {
                first_core: 0,
                size: self.cfg.cores,
                local_restricted: false,
            },
            creator_core: 0,
            range: (0, 1, 1),
            window: 0,
            n: 1,
            channels: Vec::new(),
            phase: Phase::Running,
            shares: Vec::new(),
            finished: 0,
            serial_started: false,
            detached: false,
        });
        self.cores[0].free_slots -= 1;
        self.spawn(0, 0, 0);
    }

    fn spawn(&mut self, family: FamilyId, ordinal: u64, core: u32) {
        let frame = self.member_frame(family, ordinal);
        let index = frame.ctx.index;
        self.threads.push(Thread {
            core,
            stack: vec![frame],
            state: State::Ready,
        });
        self.live.push(self.threads.len() - 1);
        self.emit("thread-start", core, family, Some(index), String::new());
    }

    fn member_frame(&self, family: FamilyId, ordinal: u64) -> Frame {
        let fam = &self.families[family];
        let index = fam.range.0 + ordinal as i64 * fam.range.2;
        Frame {
            func: fam.func,
            pc: 0,
            slots: vec![Value::Int(0); self.prog.functions[fam.func].slot_count()],
            ret: None,
            ctx: Ctx {
                family,
                ordinal,
                index,
            },
            member: true,
        }
    }

    fn main_loop(&mut self) -> RunStatus {
        loop {
            if self.step >= self.cfg.max_steps {
                return RunStatus::StepLimit;
            }
            self.grant_allocations();
            self.activate();
            self.wake();
            let runnable: Vec<ThreadId> = self
                .live
                .iter()
                .copied()
                .filter(|&t| self.threads[t].state == State::Ready)
                .collect();
            if runnable.is_empty() {
                if self.live.is_empty() && self.families.iter().all(|f| f.phase >= Phase::Done) {
                    return RunStatus::Ok;
                }
                let report = self.deadlock_report();
                let detail = report.join("; ");
                self.emit("deadlock", 0, 0, None, detail);
                return RunStatus::Deadlock { report };
            }
            let pick = match self.burst {
                Some((t, left)) if left > 0 && runnable.contains(&t) => {
                    self.burst = Some((t, left - 1));
                    t
                }
                _ => {
                    let t = runnable[self.rng.random_range(0..runnable.len())];
                    self.burst = Some((t, self.rng.random_range(0..MAX_BURST)));
                    t
                }
            };
            self.step += 1;
            if let Err(f) = self.exec(pick) {
                return RunStatus::RuntimeError {
                    code: f.code,
                    message: f.message,
                };
            }
        }
    }

    // ---- resources -------------------------------------------------------

    fn regular_fits(&self, p: ResolvedPlacement) -> bool {
        self.cores[p.first_core as usize].free_entries > 0
            && p.cores().all(|c| self.cores[c as usize].free_slots > 0)
    }

    fn new_family(&mut self, kind: Kind, placement: ResolvedPlacement, creator_core: u32, mode: FailureMode, why: Option<String>) -> FamilyId {
        let id = self.families.len();
        match kind {
            Kind::Regular => {
                self.cores[placement.first_core as usize].free_entries -= 1;
                for c in placement.cores() {
                    self.cores[c as usize].free_slots -= 1;
                }
            }
            Kind::Exclusive => self.cores[placement.first_core as usize].exclusive = Some(id),
            Kind::Serialized | Kind::Boot => {}
        }
        self.families.push(Family {
            func: 0,
            kind,
            placement,
            creator_core,
            range: (0, 0, 1),
            window: 0,
            n: 0,
            channels: Vec::new(),
            phase: Phase::Allocated,
            shares: Vec::new(),
            finished: 0,
            serial_started: false,
            detached: false,
        });
        let kind_name = if kind == Kind::Exclusive { "exclusive" } else { "regular" };
        let outcome = if kind == Kind::Serialized { "serialized" } else { "context" };
        let detail = format!(
            "kind={} mode={} place=({},{}) outcome={}",
            kind_name,
            mode.name(),
            placement.first_core,
            placement.size,
            outcome
        );
        self.emit("allocate", placement.first_core, id, None, detail);
        if let Some(why) = why {
            self.emit("serialize-fallback", creator_core, id, None, why);
        }
        id
    }

    fn grant_allocations(&mut self) {
        for c in 0..self.cores.len() {
            while let Some(&t) = self.cores[c].exclusive_waiters.front() {
                if self.cores[c].exclusive.is_some() {
                    break;
                }
                self.cores[c].exclusive_waiters.pop_front();
                self.grant(t);
            }
            while let Some(&t) = self.cores[c].waiters.front() {
                let State::Blocked(Wait::Alloc { placement, .. }) = self.threads[t].state else {
                    unreachable!("allocation waiter not blocked on allocation")
                };
                if !self.regular_fits(placement) {
                    break;
                }
                self.cores[c].waiters.pop_front();
                self.grant(t);
            }
        }
    }

    fn grant(&mut self, t: ThreadId) {
        let State::Blocked(Wait::Alloc { placement, exclusive }) = self.threads[t].state else {
            unreachable!("granting a thread that is not waiting")
        };
        let kind = if exclusive { Kind::Exclusive } else { Kind::Regular };
        let core = self.threads[t].core;
        let id = self.new_family(kind, placement, core, FailureMode::Wait, None);
        let frame = self.threads[t].stack.last_mut().unwrap();
        let IrOp::Allocate { ctx, .. } = self.prog.functions[frame.func].ops[frame.pc] else {
            unreachable!("waiting thread not at ALLOCATE")
        };
        frame.slots[ctx as usize] = Value::Family(id);
        frame.pc += 1;
        self.threads[t].state = State::Ready;
    }

    fn activate(&mut self) {
        let mut i = 0;
        while i < self.spawning.len() {
            let fid = self.spawning[i];
            let window = self.families[fid].window;
            let mut pending = false;
            for s in 0..self.families[fid].shares.len() {
                loop {
                    let sh = &self.families[fid].shares[s];
                    if sh.next >= sh.end || (window > 0 && sh.active >= window) {
                        break;
                    }
                    let core = sh.core;
                    if sh.active >= sh.held {
                        if self.cores[core as usize].free_slots == 0 {
                            break;
                        }
                        self.cores[core as usize].free_slots -= 1;
                        self.families[fid].shares[s].held += 1;
                    }
                    let sh = &mut self.families[fid].shares[s];
                    let ordinal = sh.next;
                    sh.next += 1;
                    sh.active += 1;
                    self.spawn(fid, ordinal, core);
                }
                let sh = &self.families[fid].shares[s];
                pending |= sh.next < sh.end;
            }
            if pending {
                i += 1;
            } else {
                self.spawning.swap_remove(i);
            }
        }
        self.spawning.sort_unstable();
    }

    fn wake(&mut self) {
        for &t in &self.live {
            let ready = match self.threads[t].state {
                State::Blocked(Wait::Read {
                    family,
                    chan,
                    ordinal,
                }) => self.families[family].channels[chan as usize].read(ordinal).is_some(),
                State::Blocked(Wait::Sync(f)) => self.families[f].phase >= Phase::Done,
                _ => false,
            };
            if ready {
                self.threads[t].state = State::Ready;
            }
        }
    }

    /// Thread function named by the ALLOCATE a waiting thread is stuck on.
    fn alloc_target(&self, t: ThreadId) -> String {
        let frame = self.threads[t].stack.last().unwrap();
        let func = &self.prog.functions[frame.func];
        match func.ops[frame.pc] {
            IrOp::Allocate { ctx, .. } => {
                let name = &func.slot_names[ctx as usize];
                format!("`{}` in `{}`", name.strip_prefix("ctx.").unwrap_or(name), func.name)
            }
            _ => format!("a family in `{}`", func.name),
        }
    }

    fn deadlock_report(&self) -> Vec<String> {
        let mut out = Vec::new();
        for &t in &self.live {
            let th = &self.threads[t];
            let ctx = th.stack.last().map(|f| f.ctx).unwrap();
            let who = format!(
                "thread (family {}, index {}, core {})",
                ctx.family, ctx.index, th.core
            );
            let why = match th.state {
                State::Blocked(Wait::Read { family, chan, .. }) => {
                    format!("blocked reading channel {} of family {}", chan, family)
                }
                State::Blocked(Wait::Sync(f)) => format!("blocked in sync on family {}", f),
                State::Blocked(Wait::Alloc { placement, exclusive }) => {
                    let target = self.alloc_target(t);
                    if exclusive {
                        let holder = self.cores[placement.first_core as usize]
                            .exclusive
                            .map(|f| format!(" (held by family {})", f))
                            .unwrap_or_default();
                        format!(
                            "blocked allocating the exclusive context of core {} for {}{}",
                            placement.first_core, target, holder
                        )
                    } else {
                        format!(
                            "blocked allocating a context at ({},{}) for {}",
                            placement.first_core, placement.size, target
                        )
                    }
                }
                State::Ready | State::Done => continue,
            };
            out.push(format!("{} {}", who, why));
        }
        for &f in &self.spawning {
            out.push(format!("family {} has threads waiting for a hardware slot", f));
        }
        out
    }

    // ---- family lifecycle ----------------------------------------------

    fn family_of(&self, t: ThreadId, ctx: Slot) -> Result<FamilyId, Fault> {
        match self.threads[t].stack.last().unwrap().slots[ctx as usize] {
            Value::Family(f) => Ok(f),
            other => Err(fault("E_INTERNAL", format!("{} is not a context", other))),
        }
    }

    fn mark_done(&mut self, fid: FamilyId) {
        self.families[fid].phase = Phase::Done;
        if self.families[fid].detached {
            self.release(fid, true);
        }
    }

    fn release(&mut self, fid: FamilyId, auto: bool) {
        let fam = &self.families[fid];
        let core = fam.placement.first_core;
        let what = match fam.kind {
            Kind::Regular => {
                self.cores[core as usize].free_entries += 1;
                "context"
            }
            Kind::Exclusive => {
                self.cores[core as usize].exclusive = None;
                "context"
            }
            Kind::Serialized | Kind::Boot => "serialized",
        };
        self.families[fid].phase = Phase::Released;
        let detail = if auto { format!("{} auto", what) } else { what.to_string() };
        self.emit("release", core, fid, None, detail);
    }

    fn start_serial(&mut self, t: ThreadId, fid: FamilyId) {
        self.families[fid].serial_started = true;
        self.push_serial_member(t, fid, 0);
    }

    fn push_serial_member(&mut self, t: ThreadId, fid: FamilyId, ordinal: u64) {
        let frame = self.member_frame(fid, ordinal);
        let index = frame.ctx.index;
        self.threads[t].stack.push(frame);
        let core = self.threads[t].core;
        self.emit("thread-start", core, fid, Some(index), "serial".into());
    }

    /// A logical thread's body returned.
    fn member_end(&mut self, t: ThreadId, ctx: Ctx) -> Result<(), Fault> {
        let fid = ctx.family;
        let core = self.threads[t].core;
        for c in 0..self.families[fid].channels.len() {
            if self.families[fid].channels[c].unwritten(ctx.ordinal) {
                if self.cfg.forward_unwritten {
                    self.families[fid].channels[c].forward(ctx.ordinal);
                } else {
                    return Err(fault(
                        "E_UNWRITTEN_SHARED",
                        format!(
                            "thread {} of family {} ended without writing shared channel {}",
                            ctx.index, fid, c
                        ),
                    ));
                }
            }
        }
        self.emit("thread-end", core, fid, Some(ctx.index), String::new());
        self.families[fid].finished += 1;
        let fam = &self.families[fid];
        match fam.kind {
            Kind::Serialized => {
                if ctx.ordinal + 1 < fam.n {
                    self.push_serial_member(t, fid, ctx.ordinal + 1);
                } else {
                    self.mark_done(fid);
                }
            }
            Kind::Boot => {
                self.cores[core as usize].free_slots += 1;
                self.finish_thread(t);
                self.mark_done(fid);
            }
            Kind::Regular | Kind::Exclusive => {
                self.finish_thread(t);
                let sh = self.families[fid]
                    .shares
                    .iter_mut()
                    .find(|s| s.core == core)
                    .expect("thread ran on a core without a share");
                sh.active -= 1;
                let mut freed = 0;
                if sh.next >= sh.end {
                    while sh.held > sh.active {
                        sh.held -= 1;
                        if !(sh.dedicated && sh.held == 0) {
                            freed += 1;
                        }
                    }
                }
                self.cores[core as usize].free_slots += freed;
                if self.families[fid].finished == self.families[fid].n {
                    self.mark_done(fid);
                }
            }
        }
        Ok(())
    }

    fn finish_thread(&mut self, t: ThreadId) {
        self.threads[t].state = State::Done;
        self.live.retain(|&x| x != t);
    }

    // ---- execution -----------------------------------------------------

    fn frame(&self, t: ThreadId) -> &Frame {
        self.threads[t].stack.last().unwrap()
    }

    fn frame_mut(&mut self, t: ThreadId) -> &mut Frame {
        self.threads[t].stack.last_mut().unwrap()
    }

    fn val(&self, t: ThreadId, o: Operand) -> Value {
        match o {
            Operand::Slot(s) => self.frame(t).slots[s as usize],
            Operand::Int(i) => Value::Int(i),
            Operand::Float(f) => Value::Float(f),
        }
    }

    fn int(&self, t: ThreadId, o: Operand, what: &str) -> Result<i64, Fault> {
        self.val(t, o)
            .as_int()
            .ok_or_else(|| fault("E_TYPE", format!("{} must be an integer", what)))
    }

    fn set(&mut self, t: ThreadId, s: Slot, v: Value) {
        self.frame_mut(t).slots[s as usize] = v;
    }

    fn advance(&mut self, t: ThreadId) {
        self.frame_mut(t).pc += 1;
    }

    fn block(&mut self, t: ThreadId, w: Wait) {
        self.threads[t].state = State::Blocked(w);
    }

    fn array(&self, v: Value) -> Result<ArrayId, Fault> {
        match v {
            Value::Handle(a) => Ok(a),
            other => Err(fault("E_NULL_HANDLE", format!("indexing {}, which is not an array", other))),
        }
    }

    fn element(&self, base: Value, index: Value) -> Result<(ArrayId, usize), Fault> {
        let a = self.array(base)?;
        let i = index
            .as_int()
            .ok_or_else(|| fault("E_TYPE", "array index must be an integer"))?;
        let len = self.arrays[a].data.len();
        if i < 0 || i as usize >= len {
            return Err(fault(
                "E_BOUNDS",
                format!("index {} out of bounds for array of length {}", i, len),
            ));
        }
        Ok((a, i as usize))
    }

    /// Resolve a placement operand against the running thread's family.
    fn resolve_placement(&self, t: ThreadId, v: Value) -> Result<ResolvedPlacement, Fault> {
        let addr = PlacementAddress::from_value(v).map_err(|e| fault("E_BAD_PLACEMENT", e.0))?;
        let ctx = self.frame(t).ctx;
        placement::resolve(
            addr,
            self.families[ctx.family].placement,
            self.threads[t].core,
            self.cfg.cores,
        )
        .map_err(|e| fault("E_BAD_PLACEMENT", e.0))
    }

    /// (core, size) named by an address value, specials resolved first.
    fn address_parts(&self, t: ThreadId, v: Value) -> Result<(u64, u64), Fault> {
        match PlacementAddress::from_value(v).map_err(|e| fault("E_BAD_PLACEMENT", e.0))? {
            PlacementAddress::Explicit { core, size } => Ok((core, size)),
            _ => {
                let p = self.resolve_placement(t, v)?;
                Ok((p.first_core as u64, p.size as u64))
            }
        }
    }

    fn print(&mut self, t: ThreadId, text: String) {
        let ctx = self.frame(t).ctx;
        let core = self.threads[t].core;
        self.output.push_str(&text);
        self.emit("print", core, ctx.family, Some(ctx.index), text);
    }

    fn exec(&mut self, t: ThreadId) -> Result<(), Fault> {
        let prog = self.prog;
        let (func, pc) = {
            let f = self.frame(t);
            (f.func, f.pc)
        };
        let op = &prog.functions[func].ops[pc];
        match op {
            IrOp::Allocate {
                ctx,
                placement,
                kind,
                mode,
            } => {
                let mut p = self.resolve_placement(t, self.val(t, *placement))?;
                let core = self.threads[t].core;
                if *kind == ContextKind::Exclusive {
                    p.size = 1;
                }
                let first = p.first_core as usize;
                let forced = if self.cfg.serialize_all {
                    Some("serialize-all")
                } else if *mode == FailureMode::ForceSeq {
                    Some("force-seq")
                } else {
                    None
                };
                let id = if let Some(why) = forced {
                    Some(self.new_family(Kind::Serialized, p, core, *mode, Some(why.into())))
                } else if *kind == ContextKind::Exclusive {
                    let c = &self.cores[first];
                    if c.exclusive.is_none() && c.exclusive_waiters.is_empty() {
                        Some(self.new_family(Kind::Exclusive, p, core, *mode, None))
                    } else {
                        self.cores[first].exclusive_waiters.push_back(t);
                        self.block(
                            t,
                            Wait::Alloc {
                                placement: p,
                                exclusive: true,
                            },
                        );
                        None
                    }
                } else if self.cores[first].waiters.is_empty() && self.regular_fits(p) {
                    Some(self.new_family(Kind::Regular, p, core, *mode, None))
                } else if *mode == FailureMode::Wait {
                    self.cores[first].waiters.push_back(t);
                    self.block(
                        t,
                        Wait::Alloc {
                            placement: p,
                            exclusive: false,
                        },
                    );
                    None
                } else {
                    let why = format!("no free context at ({},{})", p.first_core, p.size);
                    Some(self.new_family(Kind::Serialized, p, core, *mode, Some(why)))
                };
                if let Some(id) = id {
                    self.set(t, *ctx, Value::Family(id));
                    self.advance(t);
                }
            }
            IrOp::Configure {
                ctx,
                start,
                limit,
                step,
                window,
                signature,
            } => {
                let fid = self.family_of(t, *ctx)?;
                let s = self.int(t, *start, "start index")?;
                let l = self.int(t, *limit, "limit index")?;
                let st = self.int(t, *step, "step")?;
                let w = self.int(t, *window, "window size")?;
                if st <= 0 {
                    return Err(fault("E_BAD_STEP", format!("step must be positive, got {}", st)));
                }
                if w < 0 {
                    return Err(fault("E_BAD_WINDOW", format!("window size must be non-negative, got {}", w)));
                }
                let n = placement::thread_count(s, l, st);
                let fam = &mut self.families[fid];
                if fam.phase != Phase::Allocated {
                    return Err(fault("E_INTERNAL", "context configured twice"));
                }
                fam.range = (s, l, st);
                fam.window = w as u64;
                fam.n = n;
                fam.channels = signature
                    .0
                    .iter()
                    .map(|&(d, c)| Channel::new(d, c, n))
                    .collect();
                fam.phase = Phase::Configured;
                let core = fam.placement.first_core;
                let detail = format!("range=({},{},{}) ws={} threads={} sig={}", s, l, st, w, n, signature);
                self.emit("configure", core, fid, None, detail);
                self.advance(t);
            }
            IrOp::Create { ctx, func } => {
                let fid = self.family_of(t, *ctx)?;
                self.create(fid, *func)?;
                self.advance(t);
            }
            IrOp::Sync { ctx } => {
                let fid = self.family_of(t, *ctx)?;
                let fam = &self.families[fid];
                if fam.phase >= Phase::Done {
                    let core = fam.placement.first_core;
                    self.emit("sync", core, fid, None, String::new());
                    self.advance(t);
                } else if fam.kind == Kind::Serialized && !fam.serial_started {
                    self.start_serial(t, fid);
                } else {
                    self.block(t, Wait::Sync(fid));
                }
            }
            IrOp::Release { ctx, deferred } => {
                let fid = self.family_of(t, *ctx)?;
                let fam = &self.families[fid];
                if !deferred || fam.phase >= Phase::Done {
                    self.release(fid, false);
                    self.advance(t);
                } else if fam.kind == Kind::Serialized {
                    if !fam.serial_started {
                        self.start_serial(t, fid);
                    }
                } else {
                    self.families[fid].detached = true;
                    self.advance(t);
                }
            }
            IrOp::Put { ctx, chan, src } => {
                let fid = self.family_of(t, *ctx)?;
                let v = self.val(t, *src);
                self.families[fid].channels[*chan as usize].put(*chan, v)?;
                let core = self.families[fid].placement.first_core;
                let detail = format!("chan={} value={}", chan, self.val(t, *src));
                self.emit("put", core, fid, None, detail);
                self.advance(t);
            }
            IrOp::Get { dst, ctx, chan } => {
                let fid = self.family_of(t, *ctx)?;
                if self.families[fid].phase < Phase::Done {
                    return Err(fault("E_INTERNAL", "GET before the family terminated"));
                }
                let v = self.families[fid].channels[*chan as usize]
                    .get()
                    .ok_or_else(|| fault("E_INTERNAL", "GET of an empty channel"))?;
                self.set(t, *dst, v);
                let core = self.families[fid].placement.first_core;
                self.emit("get", core, fid, None, format!("chan={} value={}", chan, v));
                self.advance(t);
            }
            IrOp::Read { dst, chan } => {
                let ctx = self.frame(t).ctx;
                match self.families[ctx.family].channels[*chan as usize].read(ctx.ordinal) {
                    Some(v) => {
                        self.set(t, *dst, v);
                        let core = self.threads[t].core;
                        self.emit("read", core, ctx.family, Some(ctx.index), format!("chan={} value={}", chan, v));
                        self.advance(t);
                    }
                    None if self.families[ctx.family].kind == Kind::Serialized => {
                        return Err(fault(
                            "E_SERIAL_BLOCK",
                            format!(
                                "thread {} of serialized family {} would block reading channel {}",
                                ctx.index, ctx.family, chan
                            ),
                        ));
                    }
                    None => self.block(
                        t,
                        Wait::Read {
                            family: ctx.family,
                            chan: *chan,
                            ordinal: ctx.ordinal,
                        },
                    ),
                }
            }
            IrOp::Write { chan, src } => {
                let ctx = self.frame(t).ctx;
                let v = self.val(t, *src);
                self.families[ctx.family].channels[*chan as usize].write(*chan, ctx.ordinal, v)?;
                let core = self.threads[t].core;
                self.emit("write", core, ctx.family, Some(ctx.index), format!("chan={} value={}", chan, v));
                self.advance(t);
            }
            IrOp::Index { dst } => {
                let i = self.frame(t).ctx.index;
                self.set(t, *dst, Value::Int(i));
                self.advance(t);
            }
            IrOp::Move { dst, src, coerce } => {
                let v = self.val(t, *src).coerce(*coerce);
                self.set(t, *dst, v);
                self.advance(t);
            }
            IrOp::Unary { dst, op, a } => {
                let a = self.val(t, *a);
                let v = match (op, a) {
                    (UnaryOp::Not, v) => Value::Int(!v.truthy() as i64),
                    (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnaryOp::Neg, v) => Value::Int(
                        v.as_int()
                            .ok_or_else(|| fault("E_TYPE", "negating a non-number"))?
                            .wrapping_neg(),
                    ),
                };
                self.set(t, *dst, v);
                self.advance(t);
            }
            IrOp::Binary { dst, op, a, b } => {
                let v = binary(*op, self.val(t, *a), self.val(t, *b))?;
                self.set(t, *dst, v);
                self.advance(t);
            }
            IrOp::NewArray { dst, float, len } => {
                let zero = if *float { Value::Float(0.0) } else { Value::Int(0) };
                self.arrays.push(Array {
                    float: *float,
                    data: vec![zero; *len as usize],
                });
                let id = self.arrays.len() - 1;
                self.set(t, *dst, Value::Handle(id));
                self.advance(t);
            }
            IrOp::Load { dst, base, index } => {
                let (a, i) = self.element(self.val(t, *base), self.val(t, *index))?;
                let v = self.arrays[a].data[i];
                self.set(t, *dst, v);
                self.advance(t);
            }
            IrOp::Store { base, index, src } => {
                let (a, i) = self.element(self.val(t, *base), self.val(t, *index))?;
                let to = if self.arrays[a].float { Coerce::Float } else { Coerce::Int };
                let v = self.val(t, *src).coerce(Some(to));
                if v.as_int().is_none() {
                    return Err(fault("E_TYPE", "array elements hold scalars"));
                }
                self.arrays[a].data[i] = v;
                self.advance(t);
            }
            IrOp::Jump { target } => self.frame_mut(t).pc = *target,
            IrOp::Branch { cond, if_false } => {
                if self.val(t, *cond).truthy() {
                    self.advance(t);
                } else {
                    self.frame_mut(t).pc = *if_false;
                }
            }
            IrOp::Call { dst, func, args } => {
                if self.threads[t].stack.len() >= MAX_FRAMES {
                    return Err(fault("E_STACK_OVERFLOW", "call depth limit exceeded"));
                }
                let callee = &prog.functions[*func];
                let FunctionKind::Plain { params, .. } = &callee.kind else {
                    return Err(fault("E_INTERNAL", "call of a thread function"));
                };
                let mut slots = vec![Value::Int(0); callee.slot_count()];
                for (i, a) in args.iter().enumerate() {
                    slots[i] = self.val(t, *a).coerce(params[i]);
                }
                let ctx = self.frame(t).ctx;
                self.threads[t].stack.push(Frame {
                    func: *func,
                    pc: 0,
                    slots,
                    ret: *dst,
                    ctx,
                    member: false,
                });
            }
            IrOp::Return { value } => {
                let v = value.map(|o| self.val(t, o));
                let frame = self.threads[t].stack.pop().unwrap();
                if frame.member {
                    self.member_end(t, frame.ctx)?;
                } else {
                    if let Some(d) = frame.ret {
                        self.set(t, d, v.unwrap_or(Value::Int(0)));
                    }
                    self.advance(t);
                }
            }
            IrOp::PrintInt { src } => {
                let v = self.int(t, *src, "print_int argument")?;
                self.print(t, v.to_string());
                self.advance(t);
            }
            IrOp::PrintFloat { src } => {
                let v = self
                    .val(t, *src)
                    .as_float()
                    .ok_or_else(|| fault("E_TYPE", "print_float needs a number"))?;
                self.print(t, format!("{:.6}", v));
                self.advance(t);
            }
            IrOp::PrintStr { id } => {
                self.print(t, prog.strings[*id].clone());
                self.advance(t);
            }
            IrOp::PlaceDefault { dst } => {
                let fam = self.frame(t).ctx.family;
                let v = Value::Place(self.families[fam].placement.encode());
                self.set(t, *dst, v);
                self.advance(t);
            }
            IrOp::PlaceSize { dst, addr } => {
                let (_, size) = self.address_parts(t, self.val(t, *addr))?;
                self.set(t, *dst, Value::Int(size as i64));
                self.advance(t);
            }
            IrOp::PlaceFirst { dst, addr } => {
                let (core, _) = self.address_parts(t, self.val(t, *addr))?;
                self.set(t, *dst, Value::Int(core as i64));
                self.advance(t);
            }
            IrOp::PlaceLocal { dst } => {
                let core = self.threads[t].core;
                self.set(t, *dst, Value::Int(core as i64));
                self.advance(t);
            }
            IrOp::PlaceMake { dst, core, size } => {
                let c = self.int(t, *core, "placement location")?;
                let s = self.int(t, *size, "placement size")?;
                if c < 0 || s < 1 || s as u64 >= placement::SIZE_RADIX {
                    return Err(fault(
                        "E_BAD_PLACEMENT",
                        format!("sl_placement({}, {}) is not a valid address", c, s),
                    ));
                }
                self.set(t, *dst, Value::Place(placement::encode(c as u64, s as u64)));
                self.advance(t);
            }
        }
        Ok(())
    }

    fn create(&mut self, fid: FamilyId, func: usize) -> Result<(), Fault> {
        let sig = self.prog.functions[func].signature().cloned().unwrap_or_default();
        let fam = &mut self.families[fid];
        if fam.phase != Phase::Configured {
            return Err(fault("E_INTERNAL", "CREATE on an unconfigured context"));
        }
        fam.func = func;
        fam.phase = Phase::Running;
        let n = fam.n;
        let (s, _, st) = fam.range;
        let p = fam.placement;
        let mut dist = Vec::new();
        match fam.kind {
            Kind::Serialized => {
                if n > 0 {
                    dist.push((fam.creator_core, s, s + n as i64 * st));
                }
            }
            Kind::Exclusive => {
                fam.shares.push(Share {
                    core: p.first_core,
                    next: 0,
                    end: n,
                    active: 0,
                    held: 1,
                    dedicated: true,
                });
                if n > 0 {
                    dist.push((p.first_core, s, s + n as i64 * st));
                }
            }
            Kind::Regular => {
                let ranges = placement::distribute(n, p.size, sig.has_shared());
                for (k, r) in ranges.into_iter().enumerate() {
                    let core = p.first_core + k as u32;
                    let empty = r.is_empty();
                    if !empty {
                        dist.push((core, s + r.start as i64 * st, s + r.end as i64 * st));
                    }
                    fam.shares.push(Share {
                        core,
                        next: r.start,
                        end: r.end,
                        active: 0,
                        held: u64::from(!empty),
                        dedicated: false,
                    });
                }
                for sh in &fam.shares {
                    if sh.held == 0 {
                        self.cores[sh.core as usize].free_slots += 1;
                    }
                }
            }
            Kind::Boot => unreachable!("boot family is never created"),
        }
        let fam = &self.families[fid];
        let kind = fam.kind;
        let window = fam.window;
        let range = fam.range;
        let name = self.prog.functions[func].name.clone();
        let dist_text: Vec<String> = dist
            .iter()
            .map(|(c, a, b)| format!("{}:[{},{})", c, a, b))
            .collect();
        let detail = format!("fn={} threads={} dist={}", name, n, dist_text.join(" "));
        self.emit("create", p.first_core, fid, None, detail);
        self.reports.push(FamilyReport {
            id: fid,
            function: name,
            serialized: kind == Kind::Serialized,
            placement: p,
            range,
            window,
            distribution: dist,
        });
        if n == 0 {
            if kind == Kind::Exclusive {
                self.families[fid].shares.clear();
            }
            self.mark_done(fid);
        } else if kind != Kind::Serialized {
            self.spawning.push(fid);
            self.spawning.sort_unstable();
        }
        Ok(())
    }
}

fn binary(op: BinaryOp, a: Value, b: Value) -> Result<Value, Fault> {
    use BinaryOp::*;
    if matches!(a, Value::Handle(_) | Value::Family(_)) || matches!(b, Value::Handle(_) | Value::Family(_)) {
        return Err(fault("E_TYPE", format!("operator {} applied to {} and {}", op.text(), a, b)));
    }
    let float = matches!(a, Value::Float(_)) || matches!(b, Value::Float(_));
    if float {
        let (x, y) = (a.as_float().unwrap(), b.as_float().unwrap());
        let bool_ = |c: bool| Value::Int(c as i64);
        return Ok(match op {
            Add => Value::Float(x + y),
            Sub => Value::Float(x - y),
            Mul => Value::Float(x * y),
            Div => Value::Float(x / y),
            Rem => return Err(fault("E_TYPE", "% needs integer operands")),
            Lt => bool_(x < y),
            Le => bool_(x <= y),
            Gt => bool_(x > y),
            Ge => bool_(x >= y),
            Eq => bool_(x == y),
            Ne => bool_(x != y),
            And => bool_(x != 0.0 && y != 0.0),
            Or => bool_(x != 0.0 || y != 0.0),
        });
    }
    let (x, y) = (a.as_int().unwrap(), b.as_int().unwrap());
    let bool_ = |c: bool| Value::Int(c as i64);
    Ok(match op {
        Add => Value::Int(x.wrapping_add(y)),
        Sub => Value::Int(x.wrapping_sub(y)),
        Mul => Value::Int(x.wrapping_mul(y)),
        Div | Rem if y == 0 => return Err(fault("E_DIV_ZERO", "division by zero")),
        Div => Value::Int(x.wrapping_div(y)),
        Rem => Value::Int(x.wrapping_rem(y)),
        Lt => bool_(x < y),
        Le => bool_(x <= y),
        Gt => bool_(x > y),
        Ge => bool_(x >= y),
        Eq => bool_(x == y),
        Ne => bool_(x != y),
        And => bool_(x != 0 && y != 0),
        Or => bool_(x != 0 || y != 0),
    })
}

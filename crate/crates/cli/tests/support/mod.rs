//! Random SL-mini programs whose output does not depend on the schedule,
//! and invariant checks over run traces.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slc_core::machine::FamilyReport;
use slc_core::{RunResult, TraceEvent};

/// Specifiers that may block. Exclusive is used on at most one level, so no
/// exclusive family waits on its own core's context. Forcewait only appears
/// on main's create: deeper, ancestors may hold every family entry.
#[derive(Clone, Copy, PartialEq)]
enum Blocking {
    Exclusive,
    ForceWait,
}

struct Gen {
    rng: ChaCha8Rng,
    depth: usize,
    blocking_level: Option<(usize, Blocking)>,
    out: String,
}

pub fn generate(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(0..3usize);
    let blocking_level = match rng.random_range(0..4) {
        0 => Some((rng.random_range(0..=depth), Blocking::Exclusive)),
        1 => Some((0, Blocking::ForceWait)),
        _ => None,
    };
    let mut g = Gen {
        rng,
        depth,
        blocking_level,
        out: String::new(),
    };
    let shared: Vec<bool> = (0..=depth).map(|_| g.rng.random_bool(0.6)).collect();
    for level in (0..=depth).rev() {
        g.thread_function(level, &shared);
    }
    g.main(shared[0]);
    g.out
}

impl Gen {
    fn pick<'a>(&mut self, options: &[&'a str]) -> &'a str {
        options[self.rng.random_range(0..options.len())]
    }

    fn expr(&mut self, vars: &[&str], depth: u32) -> String {
        if depth == 0 || self.rng.random_bool(0.3) {
            return if self.rng.random_bool(0.5) {
                vars[self.rng.random_range(0..vars.len())].to_string()
            } else {
                self.rng.random_range(0..10).to_string()
            };
        }
        let a = self.expr(vars, depth - 1);
        let b = self.expr(vars, depth - 1);
        match self.rng.random_range(0..6) {
            0 => format!("({} + {})", a, b),
            1 => format!("({} - {})", a, b),
            2 => format!("({} * {})", a, b),
            3 => format!("({} / {})", a, self.rng.random_range(1..5)),
            4 => format!("({} % {})", a, self.rng.random_range(2..9)),
            _ => format!("({} < {})", a, b),
        }
    }

    /// The create fields of one construct: placement, range, window, specifier.
    fn create_fields(&mut self, level: usize, len: i64) -> String {
        let place = self
            .pick(&[
                "",
                "",
                "0",
                "1",
                "sl_default_placement()",
                "sl_placement(0, 2)",
                "sl_placement(sl_local_processor_address(), 1)",
            ])
            .to_string();
        let start = self.rng.random_range(0..=2.min(len));
        let limit = self.rng.random_range(start..=len);
        let step = self.rng.random_range(1..=3);
        let start_s = if start == 0 && self.rng.random_bool(0.5) { String::new() } else { start.to_string() };
        let step_s = if step == 1 && self.rng.random_bool(0.5) { String::new() } else { step.to_string() };
        let ws = self.pick(&["", "0", "1", "2", "2"]).to_string();
        let spec = match self.blocking_level {
            Some((l, Blocking::Exclusive)) if l == level => "sl__exclusive",
            Some((l, Blocking::ForceWait)) if l == level => "sl__forcewait",
            _ => self.pick(&["", "", "", "sl__forceseq"]),
        };
        format!("{}, {}, {}, {}, {}, {}", place, start_s, limit, step_s, ws, spec)
    }

    fn array(len: i64) -> String {
        vec!["0"; len as usize].join(", ")
    }

    fn create(&mut self, indent: &str, level: usize, shared: &[bool], arr: &str, len: i64, c: &str) {
        let fields = self.create_fields(level, len);
        let mut args = format!("sl_glarg(int*, , {})", arr);
        if shared[level] {
            let init = self.rng.random_range(0..5);
            write!(args, ", sl_sharg(int, r{}, {})", level, init).unwrap();
        }
        write!(args, ", sl_glarg(int, , {})", c).unwrap();
        writeln!(self.out, "{}sl_create(, {}, w{}, {});", indent, fields, level, args).unwrap();
        writeln!(self.out, "{}sl_sync();", indent).unwrap();
    }

    fn thread_function(&mut self, level: usize, shared: &[bool]) {
        let mut params = "sl_glparm(int*, a)".to_string();
        if shared[level] {
            params.push_str(", sl_shparm(int, s)");
        }
        params.push_str(", sl_glparm(int, c)");
        writeln!(self.out, "sl_def(w{}, , {}) {{", level, params).unwrap();
        writeln!(self.out, "    sl_index(i);").unwrap();
        writeln!(self.out, "    int *arr = sl_getp(a);").unwrap();
        writeln!(self.out, "    int c = sl_getp(c);").unwrap();
        let e = self.expr(&["i", "c"], 3);
        writeln!(self.out, "    int v = {};", e).unwrap();
        if self.rng.random_bool(0.4) {
            let k = self.rng.random_range(1..9);
            writeln!(self.out, "    if (v % 2 == 0) {{ v = v + {}; }} else {{ v = v - i; }}", k).unwrap();
        }
        if self.rng.random_bool(0.4) {
            let m = self.rng.random_range(1..5);
            writeln!(self.out, "    int k;").unwrap();
            writeln!(self.out, "    for (k = 0; k < {}; k++) {{ v = v + k * i; }}", m).unwrap();
        }
        if level < self.depth {
            let len = self.rng.random_range(1..=5);
            writeln!(self.out, "    int t[{}] = {{ {} }};", len, Self::array(len)).unwrap();
            self.create("    ", level + 1, shared, "t", len, "v");
            if shared[level + 1] {
                writeln!(self.out, "    v = v + sl_geta(r{});", level + 1).unwrap();
            }
            writeln!(self.out, "    int q;").unwrap();
            writeln!(self.out, "    for (q = 0; q < {}; q++) {{ v = v + t[q]; }}", len).unwrap();
        }
        writeln!(self.out, "    v = v % 1000;").unwrap();
        writeln!(self.out, "    arr[i] = v;").unwrap();
        if shared[level] {
            writeln!(self.out, "    sl_setp(s, (sl_getp(s) * 3 + v) % 100003);").unwrap();
        }
        writeln!(self.out, "}} sl_enddef\n").unwrap();
    }

    fn main(&mut self, shared: bool) {
        let len = self.rng.random_range(1..=8);
        let c = self.rng.random_range(0..20);
        writeln!(self.out, "int main(void) {{").unwrap();
        writeln!(self.out, "    int a[{}] = {{ {} }};", len, Self::array(len)).unwrap();
        writeln!(self.out, "    int c = {};", c).unwrap();
        self.create("    ", 0, &[shared], "a", len, "c");
        if shared {
            writeln!(self.out, "    print_int(sl_geta(r0));").unwrap();
            writeln!(self.out, "    print_str(\"\\n\");").unwrap();
        }
        writeln!(self.out, "    int k;").unwrap();
        writeln!(self.out, "    for (k = 0; k < {}; k++) {{ print_int(a[k]); print_str(\" \"); }}", len).unwrap();
        writeln!(self.out, "    print_str(\"\\n\");").unwrap();
        writeln!(self.out, "    return 0;").unwrap();
        writeln!(self.out, "}}").unwrap();
    }
}

fn field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Every ALLOCATE that produced a context is released exactly once.
pub fn check_conservation(trace: &[TraceEvent]) -> Result<(), String> {
    let allocated: BTreeSet<usize> = trace
        .iter()
        .filter(|e| e.event == "allocate" && field(&e.detail, "outcome") == Some("context"))
        .map(|e| e.family)
        .collect();
    let mut released = BTreeMap::new();
    for e in trace.iter().filter(|e| e.event == "release" && e.detail.starts_with("context")) {
        *released.entry(e.family).or_insert(0) += 1;
    }
    if let Some((f, n)) = released.iter().find(|(_, &n)| n != 1) {
        return Err(format!("family {} released {} times", f, n));
    }
    let released: BTreeSet<usize> = released.into_keys().collect();
    if allocated != released {
        return Err(format!("allocated {:?} but released {:?}", allocated, released));
    }
    Ok(())
}

/// Per family and core, live threads never exceed a positive window.
pub fn check_window(trace: &[TraceEvent], families: &[FamilyReport]) -> Result<(), String> {
    let windows: BTreeMap<usize, u64> = families
        .iter()
        .filter(|f| f.window > 0 && !f.serialized)
        .map(|f| (f.id, f.window))
        .collect();
    let mut live: BTreeMap<(usize, u32), u64> = BTreeMap::new();
    for e in trace {
        let Some(&w) = windows.get(&e.family) else { continue };
        let n = live.entry((e.family, e.core)).or_insert(0);
        match e.event.as_str() {
            "thread-start" => {
                *n += 1;
                if *n > w {
                    return Err(format!(
                        "family {} has {} live threads on core {} with window {} at step {}",
                        e.family, n, e.core, w, e.step
                    ));
                }
            }
            "thread-end" => *n -= 1,
            _ => {}
        }
    }
    Ok(())
}

/// No channel cell is filled twice.
pub fn check_single_assignment(trace: &[TraceEvent]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for e in trace.iter().filter(|e| e.event == "write" || e.event == "put") {
        let chan = field(&e.detail, "chan").unwrap_or("?");
        if !seen.insert((e.event.clone(), e.family, e.thread, chan.to_string())) {
            return Err(format!("cell filled twice: {}", e));
        }
    }
    Ok(())
}

/// Each family ran every logical index of its range exactly once.
pub fn check_index_coverage(trace: &[TraceEvent], families: &[FamilyReport]) -> Result<(), String> {
    let mut started: BTreeMap<usize, Vec<i64>> = BTreeMap::new();
    for e in trace.iter().filter(|e| e.event == "thread-start") {
        started.entry(e.family).or_default().push(e.thread.unwrap_or(i64::MIN));
    }
    for f in families {
        let (start, limit, step) = f.range;
        let expected: Vec<i64> = (0..).map(|k| start + k * step).take_while(|&i| i < limit).collect();
        let mut got = started.remove(&f.id).unwrap_or_default();
        got.sort();
        if got != expected {
            return Err(format!("family {} ran {:?}, expected {:?}", f.id, got, expected));
        }
    }
    Ok(())
}

/// Channel directions of each configured family, from its `sig=[..]`.
fn signatures(trace: &[TraceEvent]) -> BTreeMap<usize, Vec<bool>> {
    trace
        .iter()
        .filter(|e| e.event == "configure")
        .filter_map(|e| {
            let sig = e.detail.split_once("sig=[")?.1.strip_suffix(']')?;
            let shared = sig.split(", ").filter(|c| !c.is_empty()).map(|c| c.starts_with("shared")).collect();
            Some((e.family, shared))
        })
        .collect()
}

/// Reads of one channel are stable within a thread, global reads agree
/// across a family, and a shared read of thread k follows the write of
/// thread k - step (or the source PUT for the first thread).
pub fn check_channel_reads(trace: &[TraceEvent], families: &[FamilyReport]) -> Result<(), String> {
    let sigs = signatures(trace);
    let steps: BTreeMap<usize, (i64, i64)> = families.iter().map(|f| (f.id, (f.range.0, f.range.2))).collect();
    let mut per_thread: BTreeMap<(usize, i64, usize), &str> = BTreeMap::new();
    let mut per_family: BTreeMap<(usize, usize), &str> = BTreeMap::new();
    let mut filled: HashSet<(usize, Option<i64>, usize)> = HashSet::new();
    for e in trace {
        let (Some(chan), Some(value)) = (field(&e.detail, "chan"), field(&e.detail, "value")) else { continue };
        let chan: usize = chan.parse().map_err(|_| format!("bad channel in {}", e))?;
        match e.event.as_str() {
            "put" => {
                filled.insert((e.family, None, chan));
            }
            "write" => {
                filled.insert((e.family, e.thread, chan));
            }
            "read" => {
                let thread = e.thread.ok_or_else(|| format!("read without thread: {}", e))?;
                if *per_thread.entry((e.family, thread, chan)).or_insert(value) != value {
                    return Err(format!("unstable read: {}", e));
                }
                let shared = sigs.get(&e.family).and_then(|s| s.get(chan)).copied().unwrap_or(false);
                if !shared {
                    if *per_family.entry((e.family, chan)).or_insert(value) != value {
                        return Err(format!("global read disagrees: {}", e));
                    }
                    continue;
                }
                let (start, step) = steps.get(&e.family).copied().unwrap_or((0, 1));
                let upstream = if thread == start { None } else { Some(thread - step) };
                if !filled.contains(&(e.family, upstream, chan)) {
                    return Err(format!("read before its upstream value was produced: {}", e));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn check_all(r: &RunResult) -> Result<(), String> {
    check_conservation(&r.trace)?;
    check_window(&r.trace, &r.families)?;
    check_single_assignment(&r.trace)?;
    check_index_coverage(&r.trace, &r.families)?;
    check_channel_reads(&r.trace, &r.families)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use slc_core::frontend::ast::erase_spans;
use slc_core::frontend::token::is_keyword;
use slc_core::frontend::{parse_source, print_ast, AstProgram};
use slc_core::{compile, run, MachineConfig, RunStatus};

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Every corpus program that parses, with its name.
fn parseable() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "sl") {
            let src = fs::read_to_string(&path).unwrap();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if parse_source(&src, &name).is_ok() {
                out.push((name, src));
            }
        }
    }
    out.sort();
    out
}

fn parse_bare(src: &str) -> AstProgram {
    let mut ast = parse_source(src, "t.sl").unwrap_or_else(|e| panic!("{e:?}\n{src}"));
    erase_spans(&mut ast);
    ast
}

#[test]
fn printer_round_trips_corpus() {
    let programs = parseable();
    assert!(programs.len() >= 15);
    for (name, src) in programs {
        let ast = parse_bare(&src);
        let printed = print_ast(&ast);
        assert_eq!(parse_bare(&printed), ast, "{name}\n{printed}");
    }
}

/// Apply `rename` to every identifier-shaped word that is not a keyword,
/// leaving numbers, string literals and punctuation alone.
fn rename_identifiers(src: &str, rename: &dyn Fn(&str) -> String) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                i += if chars[i] == '\\' { 2 } else { 1 };
            }
            i += 1;
            out.extend(&chars[start..i.min(chars.len())]);
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                out.push(chars[i]);
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push_str(&if is_keyword(&word) { word } else { rename(&word) });
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Renaming non-keywords never changes how SL constructs are recognized.
    #[test]
    fn renaming_identifiers_gives_isomorphic_tree(prefix in "[a-z]{1,4}", pick in 0usize..64) {
        let programs = parseable();
        let (_, src) = &programs[pick % programs.len()];
        let rename = |w: &str| format!("{}_{}", prefix, w);
        let renamed = rename_identifiers(src, &rename);
        let original = print_ast(&parse_bare(src));
        let expected = rename_identifiers(&original, &rename);
        prop_assert_eq!(print_ast(&parse_bare(&renamed)), expected);
    }
}

#[test]
fn diagnostics_point_at_the_offending_line() {
    let cases = [
        ("endpoint_misuse.sl", "E_SETA_OUTSIDE", "x"),
        ("endpoint_misuse.sl", "E_GETA_BEFORE_SYNC", "sl_geta"),
        ("sig_mismatch.sl", "E_SIG_MISMATCH", "sl_create"),
        ("unfed_global.sl", "E_UNFED_CHANNEL", "sl_create"),
    ];
    for (file, code, needle) in cases {
        let src = fs::read_to_string(corpus_dir().join(file)).unwrap();
        let diags = compile(&src, file).unwrap_err();
        let d = diags.iter().find(|d| d.code == code).unwrap_or_else(|| panic!("{file}: {diags:?}"));
        let line = src.lines().nth(d.span.line as usize - 1).unwrap();
        assert!(line.contains(needle), "{file}: {code} at {} -> {line:?}", d.span);
        assert!(d.span.column as usize <= line.len() + 1);
    }
}

#[test]
fn reduction_spreads_one_inner_family_per_core() {
    let src = fs::read_to_string(corpus_dir().join("innerprod_per_core.sl")).unwrap();
    let program = compile(&src, "l17").unwrap();
    let serial = run(&program, &MachineConfig { cores: 1, ..Default::default() });
    let r = run(&program, &MachineConfig { cores: 4, seed: 9, ..Default::default() });
    assert_eq!(r.status, RunStatus::Ok);
    assert_eq!(r.output, serial.output);
    let inner: Vec<_> = r.families.iter().filter(|f| f.function == "innerprod").collect();
    assert_eq!(inner.len(), 4);
    let mut cores: Vec<u32> = inner
        .iter()
        .map(|f| {
            assert_eq!(f.distribution.len(), 1);
            let (core, a, b) = f.distribution[0];
            assert_eq!(b - a, 4);
            core
        })
        .collect();
    cores.sort();
    assert_eq!(cores, vec![0, 1, 2, 3]);
}

const EXCLUSIVE_QUEUE: &str = r#"
sl_def(job, , sl_glparm(int, id)) { print_int(sl_getp(id)); } sl_enddef

int main(void) {
    int k;
    for (k = 0; k < 5; k++) {
        sl_create(, sl_placement(0, 1), , , , , sl__exclusive, job, sl_glarg(int, , k));
        sl_detach();
        sl_create(, sl_placement(1, 1), , , , , sl__exclusive, job, sl_glarg(int, , 5 + k));
        sl_detach();
    }
    return 0;
}
"#;

#[test]
fn exclusive_families_start_in_request_order_per_core() {
    let program = compile(EXCLUSIVE_QUEUE, "queue.sl").unwrap();
    for seed in 0..30 {
        let r = run(&program, &MachineConfig { cores: 2, seed, ..Default::default() });
        assert_eq!(r.status, RunStatus::Ok);
        let mut per_core: BTreeMap<bool, Vec<u32>> = BTreeMap::new();
        for id in r.output.chars().map(|c| c.to_digit(10).unwrap()) {
            per_core.entry(id >= 5).or_default().push(id);
        }
        assert_eq!(per_core[&false], vec![0, 1, 2, 3, 4], "seed {seed}");
        assert_eq!(per_core[&true], vec![5, 6, 7, 8, 9], "seed {seed}");
    }
}

#[test]
fn same_seed_same_trace() {
    let src = fs::read_to_string(corpus_dir().join("detach_progress.sl")).unwrap();
    let program = compile(&src, "l15").unwrap();
    let cfg = MachineConfig { seed: 1234, ..Default::default() };
    let a = run(&program, &cfg);
    let b = run(&program, &cfg);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.output, b.output);
}

#[test]
fn unwritten_shared_channel_is_an_error_unless_forwarded() {
    let src = r#"
sl_def(skip, , sl_shparm(int, s)) {
    sl_index(i);
    if (i == 1) { sl_setp(s, sl_getp(s) + 5); }
} sl_enddef

int main(void) {
    sl_create(, , 0, 3, 1, , , skip, sl_sharg(int, s, 1));
    sl_sync();
    print_int(sl_geta(s));
    return 0;
}
"#;
    let program = slc_core::check::compile_unchecked(src, "skip.sl").unwrap();
    let strict = run(&program, &MachineConfig::default());
    assert!(matches!(strict.status, RunStatus::RuntimeError { code: "E_UNWRITTEN_SHARED", .. }), "{:?}", strict.status);
    let lenient = run(&program, &MachineConfig { forward_unwritten: true, ..Default::default() });
    assert_eq!(lenient.status, RunStatus::Ok);
    assert_eq!(lenient.output, "6");
}

#[test]
fn non_positive_step_is_rejected_at_run_time() {
    let src = "sl_def(t) { } sl_enddef\nint main(void) { sl_create(, , 0, 4, 0, , , t); sl_sync(); return 0; }\n";
    let program = compile(src, "step.sl").unwrap();
    let r = run(&program, &MachineConfig::default());
    assert!(matches!(r.status, RunStatus::RuntimeError { code: "E_BAD_STEP", .. }), "{:?}", r.status);
}

#[test]
fn step_limit_stops_runaway_programs() {
    let src = "int main(void) { int k = 0; while (1) { k = k + 1; } return 0; }\n";
    let program = compile(src, "loop.sl").unwrap();
    let r = run(&program, &MachineConfig { max_steps: 500, ..Default::default() });
    assert_eq!(r.status, RunStatus::StepLimit);
    assert_eq!(r.status.exit_code(), 4);
}

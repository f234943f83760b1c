use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn slc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_accepts_valid_and_rejects_invalid() {
    let ok = slc(&["check", path(&corpus("innerprod.sl"))]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stderr(&ok).is_empty());
    let bad = slc(&["check", path(&corpus("endpoint_misuse.sl"))]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stderr(&bad).lines().count(), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let o = slc(&["run", "/nonexistent/prog.sl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn exit_codes_follow_run_status() {
    let cases = [
        ("innerprod.sl", 0),
        ("double_setp.sl", 2),
        ("forcewait_self.sl", 3),
        ("create_as_if_body.sl", 1),
    ];
    for (file, code) in cases {
        let o = slc(&["run", path(&corpus(file))]);
        assert_eq!(o.status.code(), Some(code), "{file}: {}", stderr(&o));
    }
    let o = slc(&["run", path(&corpus("innerprod.sl")), "--max-steps", "10"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bad_flag_values_are_rejected_before_running() {
    let o = slc(&["run", path(&corpus("hello.sl")), "--cores", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
    let o = slc(&["run", path(&corpus("hello.sl")), "--trace", "xml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn json_trace_is_one_object_per_line_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let file = corpus("detach_progress.sl");
    let mut outputs = Vec::new();
    for n in 0..2 {
        let trace = dir.path().join(format!("t{n}.jsonl"));
        let o = slc(&["run", path(&file), "--seed", "77", "--trace", "json", "--trace-out", path(&trace)]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push((o.stdout, fs::read(&trace).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].1.clone()).unwrap();
    let keys = ["step", "event", "core", "family", "thread", "detail"];
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.keys().collect::<Vec<_>>().len(), keys.len());
        for k in keys {
            assert!(obj.contains_key(k), "{line}");
        }
        assert!(obj["thread"].is_null() || obj["thread"].is_i64());
    }
}

#[test]
fn text_trace_goes_to_stderr_by_default() {
    let o = slc(&["run", path(&corpus("hello.sl")), "--trace", "text"]);
    assert_eq!(stdout(&o), "hello world\n");
    assert!(stderr(&o).contains("print hello world\\n"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.json");
    fs::write(&cfg, r#"{"cores": 16, "family-entries": 1, "seed": 5}"#).unwrap();
    let file = corpus("inherit_placement.sl");
    let o = slc(&["dist", path(&file), "--family", "bar", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 16);
    let o = slc(&["dist", path(&file), "--family", "bar", "--config", path(&cfg), "--cores", "2"]);
    assert_eq!(stdout(&o), "core 0: [0,50)\ncore 1: [50,100)\n");

    fs::write(&cfg, r#"{"cpus": 2}"#).unwrap();
    let o = slc(&["run", path(&file), "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cpus"));
}

#[test]
fn dist_selects_families_by_name_and_ordinal() {
    let file = corpus("innerprod_per_core.sl");
    let o = slc(&["dist", path(&file), "--family", "innerprod#2", "--cores", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = slc(&["dist", path(&file), "--family", "innerprod_r", "--cores", "4"]);
    assert_eq!(stdout(&o), "core 0: [0,4)\n");
    let o = slc(&["dist", path(&file), "--family", "nosuch"]);
    assert_eq!(o.status.code(), Some(1));
    let o = slc(&["dist", path(&file), "--family", "innerprod#9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dependent_family_stays_on_first_core() {
    let o = slc(&["dist", path(&corpus("innerprod.sl")), "--family", "innerprod", "--cores", "8"]);
    assert_eq!(stdout(&o), "core 0: [0,5)\n");
}

#[test]
fn empty_family_prints_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("empty.sl");
    fs::write(&file, "sl_def(t) { } sl_enddef\nint main(void) { sl_create(, , 3, 3, , , , t); sl_sync(); return 0; }\n").unwrap();
    let o = slc(&["dist", path(&file), "--family", "t"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn ir_dump_names_the_family_events() {
    let o = slc(&["ir", path(&corpus("detach_progress.sl"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for op in ["ALLOCATE", "CONFIGURE", "CREATE", "SYNC", "RELEASE %", "deferred", "PUT", "GET"] {
        assert!(text.contains(op), "missing {op}\n{text}");
    }
}

/// Corpus programs whose output does not depend on the schedule.
const DETERMINISTIC: &[&str] = &[
    "hello.sl",
    "hello_family.sl",
    "create_in_if_block.sl",
    "sscal.sl",
    "sscal_anonymous.sl",
    "innerprod.sl",
    "inherit_placement.sl",
    "innerprod_per_core.sl",
    "exclusive_progress.sl",
    "nested3.sl",
];

#[test]
fn serial_oracle_across_configurations() {
    for file in DETERMINISTIC {
        let f = corpus(file);
        let serial = slc(&["run", path(&f), "--serialize"]);
        assert_eq!(serial.status.code(), Some(0), "{file}");
        let minimal = slc(&["run", path(&f), "--cores", "1", "--family-entries", "1"]);
        assert_eq!(stdout(&minimal), stdout(&serial), "{file}");
        for k in 1..=20 {
            let o = slc(&["run", path(&f), "--cores", "8", "--seed", &k.to_string()]);
            assert_eq!(stdout(&o), stdout(&serial), "{file} seed {k}");
        }
    }
}

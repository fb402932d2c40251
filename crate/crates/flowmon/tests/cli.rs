use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn flowmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowmon"))
        .args(args)
        .output()
        .expect("spawn flowmon")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_temp(name: &str, contents: &str) -> String {
    let path: PathBuf = std::env::temp_dir().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_reports_values_and_labels() {
    let out = flowmon(&["run", &fixture("explicit_flow.mc")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("x 5 private"));
    assert!(stdout.contains("y 2 public"));
    assert!(stdout.contains("z 7 private"));
}

#[test]
fn run_flags_assertion_violation_with_exit_1() {
    let file = write_temp(
        "cli_assert_fail.mc",
        "int secret = 1 /*@ private */;\nint x = 0;\nint z = 0;\n\
         x = secret;\nz = x;\n//@ assert security_status(z) == public;\n",
    );
    let out = flowmon(&["run", &file]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("assert security_status(z) == public: violation (actual private)"));

    let file = write_temp(
        "cli_assert_ok.mc",
        "int secret = 1 /*@ private */;\nint z = 0;\nz = secret;\n\
         //@ assert security_status(z) == private;\n",
    );
    let out = flowmon(&["run", &file]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn parse_and_type_errors_exit_2() {
    let file = write_temp("cli_bad_syntax.mc", "int x = ;\n");
    assert_eq!(flowmon(&["run", &file]).status.code(), Some(2));
    let file = write_temp("cli_bad_type.mc", "int x = 0;\nx = &x;\n");
    assert_eq!(flowmon(&["run", &file]).status.code(), Some(2));
    assert_eq!(flowmon(&["run", "/nonexistent.mc"]).status.code(), Some(2));
}

#[test]
fn runtime_faults_exit_3() {
    let file = write_temp("cli_fault.mc", "int a[2] = { 0, 0 };\nint x = 0;\nx = a[5];\n");
    let out = flowmon(&["run", &file]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("out of bounds"));
}

#[test]
fn check_dumps_alias_sets_and_admissibility() {
    let out = flowmon(&["check", &fixture("pointer_flow.mc")]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("-> {x, y}"), "alias dump missing: {stdout}");
    assert!(stdout.contains("admissible: yes"));
}

#[test]
fn check_on_straight_line_code_yields_singletons() {
    let file = write_temp("cli_straight.mc", "int x = 0;\nint y = 0;\nx = 1;\ny = x;\n");
    let out = flowmon(&["check", &file]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("-> {x}"));
    assert!(stdout.contains("-> {y}"));
}

#[test]
fn transform_rejects_already_instrumented_input() {
    let out = flowmon(&["transform", &fixture("ptr_arith_transformed.mc")]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("_status"));
}

#[test]
fn transform_emits_compilable_c_shape() {
    let out = flowmon(&["transform", &fixture("ptr_arith.mc"), "--emit-c"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("int main(void)"));
    assert!(stdout.contains("report_violation"));
    assert!(stdout.ends_with("\n"));
}

#[test]
fn fuzz_count_zero_prints_empty_summary() {
    let out = flowmon(&["fuzz", "--count", "0"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "PASS=0 TIMEOUT=0 FAULT=0 VIOLATION=0");
}

#[test]
fn fuzz_is_deterministic_for_a_fixed_seed() {
    let a = flowmon(&["fuzz", "--seed", "9", "--count", "150", "--check", "soundness"]);
    let b = flowmon(&["fuzz", "--seed", "9", "--count", "150", "--check", "soundness"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn fuzz_with_broken_monitor_exits_4() {
    let dir = std::env::temp_dir().join("cli_fuzz_witness");
    std::fs::create_dir_all(&dir).unwrap();
    let out = flowmon(&[
        "fuzz",
        "--seed",
        "1",
        "--count",
        "2000",
        "--check",
        "soundness",
        "--mutate",
        "drop-pc",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.join("violation-soundness-1.mc").exists());
    assert!(dir.join("violation-soundness-1.store.txt").exists());
}

#[test]
fn emitted_c_compiles_and_enforces_the_policy() {
    // best-effort: skipped silently when no C compiler is around
    if Command::new("cc").arg("--version").output().is_err() {
        return;
    }
    let dir = std::env::temp_dir().join("cli_emit_c");
    std::fs::create_dir_all(&dir).unwrap();
    let src = write_temp(
        "cli_emit_c.mc",
        "int secret = 1 /*@ private */;\nint x = 0;\nx = secret;\n\
         //@ assert security_status(x) == public;\n",
    );
    let c_file = dir.join("prog.c");
    let bin = dir.join("prog");
    let out = flowmon(&["transform", &src, "--emit-c", "-o", c_file.to_str().unwrap()]);
    assert!(out.status.success());
    let cc = Command::new("cc")
        .args(["-o", bin.to_str().unwrap(), c_file.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("policy violation"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const NONCONN: &str = "exists x y. (const(y) /\\ forall z. (E(x,z) => inc(z ; x)) /\\ x != y)";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teamlogic")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn nonconn_on_generated_models() {
    let dir = TempDir::new().unwrap();
    let o = run(&["demo-unsafety", "--n", "1", "--teams", "10", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let a = dir.path().join("A1.model");
    let b = dir.path().join("B1.model");

    let o = run(&["eval", path(&a), "--epsilon", NONCONN]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "true"));
    let o = run(&["eval", path(&b), "--epsilon", NONCONN]);
    assert_eq!((code(&o), stdout(&o).trim()), (1, "false"));
}

#[test]
fn eval_on_team_file() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.model");
    let t = dir.path().join("t.team");
    fs::write(&m, "domain: a b\nrel E/2: (a,b)\n").unwrap();
    fs::write(&t, "vars: x\nrow: a\nrow: b\n").unwrap();
    assert_eq!(code(&run(&["eval", path(&m), path(&t), "const(x)"])), 1);
    assert_eq!(code(&run(&["eval", path(&m), path(&t), "nc(x)"])), 0);
    assert_eq!(code(&run(&["eval", path(&m), path(&t), "const(x"])), 2);
    assert_eq!(code(&run(&["eval", path(&m), path(&t), "F(x)"])), 2);
    assert_eq!(code(&run(&["eval", path(&m), "--epsilon", "E(x,x)"])), 2);

    let o = run(&["--machine", "eval", path(&m), "--empty", "all(x)"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("result=false"));
}

#[test]
fn missing_files_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("absent.model");
    assert_eq!(code(&run(&["eval", path(&m), "--epsilon", "top"])), 2);
}

#[test]
fn rewrite_passes() {
    let o = run(&["rewrite", "prenex", "(exists x. x=x) \\/ y=y"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "exists x. (x = x \\/ y = y)");

    let o = run(&["rewrite", "eliminate-all", "exists y. all(y)", "--verify"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(!out.lines().next().unwrap().contains("all("), "{out}");
    assert!(out.contains("equivalent up to bound"));

    assert_eq!(code(&run(&["rewrite", "normal-form", "all(x)"])), 2);
    assert_eq!(code(&run(&["rewrite", "prenex", "<> all(x)"])), 2);

    let o = run(&["--machine", "rewrite", "disj-to-hook", "all(x) \\/ E(x,x)", "--trace"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l.starts_with("step=1 rule=")));
}

#[test]
fn demo_rejects_zero() {
    assert_eq!(code(&run(&["demo-unsafety", "--n", "0"])), 2);
}

#[test]
fn props_reports_flags() {
    let o = run(&["props", "const", "--bound", "3"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("downward-closed      ✓"));
    assert!(out.contains("empty-team-property  ✓"));
    assert!(out.contains("upward-closed        ✗"));

    let o = run(&["--machine", "props", "all", "--bound", "3"]);
    assert!(stdout(&o).contains("flag=upward-closed status=confirmed"));

    assert_eq!(code(&run(&["props", "unknowndep"])), 2);
}

#[test]
fn user_dependencies_from_file() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().join("defs.deps");
    fs::write(&d, "dep same/2 := forall u v. (!R(u,v) \\/ u = v)\n").unwrap();
    let o = run(&["--deps", path(&d), "props", "same", "--bound", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("downward-closed      ✓"));
    let o = run(&["--deps", path(&d), "equiv", "same(x, y)", "forall u. (u = u => x = y)"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn equiv_verdicts_and_counterexample_files() {
    let o = run(&["equiv", "nc(x)", "forall w. (w != x => all(w))", "--sizes", "2,3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("equivalent up to bound"));

    let dir = TempDir::new().unwrap();
    let o = run(&["equiv", "const(x)", "nc(x)", "--sizes", "2", "--cex-out", path(dir.path())]);
    assert_eq!(code(&o), 1);
    let team = fs::read_to_string(dir.path().join("counterexample.team")).unwrap();
    assert_eq!(team, "vars: x\nrow: 0\nrow: 1\n");
    let model = dir.path().join("counterexample.model");
    let t = dir.path().join("counterexample.team");
    assert_eq!(code(&run(&["eval", path(&model), path(&t), "const(x)"])), 1);
    assert_eq!(code(&run(&["eval", path(&model), path(&t), "nc(x)"])), 0);

    assert_eq!(code(&run(&["equiv", "const(x)", "const(x)", "--sizes", "1,2"])), 2);
    let o = run(&["--machine", "equiv", "E(x,y)", "E(x,y) \\/ E(x,y)", "--samples", "20", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict=no-counterexample-found samples=20"));
}

#[test]
fn budget_exhaustion_exits_three() {
    let o = run(&["--max-team", "4", "equiv", "forall x y z. fdep(x, y ; z)", "forall x y z. fdep(x, y ; z)", "--sizes", "3"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["rewrite", "sideways", "top"])), 2);
}

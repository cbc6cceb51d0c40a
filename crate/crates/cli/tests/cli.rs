use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use limit_cycles::qbf::{brute_force_decide, QbfInstance, Quantifier};
use tempfile::TempDir;

fn lcycle(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcycle")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_instance(dir: &Path, name: &str, qs: Vec<Quantifier>, table: &[bool]) -> PathBuf {
    let inst = QbfInstance::from_truth_table(qs, table).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, inst.to_text()).unwrap();
    p
}

/// `exists x2 forall x1 (x1 or x2)` is true, `forall x2 exists x1 (x1 and x2)` false.
fn fixtures() -> (TempDir, PathBuf, PathBuf) {
    use Quantifier::*;
    let dir = tempfile::tempdir().unwrap();
    let t = write_instance(dir.path(), "ex_true.qbf", vec![Forall, Exists], &[false, true, true, true]);
    let f = write_instance(dir.path(), "ex_false.qbf", vec![Exists, Forall], &[false, false, false, true]);
    (dir, t, f)
}

#[test]
fn fixtures_have_the_expected_truth_values() {
    use Quantifier::*;
    let t = QbfInstance::from_truth_table(vec![Forall, Exists], &[false, true, true, true]).unwrap();
    let f = QbfInstance::from_truth_table(vec![Exists, Forall], &[false, false, false, true]).unwrap();
    assert!(brute_force_decide(&t).unwrap());
    assert!(!brute_force_decide(&f).unwrap());
}

#[test]
fn decide_true_with_check() {
    let (dir, t, _) = fixtures();
    let o = lcycle(&["decide", t.to_str().unwrap(), "--variant", "discrete", "--check"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("# lcycle "), "{s}");
    assert!(s.contains("--variant discrete --check"));
    assert!(s.contains("result TRUE"));
    assert!(s.contains("oracle TRUE agree"));
    assert!(s.contains("trace_length 16"));
}

#[test]
fn decide_false_exits_one() {
    let (dir, _, f) = fixtures();
    for variant in ["discrete", "continuous"] {
        let o = lcycle(&["decide", f.to_str().unwrap(), "--variant", variant], dir.path());
        assert_eq!(o.status.code(), Some(1), "{variant}");
        assert!(stdout(&o).contains("result FALSE"));
    }
}

#[test]
fn decide_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lcycle(&["decide", "missing.qbf"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.qbf"), "p qbf 2\nnonsense\n").unwrap();
    assert_eq!(lcycle(&["decide", "bad.qbf"], dir.path()).status.code(), Some(2));
    assert_eq!(lcycle(&["decide", "x.qbf", "--variant", "analog"], dir.path()).status.code(), Some(2));
}

#[test]
fn batch_mode_keeps_input_order() {
    let (dir, t, f) = fixtures();
    let mut child = Command::new(env!("CARGO_BIN_EXE_lcycle"))
        .args(["decide", "--batch", "--jobs", "3", "--check"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let input = format!("{}\n{}\n{}\n", t.display(), f.display(), t.display());
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].ends_with("TRUE") && lines[1].ends_with("FALSE") && lines[2].ends_with("TRUE"), "{lines:?}");
}

#[test]
fn find_cycle_on_the_circle() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcycle(&["find-cycle", "circle", "--eps", "0.01", "--L", "1", "--start", "1,0", "--out", "c.cert"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let period: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("# outcome eps-cycle period "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((period - 2.0 * std::f64::consts::PI).abs() < 1e-3);
    let v = lcycle(&["verify", "c.cert", "--system", "circle"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains("verdict accepted"));

    // a tampered certificate is rejected
    let text = std::fs::read_to_string(dir.path().join("c.cert")).unwrap();
    let bad: String = text
        .lines()
        .map(|l| if l.starts_with("x2 =") { "x2 = 1.05e0 0e0".to_string() } else { l.to_string() })
        .map(|l| l + "\n")
        .collect();
    std::fs::write(dir.path().join("bad.cert"), bad).unwrap();
    let v = lcycle(&["verify", "bad.cert", "--system", "circle"], dir.path());
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("verdict rejected"));
}

#[test]
fn find_cycle_at_the_hypercycle_fixpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcycle(
        &["find-cycle", "hypercycle:5:1,1,1,1,1", "--eps", "0.01", "--start", "0.2,0.2,0.2,0.2,0.2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("kind = fixpoint"));
    assert!(s.contains("speed = 0e0"));
}

#[test]
fn find_cycle_usage_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lcycle(&["find-cycle", "circle", "--eps", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(lcycle(&["find-cycle", "circle", "--L", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(lcycle(&["find-cycle", "circle", "--start", "0.5,0"], dir.path()).status.code(), Some(2));
    assert_eq!(lcycle(&["find-cycle", "nosuch"], dir.path()).status.code(), Some(2));
    let o = lcycle(&["find-cycle", "circle", "--budget", "1", "--dump", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,v1,v2\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn find_cycle_on_a_compiled_instance() {
    let (dir, t, _) = fixtures();
    let o = lcycle(&["find-cycle", t.to_str().unwrap(), "--eps", "0.9", "--out", "r.cert"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = lcycle(&["verify", "r.cert", "--system", t.to_str().unwrap()], dir.path());
    assert_eq!(v.status.code(), Some(0));
}

fn count(svg: &str, needle: &str) -> usize {
    svg.matches(needle).count()
}

fn segments(svg: &str) -> usize {
    let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    pts.split_whitespace().count() - 1
}

#[test]
fn render_discrete_trace_and_domain() {
    let (dir, t, _) = fixtures();
    let t = t.to_str().unwrap();
    let o = lcycle(&["trace", t, "--steps", "10", "--out", "t.trace"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = lcycle(&["render", "t.trace", "--instance", t, "--out", "t.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert!(svg.contains(r#"version="1.1""#) && svg.contains(r#"viewBox="0 0 1 1""#));
    assert_eq!(count(&svg, r#"<rect class="square""#), 24);
    assert_eq!(count(&svg, r#"<rect class="hole""#), 1);
    assert_eq!(segments(&svg), 10);
    assert!(count(&svg, "<line class=\"glyph\"") >= 24);

    let o = lcycle(&["render", "--instance", t, "--out", "d.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("d.svg")).unwrap();
    assert_eq!(count(&svg, "<polyline"), 0);
}

#[test]
fn render_continuous_csv() {
    let (dir, t, _) = fixtures();
    let t = t.to_str().unwrap();
    let o = lcycle(&["trace", "circle", "--start", "1.5,0", "--t-end", "1", "--h", "0.1", "--out", "c.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = std::fs::read_to_string(dir.path().join("c.csv")).unwrap().lines().count() - 1;
    let o = lcycle(&["render", "c.csv", "--out", "c.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("c.svg")).unwrap();
    assert_eq!(segments(&svg), rows - 1);

    let o = lcycle(&["trace", t, "--variant", "continuous", "--out", "r.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = lcycle(&["render", "r.csv", "--instance", t, "--out", "r.svg"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("r.svg")).unwrap();
    assert_eq!(count(&svg, "<path class=\"track\""), 4);
    assert_eq!(count(&svg, "<rect class=\"track\""), 12);
}

#[test]
fn render_errors() {
    let (dir, t, _) = fixtures();
    let o = lcycle(&["trace", t.to_str().unwrap(), "--steps", "3", "--out", "t.trace"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    // a grid trace cannot be drawn without its domain
    assert_eq!(lcycle(&["render", "t.trace", "--out", "x.svg"], dir.path()).status.code(), Some(2));
    assert_eq!(lcycle(&["render", "nothing.csv", "--out", "x.svg"], dir.path()).status.code(), Some(2));
    let o = lcycle(&["render", "--instance", t.to_str().unwrap(), "--out", "no/such/dir/x.svg"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn compile_outputs() {
    let (dir, t, _) = fixtures();
    let t = t.to_str().unwrap();
    let o = lcycle(&["compile-qbf", t, "--query", "S19,3,0", "--query", "S1,0,0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("squares 24"));
    assert!(s.contains("start S19 3 0"));
    assert!(s.lines().any(|l| l.starts_with("S19 3 0 ")));
    assert_eq!(lcycle(&["compile-qbf", t, "--query", "S99,0,0"], dir.path()).status.code(), Some(2));

    let o = lcycle(&["compile-qbf", t, "--variant", "continuous", "--out", "t.circ"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let circ = std::fs::read_to_string(dir.path().join("t.circ")).unwrap();
    let parsed = limit_cycles::field::parse_circuit(&circ).unwrap();
    assert_eq!(parsed.to_text(), circ);
    assert_eq!(parsed.d_in(), 2);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = lcycle(&["find-cycle", "annulus", "--seed", "4"], dir.path());
    let b = lcycle(&["find-cycle", "annulus", "--seed", "4"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

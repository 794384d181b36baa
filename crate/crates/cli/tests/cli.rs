use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn displab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_displab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SWEEP: &str = "experiment = \"sweep\"\n[grid]\nn = 32\n[sweep]\nsamples = 9\n";

#[test]
fn unknown_key_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "experiment = \"sweep\"\n[grid]\nn = 32\ncells = 4\n");
    let out = tmp.path().join("out");
    let o = displab(&["sweep", "--config", s(&cfg), "--out", s(&out)], tmp.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cells"), "{err}");
    assert!(!out.exists());
}

#[test]
fn mismatched_subcommand_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_SWEEP);
    let o = displab(&["corner", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_reports_monotone_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_SWEEP);
    let out = tmp.path().join("o");
    let o = displab(&["sweep", "--config", s(&cfg), "--out", s(&out)], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let verdicts = fs::read_to_string(out.join("verdict.txt")).unwrap();
    let line = verdicts.lines().find(|l| l.starts_with("monotone ")).unwrap();
    let cols: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(cols[1], "pass");
    assert!(cols[2].parse::<f64>().unwrap() > 0.0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("a_1,a_2,E0,residual,req_1,req_2,snapped\n"));
    assert_eq!(csv.lines().count(), 10);
    assert!(out.join("sweep.dat").exists());
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "experiment = \"torus\"\nseed = 11\n[grid]\nn = 32\n[torus]\nconfigs = 3\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(displab(&["torus", "--config", s(&cfg), "--out", s(&a), "--threads", "1"], tmp.path()).status.success());
    assert!(displab(&["torus", "--config", s(&cfg), "--out", s(&b), "--threads", "3"], tmp.path()).status.success());
    for f in ["torus.csv", "verdict.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    let o = displab(&["torus", "--config", s(&cfg), "--out", s(&c), "--seed", "12"], tmp.path());
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("torus.csv")).unwrap(), fs::read(c.join("torus.csv")).unwrap());
}

#[test]
fn effective_config_echo_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_SWEEP);
    let a = tmp.path().join("a");
    assert!(displab(&["sweep", "--config", s(&cfg), "--out", s(&a)], tmp.path()).status.success());
    let echo = fs::read_to_string(a.join("effective.toml")).unwrap();
    assert!(echo.contains("tol = ") && echo.contains("samples = 9") && echo.contains("seed = "));
    let b = tmp.path().join("b");
    let o = displab(&["sweep", "--config", s(&a.join("effective.toml")), "--out", s(&b)], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
}

#[test]
fn empty_manifest_is_an_empty_success() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write(tmp.path(), "m.toml", "configs = []\n");
    let out = tmp.path().join("o");
    let o = displab(&["suite", "--config", s(&m), "--out", s(&out)], tmp.path());
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), "name,experiment,status,worst_verdict,worst_margin\n");
}

#[test]
fn failing_member_marks_summary_and_exit() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "good.toml", "experiment = \"corner\"\n[grid]\nn = 32\n");
    write(tmp.path(), "bad.toml", "experiment = \"classify\"\n[grid]\nn = 32\n[classify]\nexpect = \"ii\"\n");
    let m = write(tmp.path(), "m.toml", "configs = [\"good.toml\", \"bad.toml\"]\n");
    let out = tmp.path().join("o");
    let o = displab(&["suite", "--config", s(&m), "--out", s(&out)], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("good,corner,pass,"), "{summary}");
    assert!(summary.contains("bad,classify,fail,alternative,"), "{summary}");
}

#[test]
fn manifest_with_unparsable_member_runs_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "good.toml", "experiment = \"corner\"\n[grid]\nn = 32\n");
    write(tmp.path(), "typo.toml", "experimnet = \"corner\"\n");
    let m = write(tmp.path(), "m.toml", "configs = [\"good.toml\", \"typo.toml\"]\n");
    let out = tmp.path().join("o");
    let o = displab(&["suite", "--config", s(&m), "--out", s(&out)], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn acceptance_manifest_passes() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("suite");
    let o = displab(&["suite", "--config", s(&manifest), "--out", s(&out)], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    println!("{stdout}");
    assert!(o.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 22);
    assert!(summary.lines().skip(1).all(|l| l.contains(",pass,")));
}

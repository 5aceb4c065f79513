use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn epr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate(dir: &Path, tag: &str, seed: &str) -> (String, String) {
    let x = dir.join(format!("{tag}_x.txt"));
    let p = dir.join(format!("{tag}_p.txt"));
    let (xs, ps) = (
        x.to_str().unwrap().to_owned(),
        p.to_str().unwrap().to_owned(),
    );
    let o = epr(&[
        "simulate",
        "--counts-x",
        "200000",
        "--counts-p",
        "5000",
        "--step-x",
        "0.1",
        "--seed",
        seed,
        "--out-x",
        &xs,
        "--out-p",
        &ps,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (xs, ps)
}

#[test]
fn simulate_then_analyze() {
    let dir = TempDir::new().unwrap();
    let (x, p) = simulate(dir.path(), "run", "3");
    let o = epr(&["--format", "csv", "analyze", &x, &p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut rows = text.lines();
    assert_eq!(
        rows.next().unwrap(),
        "kind,direction,party,value,bound,violated,uncertainty,significance_sigmas"
    );
    let entropic: Vec<&str> = rows
        .clone()
        .filter(|r| r.starts_with("entropic_epr,"))
        .collect();
    assert_eq!(entropic.len(), 2);
    for r in entropic {
        let fields: Vec<&str> = r.split(',').collect();
        let value: f64 = fields[3].parse().unwrap();
        assert!(value > 1.0 && value < 2.5, "{r}");
        let sigma: f64 = fields[6].parse().unwrap();
        assert!(sigma > 0.0);
    }
    assert!(rows.any(|r| r.starts_with("entropy,x_a_given_b,")));
}

#[test]
fn same_seed_same_files() {
    let dir = TempDir::new().unwrap();
    let (x1, p1) = simulate(dir.path(), "a", "11");
    let (x2, p2) = simulate(dir.path(), "b", "11");
    let (x3, _) = simulate(dir.path(), "c", "12");
    let read = |f: &str| std::fs::read(f).unwrap();
    assert_eq!(read(&x1), read(&x2));
    assert_eq!(read(&p1), read(&p2));
    assert_ne!(read(&x1), read(&x3));
}

#[test]
fn bootstrap_method_runs() {
    let dir = TempDir::new().unwrap();
    let (x, p) = simulate(dir.path(), "boot", "5");
    let args = [
        "analyze",
        &x,
        &p,
        "--method",
        "bootstrap",
        "--bootstrap-samples",
        "100",
        "--seed",
        "9",
    ];
    let a = epr(&args);
    let b = epr(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let few = epr(&[
        "analyze",
        &x,
        &p,
        "--method",
        "bootstrap",
        "--bootstrap-samples",
        "10",
    ]);
    assert_eq!(few.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.txt");
    let missing = missing.to_str().unwrap();
    assert_eq!(epr(&["analyze", missing, missing]).status.code(), Some(5));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "not a count table\n").unwrap();
    let bad = bad.to_str().unwrap();
    let o = epr(&["analyze", bad, bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let out = dir.path().join("o.txt");
    let out = out.to_str().unwrap();
    let zero = epr(&["simulate", "--counts", "0", "--out-x", out, "--out-p", out]);
    assert_eq!(zero.status.code(), Some(2));

    assert_eq!(epr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(epr(&["theory", "--state", "hg:x"]).status.code(), Some(2));
    let no_root = epr(&[
        "threshold",
        "--ratio-bracket",
        "1,2",
        "--grid-points",
        "256",
    ]);
    assert_eq!(no_root.status.code(), Some(4));
}

#[test]
fn swapped_tables_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (x, p) = simulate(dir.path(), "swap", "1");
    let o = epr(&["analyze", &p, &x]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected the x table"));
}

#[test]
fn scan_n_csv() {
    let o = epr(&[
        "--format",
        "csv",
        "scan-n",
        "--n-max",
        "3",
        "--grid-points",
        "256",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,variance_product,entropic_sum,variance_bound,entropic_bound,variance_violated,entropic_violated"
    );
    assert_eq!(lines.len(), 5);
    let n0: Vec<&str> = lines[1].split(',').collect();
    assert!((n0[1].parse::<f64>().unwrap() - 0.25).abs() < 1e-6);
    for row in &lines[2..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[5], f[6]), ("false", "true"), "{row}");
    }
}

#[test]
fn theory_human_output() {
    let o = epr(&["theory", "--state", "hg:0", "--grid-points", "256"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# "));
    assert!(text.contains("variance_epr"));
    assert!(text.contains("keyrate"));
    assert!(
        !text.contains("VIOLATED"),
        "vacuum sits on every bound:\n{text}"
    );
}

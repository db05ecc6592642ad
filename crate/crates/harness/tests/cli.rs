use std::path::Path;
use std::process::{Command, Output};

fn exactcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exactcomp")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_then_recover_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let gen = exactcomp(&[
        "generate", "--m", "50", "--n", "40", "--r", "2", "--p", "1.0", "--noise", "zero", "--seed", "3", "--out", p(dir.path()),
    ]);
    assert_eq!(code(&gen), 0, "{}", String::from_utf8_lossy(&gen.stderr));
    assert_eq!(stdout_json(&gen)["omega_size"], 2000);

    let rec = exactcomp(&[
        "recover",
        "--observed",
        p(&dir.path().join("observed.txt")),
        "--mask",
        p(&dir.path().join("mask.txt")),
        "--truth",
        p(&dir.path().join("truth.txt")),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&rec), 0, "{}", String::from_utf8_lossy(&rec.stderr));
    let v = stdout_json(&rec);
    assert_eq!(v["exact"], true);
    assert_eq!(v["s"], 2);
    assert!(dir.path().join("recovered.txt").exists());

    let csv = exactcomp(&[
        "--format",
        "csv",
        "recover",
        "--baseline",
        "--observed",
        p(&dir.path().join("observed.txt")),
        "--mask",
        p(&dir.path().join("mask.txt")),
        "--truth",
        p(&dir.path().join("truth.txt")),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&csv), 0, "{}", String::from_utf8_lossy(&csv.stderr));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("method,s,"), "{text}");
    assert!(text.contains("ar,2,"), "{text}");
}

#[test]
fn sweep_from_config_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "kind = \"recovery_sweep\"\nm = 24\nn = 20\nr = 2\ndensities = [0.8, 1.0]\ntrials = 2\nseed = 5\n",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = exactcomp(&["sweep", "--config", p(&cfg), "--out", p(&out_dir), "--threads", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["rows"], 4);
    assert_eq!(v["cells"][1]["success_rate"], 1.0);
    let rows = std::fs::read_to_string(out_dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "kind = \"recovery_sweep\"\nm = 24\nn = 20\nr = 2\nseed = 5\ndensities = [0.5, 0.2]\n").unwrap();
    let out = exactcomp(&["sweep", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("densities"));

    std::fs::write(&cfg, "kind = \"recovery_sweep\"\nm = 24\nn = 20\nr = 2\nseed = 5\ncolour = 1\n").unwrap();
    let out = exactcomp(&["sweep", "--config", p(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = exactcomp(&["series", "--config", p(&cfg)]);
    assert_eq!(code(&out), 1);

    assert_eq!(code(&exactcomp(&["sweep", "--format", "xml"])), 1);
    assert_eq!(code(&exactcomp(&["frobnicate"])), 1);
    assert_eq!(code(&exactcomp(&["generate", "--p", "1.5", "--out", p(dir.path())])), 1);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = exactcomp(&["recover", "--observed", p(&missing), "--mask", p(&missing), "--eps0", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));

    let out = exactcomp(&["sweep", "--config", p(&missing)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_cleanly() {
    let out = exactcomp(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["generate", "recover", "sweep", "bounds", "series", "verify-coeffs", "semi-iso"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

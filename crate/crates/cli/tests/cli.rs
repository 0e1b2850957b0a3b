use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyweb"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn polyweb");
    assert!(
        out.status.success(),
        "polyweb {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn crop_of_zero_activity_web_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("zero-activity.toml");
    run(&["sample-web", "--config", path(&cfg), "--out", path(dir.path())]);
    let web = dir.path().join("sample-0000.web.txt");
    let out = run(&["crop", path(&web), "--out", path(dir.path())]);
    let text = String::from_utf8(out.stdout).unwrap();
    let values: Vec<&str> = text.lines().map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(values, ["1", "1", "1"], "{text}");
}

#[test]
fn render_draws_one_segment_per_edge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("k1.toml");
    run(&[
        "sample-field",
        "--config",
        path(&cfg),
        "--replicas",
        "3",
        "--out",
        path(dir.path()),
    ]);
    for i in 0..3 {
        let field = dir.path().join(format!("sample-{i:04}.field.txt"));
        let edges = fs::read_to_string(&field)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with("edge "))
            .count();
        run(&["render", path(&field), "--out", path(dir.path())]);
        let svg = fs::read_to_string(dir.path().join(format!("sample-{i:04}.svg"))).unwrap();
        assert_eq!(svg.matches("<line ").count(), edges);
    }
}

#[test]
fn render_web() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("k2.toml");
    run(&["sample-web", "--config", path(&cfg), "--out", path(dir.path())]);
    run(&[
        "render",
        path(&dir.path().join("sample-0000.web.txt")),
        "--out",
        path(dir.path()),
    ]);
    let svg = fs::read_to_string(dir.path().join("sample-0000.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = configs().join("k2.toml");
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let d = tempfile::tempdir().unwrap();
        run(&[
            "estimate-crop",
            "--config",
            path(&cfg),
            "--replicas",
            "300",
            "--out",
            path(d.path()),
        ]);
        run(&[
            "sample-web",
            "--config",
            path(&cfg),
            "--replicas",
            "2",
            "--out",
            path(d.path()),
        ]);
        dirs.push(d);
    }
    for f in ["report.csv", "sample-0000.web.txt", "sample-0001.web.txt"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn duality_report_has_pass_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("k2.toml");
    run(&[
        "verify-duality",
        "--config",
        path(&cfg),
        "--replicas",
        "400",
        "--out",
        path(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "subcommand,k,lambda,estimate,se,n,eps_x,eps_phi,pass,seed,config_hash"
    );
    let last = csv.lines().last().unwrap();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols[0], "verify-duality");
    assert!(cols[8] == "true" || cols[8] == "false");
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("config_hash = {}", cols[10])));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "seed = 1\n\n[domain]\nkind = \"disc\"\ncenter = [0.0, 0.0]\nradius = 1.0\nshape = 3\n",
    )
    .unwrap();
    let out = bin()
        .args(["count-marked", "--config", path(&cfg), "--out", path(dir.path())])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn count_marked_of_single_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("zero-activity.toml");
    let out = run(&["count-marked", "--config", path(&cfg), "--out", path(dir.path())]);
    let text = String::from_utf8(out.stdout).unwrap();
    let est: f64 = text.trim().split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(est, 1.0);
}

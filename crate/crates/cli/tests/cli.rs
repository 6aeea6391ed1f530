use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_corridor"));
    c.env_remove("CORRIDOR_OUT");
    c
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn run_equilibrium_writes_every_table() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["run-equilibrium", "--scenario", &scenario("tiny.json"), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "equilibrium.json",
        "shares.csv",
        "interval_shares.csv",
        "speeds.csv",
        "waits.csv",
        "market.csv",
        "vehicles.csv",
        "trace.csv",
        "manifest.json",
    ] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let shares = read(out.path(), "shares.csv");
    assert!(shares.starts_with("stream,origin,destination,interval,t_start,demand,car,bus,dras\r\n"));
    assert_eq!(shares.lines().count(), 7);
    let manifest: serde_json::Value = serde_json::from_str(&read(out.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "run-equilibrium");
    assert!(manifest["timings"]["wall_seconds"].as_f64().unwrap() >= 0.0);
    let eq: serde_json::Value = serde_json::from_str(&read(out.path(), "equilibrium.json")).unwrap();
    assert_eq!(eq["converged"], true);
}

#[test]
fn exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    assert_eq!(run(&["run-equilibrium", "--scenario", "/no/such/file.json"]).status.code(), Some(1));
    let capped = run(&[
        "run-equilibrium",
        "--scenario",
        &scenario("tiny.json"),
        "--max-iter",
        "1",
        "--out",
        dir,
    ]);
    assert_eq!(capped.status.code(), Some(2));
    // the best iterate is still on disk
    assert!(read(out.path(), "shares.csv").lines().count() > 1);
    assert_eq!(run(&["sweep", "--scenario", &scenario("tiny.json"), "--grid", "k=8:4:1"]).status.code(), Some(1));
    // an unreachable cap is reported, with the row still written
    let sweep_dir = out.path().join("sweep");
    let unreachable = run(&[
        "sweep",
        "--scenario",
        &scenario("tiny.json"),
        "--grid",
        "k=4,tau=6,xi=0",
        "--out",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(unreachable.status.code(), Some(2));
    assert!(read(&sweep_dir, "sweep.csv").lines().nth(1).unwrap().contains(",false,"));
    assert_eq!(run(&["sweep", "--scenario", &scenario("tiny.json"), "--grid", "k=4:8:0"]).status.code(), Some(1));
    assert_eq!(run(&["run-equilibrium", "--scenario", &scenario("tiny.json"), "--policy", "k=9,tau=8"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_scenario() {
    let o = run(&["validate-scenario", "--scenario", &scenario("a10_multi_od.json")]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("3 stations, 3 demand streams"), "{text}");
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), r#"{"grid": {"start": 0, "interval_length": 300, "interval_count": 2}, "stations": [], "policy": {"k": 5, "tau": 4}}"#).unwrap();
    assert_eq!(run(&["validate-scenario", "--scenario", bad.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn output_root_from_environment() {
    let root = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run-equilibrium", "--scenario", &scenario("tiny.json")])
        .env("CORRIDOR_OUT", root.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(root.path().join("run-equilibrium-tiny").join("manifest.json").exists());
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let grid = "k=5:7:1,tau=8:9:1,xi=2";
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "sweep",
            "--scenario",
            &scenario("tiny.json"),
            "--grid",
            grid,
            "--jobs",
            jobs,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(read(a.path(), "sweep.csv"), read(b.path(), "sweep.csv"));
    assert_eq!(read(a.path(), "optimum.csv"), read(b.path(), "optimum.csv"));
    assert_eq!(read(a.path(), "sweep.csv").lines().count(), 7);
}

#[test]
fn compare_with_identical_quadrants() {
    let out = tempfile::tempdir().unwrap();
    let p = "k=6,tau=9,xi=2";
    let o = run(&[
        "compare-policies",
        "--scenario",
        &scenario("tiny.json"),
        "--no-policy",
        p,
        "--tcs-only",
        p,
        "--dras-only",
        p,
        "--combined",
        p,
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(out.path(), "comparison.csv");
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').skip(1).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn single_od_sweep_lists_credit_ratios() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        "--scenario",
        &scenario("a10_single_od.json"),
        "--grid",
        "k=50:58:2,tau=64:72:2,xi=2",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(out.path(), "sweep.csv");
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 25);
    for r in &rows {
        let k: f64 = r[col("k")].parse().unwrap();
        let tau: f64 = r[col("tau")].parse().unwrap();
        let d: f64 = r[col("d_max")].parse().unwrap();
        assert!((d - k / tau).abs() < 1e-11);
    }
    let r = rows.iter().find(|r| r[col("k")] == "54" && r[col("tau")] == "64").unwrap();
    assert_eq!(r[col("d_max")], "0.84375");
}

#[test]
fn slack_credit_row_matches_baseline() {
    // with two shuttles the uncapped car share sits below 56/64
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare-policies",
        "--scenario",
        &scenario("a10_single_od.json"),
        "--tcs-only",
        "k=56,tau=64,xi=2",
        "--no-policy",
        "k=0,tau=0,xi=2",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(out.path(), "comparison.csv");
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    assert_eq!(rows[1][col("price")], "0");
    // same equilibrium, reached along a different path
    for name in ["car_share", "bus_share", "dras_share", "in_vehicle_hours", "waiting_hours", "total"] {
        let (a, b): (f64, f64) = (rows[0][col(name)].parse().unwrap(), rows[1][col(name)].parse().unwrap());
        assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{name}: {a} vs {b}");
    }
}

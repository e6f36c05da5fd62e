use mlo_core::baselines::uniform_policy;
use mlo_core::bianchi::solve_fixed_point;
use mlo_core::channel::draw_snr;
use mlo_core::env::CHANNEL_STREAM;
use mlo_core::sim::rng_stream;
use mlo_core::{config_hash, ConfigFile};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use tempfile::TempDir;

const SMALL: &str = r#"
num_stas = 4
decision_steps = 6
seed = 3

[[baselines]]
kind = "uniform"

[[baselines]]
kind = "congestion_aware"

[[baselines]]
kind = "analytic_grid"
params = { beta_step = 0.25, w0 = [16, 64] }
"#;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mlo-lab"));
    cmd.args(["--log-level", "warn"]);
    cmd
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_config(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(Result::unwrap).collect()
}

fn header(path: &Path) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.headers().unwrap().iter().map(str::to_owned).collect()
}

fn col(path: &Path, name: &str) -> usize {
    header(path).iter().position(|h| h == name).unwrap()
}

#[test]
fn analytic_sweep_matches_the_solver() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    run(&["analytic", "--out", out.to_str().unwrap(), "--sweep-n", "5,10,15"]);
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 3);
    let r_col = col(&out, "r_total_mbps");
    let r: Vec<f64> = rows.iter().map(|row| row[r_col].parse().unwrap()).collect();

    let expected: Vec<f64> = [5, 10, 15]
        .iter()
        .map(|&n| {
            let cfg = ConfigFile { num_stas: n, ..Default::default() }.resolve().unwrap();
            let rates = draw_snr(&cfg, &mut rng_stream(cfg.seed, CHANNEL_STREAM)).unwrap().rate_mbps;
            let (beta, icw) = uniform_policy(&cfg);
            let sol = solve_fixed_point(&cfg, &beta, &icw, &rates).unwrap();
            assert_eq!(rows.iter().filter(|row| row[1] == config_hash(&cfg)).count(), 1);
            sol.r_total
        })
        .collect();
    assert_eq!(r, expected);
    // the default deployment peaks at N = 10 rather than growing with N
    assert!(r[1] > r[0] && r[2] < r[1], "{r:?}");
}

#[test]
fn analytic_rows_carry_provenance() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = dir.path().join("a.csv");
    run(&["analytic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "1,2"]);
    assert_eq!(
        &header(&out)[..3],
        ["schema", "config_hash", "seed"]
    );
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!((&rows[0][0], &rows[0][2], &rows[1][2]), ("1", "1", "2"));
    let r_link = col(&out, "r_link_mbps");
    assert_eq!(rows[0][r_link].split(';').count(), 2);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let trace = dir.path().join("trace.csv");
    for out in [&a, &b] {
        run(&[
            "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
            "--seeds", "7,8", "--trace", trace.to_str().unwrap(),
        ]);
    }
    let rows = read_csv(&a);
    assert_eq!(rows.len(), 2 * 6);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let seed = col(&a, "seed");
    assert!(rows[..6].iter().all(|r| &r[seed] == "7"));
    assert!(rows[6..].iter().all(|r| &r[seed] == "8"));
    assert_ne!(rows[0].iter().skip(4).collect::<Vec<_>>(), rows[6].iter().skip(4).collect::<Vec<_>>());

    let events = read_csv(&trace);
    assert!(!events.is_empty());
    let kinds: std::collections::BTreeSet<_> = events.iter().map(|e| e[7].to_owned()).collect();
    assert!(kinds.contains("tx") && kinds.contains("success"));
}

#[test]
fn evaluate_grid_dominates_uniform_analytically() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = dir.path().join("eval.csv");
    run(&["evaluate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "1,2,3"]);
    let rows = read_csv(&out);
    let names: Vec<_> = rows.iter().map(|r| r[3].to_owned()).collect();
    assert_eq!(names, ["uniform", "congestion_aware", "analytic_grid"]);
    let analytic = col(&out, "analytic_mbps_mean");
    let value = |i: usize| rows[i][analytic].parse::<f64>().unwrap();
    assert!(value(2) >= value(0), "{} < {}", value(2), value(0));
    for r in &rows {
        assert_eq!(&r[2], "1;2;3");
        assert_eq!(&r[4], "3");
        let jain: f64 = r[col(&out, "jain_mean")].parse().unwrap();
        assert!((0.25..=1.0).contains(&jain));
    }
}

#[test]
fn failures_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "num_stas = 0").unwrap();
    let out = dir.path().join("x.csv");
    let res = bin()
        .args(["simulate", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "1"])
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
    assert!(!out.exists());

    let cfg = small_config(&dir);
    let missing_dir = dir.path().join("nope").join("x.csv");
    let res = bin()
        .args(["analytic", "--config", cfg.to_str().unwrap(), "--out", missing_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!res.status.success());

    let unknown = bin()
        .args(["simulate", "--out", out.to_str().unwrap(), "--seeds", "1", "--policy", "oracle"])
        .output()
        .unwrap();
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("analytic_grid"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn shipped_default_config_matches_builtin_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let file = ConfigFile::load(&path).unwrap();
    assert_eq!(file.baselines.len(), 4);
    let shipped = file.resolve().unwrap();
    let builtin = ConfigFile::default().resolve().unwrap();
    assert_eq!(config_hash(&shipped), config_hash(&builtin));
}

#[test]
fn serve_over_stdio() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let mut child = bin()
        .args(["serve", "--stdio", "--config", cfg.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let action = r#"{"beta_raw":{"rows":4,"cols":2,"data":[1,1,1,1,1,1,1,1]},"w_raw":{"rows":4,"cols":2,"data":[0,0,0,0,0,0,0,0]}}"#;
    writeln!(stdin, r#"{{"type":"reset","seq":1,"payload":{{"config":"small","seed":1}}}}"#).unwrap();
    writeln!(stdin, r#"{{"type":"step","seq":2,"payload":{{"action":{action}}}}}"#).unwrap();
    drop(stdin);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["type"], "reply");
    assert_eq!(lines[0]["payload"]["observation"]["g"]["rows"], 4);
    assert_eq!(lines[1]["payload"]["step"], 1);
    assert!(lines[1]["payload"]["reward"].as_f64().unwrap() > 0.0);
}

#[test]
fn serve_over_tcp() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_mlo-lab"))
        .args(["--log-level", "info", "serve", "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let addr = loop {
        let mut line = String::new();
        assert!(stderr.read_line(&mut line).unwrap() > 0, "server exited");
        if let Some(rest) = line.split("addr=").nth(1) {
            break rest.split_whitespace().next().unwrap().to_owned();
        }
    };
    let stream = TcpStream::connect(&addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    writeln!(writer, r#"{{"type":"reset","seq":1,"payload":{{"config":"missing","seed":1}}}}"#).unwrap();
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    let reply: serde_json::Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(reply["type"], "error");
    assert_eq!(reply["payload"]["code"], "unknown_config");

    writeln!(writer, r#"{{"type":"reset","seq":2,"payload":{{"seed":1}}}}"#).unwrap();
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    let reply: serde_json::Value = serde_json::from_str(&reply).unwrap();
    assert_eq!(reply["type"], "reply");
    assert_eq!(reply["payload"]["num_stas"], 10);
    child.kill().unwrap();
    child.wait().unwrap();
}

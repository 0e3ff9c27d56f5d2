use std::path::Path;
use std::process::{Command, Output};

fn foliage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foliage"))
        .args(args)
        .env_remove("FOLIAGE_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_RUN: &[&str] =
    &["--builtin", "jouanolou", "--degree", "2", "--eta", "flow", "--horizon", "2", "--paths", "6", "--seed", "11"];

#[test]
fn non_positive_time_is_an_input_error() {
    let out = foliage(&["heat-kernel", "--t", "0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("t = 0"));
}

#[test]
fn heat_kernel_table_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let (ra, rb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for (csv, rep) in [(&a, &ra), (&b, &rb)] {
        let out = foliage(&[
            "heat-kernel",
            "--t",
            "0.7",
            "--grid",
            "256",
            "--out",
            csv.to_str().unwrap(),
            "--report",
            rep.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    // Same configuration apart from the output paths, which are echoed.
    let strip = |p: &Path| {
        std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with("# config=")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    let report = json(&ra);
    assert_eq!(report["result"]["pass"], true);
    assert_eq!(report["command"], "heat-kernel");
    assert_eq!(report["constants_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn local_model_rejects_real_lambda() {
    assert_eq!(code(&foliage(&["local-model", "verify", "--lambda", "2"])), 2);
    assert_eq!(code(&foliage(&["local-model", "verify", "--lambda", "1.5,0"])), 2);
}

#[test]
fn local_model_passes() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("lm.json");
    let out = foliage(&["local-model", "verify", "--lambda", "0.3+1.2i", "--cases", "50", "--out", rep.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = json(&rep);
    assert_eq!(r["result"]["pass"], true);
    assert!(r["result"]["max_holonomy_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn degree_one_is_a_domain_error() {
    let out = foliage(&["lyapunov", "--builtin", "jouanolou", "--degree", "1", "--eta", "flow"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "horizn = 3.0\n").unwrap();
    assert_eq!(code(&foliage(&["heat-kernel", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\nhorizon = 2.0\npaths = 6\neta = \"flow\"\n[foliation]\nbuiltin = \"jouanolou\"\ndegree = 2\n")
        .unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = foliage(&["lyapunov", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut args = vec!["lyapunov"];
    args.extend_from_slice(SMALL_RUN);
    args.extend_from_slice(&["--out", b.to_str().unwrap()]);
    assert_eq!(code(&foliage(&args)), 0);
    assert_eq!(json(&a)["result"], json(&b)["result"]);
    assert_eq!(json(&a)["config"]["horizon"], 2.0);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for workers in ["1", "3"] {
        let rep = dir.path().join(format!("w{workers}.json"));
        let mut args = vec!["lyapunov"];
        args.extend_from_slice(SMALL_RUN);
        args.extend_from_slice(&["--workers", workers, "--out", rep.to_str().unwrap()]);
        assert_eq!(code(&foliage(&args)), 0);
        let r = json(&rep);
        assert_eq!(r["runtime"]["workers"].as_u64().unwrap(), workers.parse::<u64>().unwrap());
        assert!(r["config"]["workers"].is_null());
        results.push(r["result"].clone());
    }
    assert_eq!(results[0], results[1]);
}

#[test]
fn occupation_feeds_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let res = dir.path().join("res.csv");
    let rep = dir.path().join("occ.json");
    let mut args = vec!["occupation"];
    args.extend_from_slice(SMALL_RUN);
    args.extend_from_slice(&[
        "--out",
        grid.to_str().unwrap(),
        "--reservoir",
        res.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    let out = foliage(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&grid).unwrap();
    assert!(header.starts_with("# foliage"));
    assert!(header.lines().any(|l| l == "chart,i,j,weight"));

    let inv = dir.path().join("inv.json");
    let out = foliage(&[
        "invariance",
        "--builtin",
        "jouanolou",
        "--degree",
        "2",
        "--eta",
        "flow",
        "--grid-file",
        grid.to_str().unwrap(),
        "--reservoir",
        res.to_str().unwrap(),
        "--points",
        "5",
        "--t",
        "0.2",
        "--out",
        inv.to_str().unwrap(),
    ]);
    // Too few points for a verdict; only the plumbing is checked here.
    assert!(matches!(code(&out), 0 | 1), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&inv);
    assert_eq!(r["result"]["invariance"]["n"], 5);
    assert_eq!(r["result"]["check_bins"], 8);
}

#[test]
fn invariance_without_grid_is_an_input_error() {
    let out = foliage(&["invariance", "--builtin", "jouanolou", "--degree", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eta_profile_near_linear_singularity() {
    let out = foliage(&[
        "eta",
        "profile",
        "--builtin",
        "linear_model",
        "--model-lambda",
        "i",
        "--depth",
        "4",
        "--samples",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "s,eta_hat,ratio");
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        let ratio: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(ratio > 1.0 / 3.0 && ratio < 3.0, "{row}");
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SIX_UNITS: &str = r#"{"schema":1,"values":[20,18,14,13,8,7],"costs":[10,9,4,4,2,2],"budget":12,"coverage_floor":2}"#;

fn coverlock(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverlock"))
        .args(args)
        .current_dir(dir)
        .env_remove("COVERLOCK_THREADS")
        .output()
        .unwrap()
}

fn with_file(name: &str, body: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(name), body).unwrap();
    dir
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_glc_on_six_units() {
    let dir = with_file("a.json", SIX_UNITS);
    let v = json(&coverlock(
        dir.path(),
        &["solve", "--method", "glc", "a.json"],
    ));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["objective"], 42.0);
    assert_eq!(v["decisions"], serde_json::json!([0, 0, 1, 1, 1, 1]));
    assert_eq!(v["budget_binding"], true);
}

#[test]
fn solve_every_method() {
    let dir = with_file("a.json", SIX_UNITS);
    for m in ["exact", "lp", "glc", "rc-prefix", "rc-skip"] {
        let v = json(&coverlock(dir.path(), &["solve", "--method", m, "a.json"]));
        assert_eq!(v["method"], m);
        assert_eq!(v["treated"], serde_json::json!([2, 3, 4, 5]), "{m}");
    }
    let v = json(&coverlock(
        dir.path(),
        &["solve", "--method", "lp", "a.json"],
    ));
    assert_eq!(v["dual_prices"]["lambda"], 2.0);
    assert!(v["weights"].is_array() && v.get("decisions").is_none());
}

#[test]
fn glc_trace_goes_to_stderr() {
    let dir = with_file("a.json", SIX_UNITS);
    let out = coverlock(
        dir.path(),
        &["solve", "--method", "glc", "--trace", "a.json"],
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("action=bracket"));
    assert_eq!(json(&out)["objective"], 42.0);
}

#[test]
fn csv_and_per_capita_inputs() {
    let dir = with_file("a.csv", "value,cost\n20,10\n18,9\n14,4\n13,4\n8,2\n7,2\n");
    let v = json(&coverlock(
        dir.path(),
        &[
            "solve",
            "--method",
            "exact",
            "a.csv",
            "--budget",
            "12",
            "--coverage",
            "2",
        ],
    ));
    assert_eq!(v["objective"], 42.0);
    let out = coverlock(dir.path(), &["solve", "--method", "exact", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = with_file(
        "p.json",
        r#"{"values":[20,18,14,13,8,7],"costs":[10,9,4,4,2,2],"budget_per_capita":2.0,"coverage_share":0.33}"#,
    );
    let out = coverlock(dir.path(), &["solve", "--method", "rc-skip", "p.json"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("per-capita"));
    let v = json(&out);
    assert_eq!(
        (v["budget"].as_f64(), v["coverage_floor"].as_u64()),
        (Some(12.0), Some(2))
    );
}

#[test]
fn exit_codes() {
    let dir = with_file("bad.json", "{\"values\": [1, 2");
    assert_eq!(
        coverlock(dir.path(), &["solve", "--method", "lp", "bad.json"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        coverlock(dir.path(), &["solve", "--method", "lp", "missing.json"])
            .status
            .code(),
        Some(1)
    );

    let dir = with_file("a.json", SIX_UNITS);
    let out = coverlock(dir.path(), &["solve", "--method", "simplex", "a.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);

    let dir = with_file(
        "i.json",
        r#"{"values":[1,2],"costs":[5,5],"budget":6,"coverage_floor":2}"#,
    );
    for m in ["exact", "lp", "glc"] {
        assert_eq!(
            coverlock(dir.path(), &["solve", "--method", m, "i.json"])
                .status
                .code(),
            Some(2)
        );
    }

    let dir = with_file(
        "c.json",
        r#"{"values":[50,1],"costs":[10,1],"budget":5,"coverage_floor":1}"#,
    );
    assert_eq!(
        coverlock(dir.path(), &["solve", "--method", "rc-prefix", "c.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        coverlock(dir.path(), &["solve", "--method", "rc-skip", "c.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        coverlock(dir.path(), &["solve", "--method", "exact", "c.json"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |t: &str| {
        Command::new(env!("CARGO_BIN_EXE_coverlock"))
            .args(["mc1", "--n", "20,30", "--reps", "2"])
            .env("COVERLOCK_THREADS", t)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(1));
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("3").stdout);
}

#[test]
fn mc1_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = coverlock(
        dir.path(),
        &[
            "mc1",
            "--n",
            "50..500..150",
            "--reps",
            "3",
            "--seed",
            "7",
            "--out",
            "t.csv",
            "--plot-out",
            "s.csv",
        ],
    );
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("n,opt_value,glc_value,glc_regret,lp_gap,lp_frac")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        vec![50.0, 200.0, 350.0, 500.0]
    );
    assert!(rows
        .iter()
        .all(|r| r[5] <= 2.0 && r[4] >= 0.0 && r[3] >= 0.0));
    let series = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(series.starts_with("series,n,mean,q25,q75\n"));
    assert_eq!(series.lines().count(), 9);

    let out = coverlock(
        dir.path(),
        &[
            "mc1",
            "--n",
            "20",
            "--reps",
            "3",
            "--budget-per-capita",
            "0.01",
            "--rho",
            "0.9",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc2_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = coverlock(
        dir.path(),
        &[
            "mc2",
            "--n",
            "200",
            "--reps",
            "4",
            "--seed",
            "3",
            "--out",
            "t.csv",
            "--dump-units",
            "u.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,cost_het,rho,mean_nu,status,misallocation_area"
    );
    let labels: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(labels, ["(1)", "(2)", "(3)", "(4)"]);
    for l in &lines[1..] {
        let f: Vec<&str> = l.split(',').collect();
        let nu: f64 = f[3].parse().unwrap();
        assert_eq!(f[4], if nu > 1e-6 { "Binding" } else { "Slack" });
    }
    let units = fs::read_to_string(dir.path().join("u.csv")).unwrap();
    assert!(units.starts_with("index,tau,cost,ratio,margin,b_lp,pi_lp,pi_rc,disagree\n"));
    assert_eq!(units.lines().count(), 201);

    let out = coverlock(
        dir.path(),
        &[
            "mc2",
            "--n",
            "50",
            "--reps",
            "2",
            "--scenario",
            "x:1:0.9",
            "--budget-per-capita",
            "0.05",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = coverlock(dir.path(), &["mc2", "--scenario", "x:1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_reports() {
    let dir = with_file("a.json", SIX_UNITS);
    let v = json(&coverlock(
        dir.path(),
        &["analyze", "a.json", "lp", "rc-skip"],
    ));
    assert_eq!(v["misallocation_area"], 0.0);
    assert_eq!(v["band_containment"], true);
    assert!(v["loss_bound"].is_null());
    let v = json(&coverlock(
        dir.path(),
        &["analyze", "a.json", "glc", "glc", "--margin-constant", "2"],
    ));
    assert_eq!(v["misallocation_area"], 0.0);
    assert!(v["loss_bound"].as_f64().unwrap() >= 0.0);
    let v = json(&coverlock(
        dir.path(),
        &["analyze", "a.json", "lp", "exact"],
    ));
    assert_eq!(v["misallocation_area"], 0.0);
}

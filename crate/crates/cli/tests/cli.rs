use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ratioblock"));
    c.env_remove("RATIOBLOCK_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ratioblock-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gen_round_trips_through_analyze() {
    let o = run(&["gen", "--family", "power", "--param", "q=1/2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["family"], "power_root");
    assert_eq!(v["params"]["q"], "1/2");
    let path = scratch("squares.json");
    std::fs::write(&path, &o.stdout).unwrap();
    let o = run(&["--json", "analyze", "mean-ratio", "--in", path.to_str().unwrap(), "--n", "200000"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"]["kind"], "converged");
    let last = v["checkpoints"].as_array().unwrap().last().unwrap();
    assert!((last[1].as_f64().unwrap() - 1.0 / 3.0).abs() < 5e-3);
    // exact value travels as a p/q string, t as a decimal string
    assert!(last[2].as_str().unwrap().contains('/'));
    assert_eq!(last[0], "200000");
}

#[test]
fn gen_prefix_is_json_lines() {
    let o = run(&["gen", "--family", "factorial_interval", "--prefix", "6"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "\"3\"\n\"4\"\n\"5\"\n\"6\"\n\"25\"\n\"26\"\n");
}

#[test]
fn budget_flag_and_env() {
    let o = run(&["--budget", "10", "gen", "--family", "naturals", "--prefix", "11"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("budget"));
    let o = bin().env("RATIOBLOCK_BUDGET", "10").args(["gen", "--family", "naturals", "--prefix", "11"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().env("RATIOBLOCK_BUDGET", "20").args(["gen", "--family", "naturals", "--prefix", "11"]).output().unwrap();
    assert!(o.status.success());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["gen"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--family", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "lambda", "--in", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(run(&["probe", "--family", "squares", "--c", "2", "--window", "9..3"]).status.code(), Some(2));
}

#[test]
fn analyze_stats() {
    let o = run(&["--json", "analyze", "ratio-scan", "--family", "squares", "--c", "2", "--window", "10^8..10^10", "--points", "20"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["sup"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-3);
    let o = run(&["--json", "analyze", "df-envelope", "--family", "squares", "--window", "5000..10000", "--grid", "1/4,1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["model"]["kind"], "power");
    assert_eq!(v["model"]["q"], "1/2");
    assert_eq!(v["upper"][1][0], "1/1");
    let o = run(&["analyze", "step-df", "--family", "naturals", "--n", "10", "--grid", "7/20"]);
    assert!(stdout(&o).contains("= 3/10"));
    let o = run(&["--json", "analyze", "lemma1", "--family", "squares", "--window", "10^8..10^10"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["sup_diff"].as_f64().unwrap() < 1e-2);
    let o = run(&["--json", "--seed", "9", "analyze", "maps", "--k", "4", "--n", "1000"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["max_fg_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["involution_failures"], 0);
}

#[test]
fn probe_and_ratioset() {
    let o = run(&["--json", "probe", "--family", "squares", "--c", "101/100", "--window", "10^4..10^9"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // j^2 for j = 100..=200 has 0.01 j^2 < 2j+1
    assert_eq!(v["scans"][0]["violations"], "101");
    assert_eq!(v["scans"][0]["tail_violations"], "0");
    let csv = scratch("points.csv");
    let o = run(&["--json", "ratioset", "--family", "geometric", "--param", "ratio=4", "--bound", "10^6", "--grid", "10", "--points", csv.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["hit"], 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x1"));
    assert!(text.lines().any(|l| l == "1/4"));
    let o = run(&["--json", "ratioset", "--family", "naturals", "--k", "3", "--bound", "30", "--grid", "4"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["fraction"], 1.0);
}

#[test]
fn report_formats_and_exit_codes() {
    let o = run(&["report", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("name,computed,expected,tolerance,pass\n"));
    let a = run(&["report", "--format", "json"]);
    let b = run(&["report", "--format", "json"]);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["schema"], "ratioblock-report/1");
    assert!(v.get("timing").is_none());

    let suite = scratch("suite.json");
    std::fs::write(
        &suite,
        r#"{"name": "t", "checks": [
            {"name": "ok", "family": "naturals", "stat": "lambda", "n": 1000, "reduce": "sup",
             "expected": 1, "tolerance": 0.2, "anchor": "convergence-exponent"},
            {"name": "wrong", "family": "squares", "stat": "mean_ratio", "n": 1000,
             "expected": "1/2", "tolerance": 0.01, "anchor": "mean-ratio"}
        ]}"#,
    )
    .unwrap();
    let o = run(&["report", "--suite", suite.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().starts_with('✓'));
    assert!(text.lines().nth(1).unwrap().starts_with('✗'));
    let empty = scratch("empty.json");
    std::fs::write(&empty, r#"{"name": "e", "checks": []}"#).unwrap();
    assert!(run(&["report", "--suite", empty.to_str().unwrap()]).status.success());
    std::fs::write(&empty, "{").unwrap();
    assert_eq!(run(&["report", "--suite", empty.to_str().unwrap()]).status.code(), Some(2));
}

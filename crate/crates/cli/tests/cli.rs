use std::process::{Command, Output};

use serde_json::Value;

fn operc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_operc"))
        .args(args)
        .env_remove("OPERC_THREADS")
        .output()
        .expect("run operc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_theorem1_percolates() {
    let o = operc(&["check", "--p", "20x0.1", "--epsilon", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("overall verdict: percolates"));
    assert!(text.contains("route: theorem1"));
}

#[test]
fn check_subcritical_and_isotropic() {
    let o = operc(&["check", "--p", "0.2,0.2,0.2,0.3", "--format", "machine-record"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "no_percolation");
    let o = operc(&["check", "--isotropic", "10", "--format", "machine-record"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["isotropic_bound"].as_f64(), Some(0.2));
    assert_eq!(operc(&["check", "--isotropic", "3"]).status.code(), Some(2));
}

#[test]
fn lambda_csv_total_below_bound() {
    let o = operc(&["lambda", "--q", "4x0.25", "--m", "4", "--N", "200", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("n,value\n1,0.25\n"));
    let total: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("total,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(total <= 2.5, "{total}");
    let lines = text.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count();
    assert_eq!(lines, 200);
}

#[test]
fn enumerate_identity_report() {
    let o = operc(&["enumerate", "--p", "1/2,1/2", "--identity", "--M", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exactly equal"));
}

#[test]
fn machine_records_round_trip() {
    let cases: &[&[&str]] = &[
        &["check", "--p", "20x0.1", "--m", "10", "--N", "100"],
        &["lambda", "--q", "1/4,1/4,1/4,1/4", "--m", "4", "--N", "50"],
        &["tau", "--q", "1/2,1/3,1/6", "--M", "10"],
        &["collide", "--q", "0.2,0.3,0.5", "--N", "12", "--projection"],
        &["enumerate", "--p", "1/3,1/3,1/3", "--n", "2", "--identity"],
        &["pack", "--q", "0.1,0.1,0.25,0.25,0.25,0.05", "--m", "4"],
        &["pack", "--q", "0.1,0.1,0.25,0.25,0.25,0.05", "--m", "4", "--verify", "20"],
        &["simulate", "--p", "4x0.3", "--N", "8", "--R", "50", "--seed", "3", "--counts"],
    ];
    for args in cases {
        let mut full = args.to_vec();
        full.extend(["--format", "machine-record"]);
        let o = operc(&full);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let v: Value = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&v).unwrap() + "\n";
        assert_eq!(again, text, "{args:?}");
    }
}

#[test]
fn simulate_is_reproducible_across_threads() {
    let base = ["simulate", "--p", "5x0.3", "--N", "12", "--R", "80", "--seed", "42", "--counts", "--format", "csv"];
    let a = operc(&base);
    let mut with_threads = base.to_vec();
    with_threads.extend(["--threads", "3"]);
    let b = operc(&with_threads);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("level,mean_W,var_W,survival_frac,ci_halfwidth\n0,1,0,1,0\n"));
}

#[test]
fn exit_codes() {
    assert_eq!(operc(&["nonsense"]).status.code(), Some(2));
    assert_eq!(operc(&["lambda", "--q", "0.5,0.6", "--m", "4"]).status.code(), Some(2));
    assert_eq!(operc(&["check", "--p", "20x0.1", "--epsilon", "0"]).status.code(), Some(2));
    assert_eq!(operc(&["check", "--p", "8x0.2", "--m", "3"]).status.code(), Some(2));
    assert_eq!(operc(&["tau", "--q", "1/2,abc"]).status.code(), Some(2));
    let o = operc(&["simulate", "--p", "20x0.1", "--N", "30", "--R", "1", "--seed", "1", "--counts", "--memory-cap-mib", "16"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("memory cap"));
    assert_eq!(operc(&["--help"]).status.code(), Some(0));
}

#[test]
fn output_file_and_vector_file() {
    let dir = tempfile::tempdir().unwrap();
    let vec_path = dir.path().join("q.txt");
    std::fs::write(&vec_path, "# packed step law\n1/4,1/4\n1/4\n1/4\n").unwrap();
    let out_path = dir.path().join("tau.csv");
    let q_arg = format!("@{}", vec_path.display());
    let o = operc(&["tau", "--q", &q_arg, "--M", "5", "--format", "csv", "--output", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(out_path).unwrap();
    assert!(csv.starts_with("n,value\n1,0.25\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn metadata_written_separately() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.json");
    let o = operc(&["simulate", "--p", "0.2,0.2,0.2,0.3", "--N", "20", "--R", "100", "--seed", "7", "--metadata", meta.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!(v["wall_time_secs"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_all_subset() {
    let o = operc(&["verify-all", "--only", "6,8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("[PASS] 6"));
    assert!(text.contains("[PASS] 8"));
    assert!(text.contains("2/2 criteria pass"));
}

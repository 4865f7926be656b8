use std::process::{Command, Output};

fn conddev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conddev")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn rate_csv_has_zero_at_gibbs_point() {
    let o = conddev(&["rate", "--preset", "occupancy", "--grid", "0.2,0.36787944117144233,0.6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "y,rate");
    let mid: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(mid.abs() < 1e-9);
}

#[test]
fn oracle_probabilities_sum_to_one() {
    let o = conddev(&["oracle", "--preset", "occupancy", "--n", "10"]);
    assert!(o.status.success());
    let total: f64 = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn laplace_engines_agree() {
    let run = |m: &str| {
        let o = conddev(&["laplace", "--preset", "occupancy", "--n", "20", "--method", m]);
        assert!(o.status.success());
        stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).collect::<Vec<_>>()
    };
    for (a, b) in run("fourier").iter().zip(run("dp")) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn mdp_reports_consistency() {
    let o = conddev(&["mdp", "--preset", "occupancy"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["consistency"]["passed"], true);
}

#[test]
fn simulate_writes_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = conddev(&["simulate", "--preset", "occupancy", "--n", "10", "--replicates", "50", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["samples.csv", "summary.csv", "metadata.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn check_passes_on_presets() {
    for p in ["occupancy", "bose-einstein", "branching", "bootstrap-count"] {
        let o = conddev(&["check", "--preset", p]);
        assert!(o.status.success(), "{p}: {}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
}

#[test]
fn json_law_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("law.json");
    std::fs::write(&path, r#"{"kind": "finite-table", "rows": [[0, 0.25], [1, 0.5], [2, 0.25]], "mark": "identity"}"#).unwrap();
    let o = conddev(&["locallimit", "--law", path.to_str().unwrap(), "--n", "30", "--k", "30"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_codes() {
    assert_eq!(conddev(&["--help"]).status.code(), Some(0));
    assert_eq!(conddev(&["rate", "--bogus"]).status.code(), Some(2));
    assert_eq!(conddev(&["rate", "--law", "/nonexistent/law.json"]).status.code(), Some(2));
    let o = conddev(&["oracle", "--preset", "bose-einstein", "--mark", "identity", "--n", "5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

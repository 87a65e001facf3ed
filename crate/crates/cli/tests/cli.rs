use std::process::{Command, Output};

fn qka(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qka"))
        .args(args)
        .env_remove("QKA_SEED")
        .output()
        .expect("qka binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn run_prints_agreeing_keys() {
    let out = qka(&["run", "--n", "4", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["outcome"]["status"], "ok");
    let keys = &v["outcome"]["keys"];
    assert_eq!(keys["A"], keys["B"]);
    assert_eq!(keys["B"], keys["C"]);
}

#[test]
fn forced_secrets_reproduce_worked_keys() {
    let out = qka(&["run", "--n", "2", "--force-secrets", "11:00,10:01,00:11"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for party in ["A", "B", "C"] {
        assert_eq!(v["outcome"]["keys"][party], "01");
    }
}

#[test]
fn odd_length_is_a_usage_error() {
    let out = qka(&["run", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--help"));
}

#[test]
fn detected_eavesdropper_exits_with_abort_code() {
    let code = (0..20)
        .map(|seed| qka(&["run", "--n", "8", "--adversary", "eve", "--seed", &seed.to_string()]))
        .find(|out| out.status.code() != Some(0))
        .expect("some session aborts");
    assert_eq!(code.status.code(), Some(2));
    let v = json(&code);
    assert_eq!(v["outcome"]["status"], "abort");
    assert_eq!(v["outcome"]["abort_hop"]["from"], "A");
}

#[test]
fn absolute_attack_under_simultaneous_reveals_is_infeasible() {
    let out = qka(&[
        "run",
        "--n",
        "4",
        "--announce-order",
        "simultaneous",
        "--adversary",
        r#"{"kind":"collusion","mode":"absolute","target_key":"1111"}"#,
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_adversary_json_is_a_usage_error() {
    assert_eq!(qka(&["run", "--adversary", "{not json"]).status.code(), Some(1));
    assert_eq!(qka(&["run", "--adversary", "mallory"]).status.code(), Some(1));
}

#[test]
fn attack_demo_checks_every_value() {
    let out = qka(&["attack-demo"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("[ok]").count(), 6);
    assert!(!stdout.contains("MISMATCH"));
}

#[test]
fn attack_demo_with_other_targets() {
    let out = qka(&["attack-demo", "--target", "00"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.contains("forged R'_C") && l.contains("= 10 ")));
    assert!(stdout
        .lines()
        .any(|l| l.contains("Bob's final key") && l.contains("= 00 ")));
    assert_eq!(qka(&["attack-demo", "--target", "01"]).status.code(), Some(0));
    assert_eq!(qka(&["attack-demo", "--target", "101"]).status.code(), Some(1));
}

#[test]
fn attack_demo_writes_transcript_file() {
    let path = std::env::temp_dir().join(format!("qka-demo-{}.json", std::process::id()));
    let out = qka(&["attack-demo", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v["outcome"]["keys"]["B"], "11");
}

#[test]
fn montecarlo_csv_shape() {
    let out = qka(&[
        "montecarlo",
        "--n",
        "4,8",
        "--trials",
        "50",
        "--adversary",
        "eve",
        "--fraction",
        "0,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,adversary,trials,aborts,abort_rate,attack_successes,agreement_rate,mean_decoy_failure_rate")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 8 && r[2] == "50"));
    // fraction 0 never aborts
    assert_eq!(rows[0][3], "0");
}

#[test]
fn montecarlo_json_rows() {
    let out = qka(&[
        "montecarlo",
        "--n",
        "4",
        "--trials",
        "40",
        "--adversary",
        "collusion",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let row = &v["rows"][0];
    assert_eq!(row["trials"], 40);
    assert_eq!(row["attack_successes"], 40);
    assert_eq!(row["aborts"], 0);
}

#[test]
fn fraction_sweep_needs_an_eavesdropper() {
    let out = qka(&["montecarlo", "--trials", "10", "--fraction", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_from_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_qka"))
        .args(["run", "--n", "4"])
        .env("QKA_SEED", "12")
        .output()
        .unwrap();
    assert_eq!(with_env.stdout, qka(&["run", "--n", "4", "--seed", "12"]).stdout);
}

#[test]
fn help_exits_zero() {
    let out = qka(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for sub in ["run", "attack-demo", "montecarlo"] {
        assert!(String::from_utf8_lossy(&out.stdout).contains(sub));
    }
    assert_eq!(qka(&[]).status.code(), Some(1));
}

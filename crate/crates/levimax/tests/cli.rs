//! Exit-code contract of the command-line front end: 0 when every
//! checked criterion passes, 1 when a criterion fails, 2 on usage or
//! configuration errors.

use std::process::Command;

fn levimax() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levimax"))
}

#[test]
fn regmax_eval_exits_zero() {
    let out = levimax()
        .args(["regmax", "eval", "--t", "0,5", "--theta", "1,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"value\""));
}

#[test]
fn scenario_list_names_all_builtins() {
    let out = levimax().args(["scenario", "list"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in levimax::scenario::BUILTINS {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn missing_scenario_file_exits_two() {
    let out = levimax()
        .args(["levi", "check", "--scenario", "/nonexistent/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.starts_with("error:"));
}

#[test]
fn malformed_scenario_exits_two() {
    let dir = std::env::temp_dir().join("levimax-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.json");
    std::fs::write(&path, "{\"name\": \"broken\"").unwrap();
    let out = levimax()
        .args(["levi", "check", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonpositive_theta_exits_two() {
    let out = levimax()
        .args(["regmax", "eval", "--t", "0,1", "--theta", "1,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_criterion_exits_one() {
    // the unscaled variant of the scaled builtin misses the demanded margin
    let base: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/scenarios/scaled-structure-psh.json"
        ))
        .unwrap(),
    )
    .unwrap();
    let mut variant = base;
    variant["name"] = "scaled-structure-unscaled".into();
    variant["structure"]["lambda"] = 1.0.into();
    let dir = std::env::temp_dir().join("levimax-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("unscaled.json");
    std::fs::write(&path, serde_json::to_string(&variant).unwrap()).unwrap();
    let out = levimax()
        .args(["levi", "check", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hypothesis_violation_exits_two() {
    // alpha exceeds the actual Hessian bound of the inputs, so the check
    // is inapplicable rather than failed
    let scenario = r#"{
        "name": "inapplicable",
        "n": 1,
        "structure": {"kind": "standard"},
        "fields": ["0.1 * (x1^2 + x2^2)"],
        "alpha": "1",
        "theta": [0.05],
        "grid": {"lo": -0.5, "hi": 0.5, "points": 3},
        "seed": 9
    }"#;
    let dir = std::env::temp_dir().join("levimax-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("inapplicable.json");
    std::fs::write(&path, scenario).unwrap();
    let out = levimax()
        .args(["smooth", "hessian", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("hypothesis"), "{text}");
}

#[test]
fn builtin_scenarios_all_pass_their_checks() {
    for (subcommand, scenario) in [
        (vec!["smooth", "estimate"], "builtin:integrable-paraboloids"),
        (vec!["smooth", "hessian"], "builtin:integrable-paraboloids"),
        (vec!["smooth", "hessian"], "builtin:theorem32-nonintegrable"),
        (vec!["levi", "check"], "builtin:remark1-counterexample"),
        (vec!["levi", "check"], "builtin:scaled-structure-psh"),
        (vec!["disc", "solve"], "builtin:remark1-counterexample"),
        (vec!["adapt"], "builtin:remark1-counterexample"),
    ] {
        let mut args = subcommand.clone();
        args.push("--scenario");
        args.push(scenario);
        let out = levimax().args(&args).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{subcommand:?} {scenario}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn csv_flag_rejected_where_no_dump_exists() {
    let dir = std::env::temp_dir().join("levimax-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("never-written.csv");
    let out = levimax()
        .args([
            "levi",
            "check",
            "--scenario",
            "builtin:remark1-counterexample",
            "--csv",
            path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

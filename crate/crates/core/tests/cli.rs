use std::process::Command;

fn wlc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wlc"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn analyze_prints_exact_values() {
    let (code, out) = wlc(&["analyze", "cm:5", "--protocol", "la"]);
    assert_eq!(code, 0);
    assert!(out.contains("ect 7/3") && out.contains("gct 3"), "{out}");
    let (_, json) = wlc(&["analyze", "cm:4", "--protocol", "wm", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["ect"], "5/2");
    assert_eq!(v["gct"], "inf");
}

#[test]
fn exit_codes() {
    assert_eq!(
        wlc(&["analyze", "cm:9", "--protocol", "la", "--max-states", "3"]).0,
        2
    );
    assert_eq!(wlc(&["enumerate", "5"]).0, 1);
    assert_eq!(wlc(&["analyze", "no-such-game"]).0, 1);
    assert_eq!(
        wlc(&[
            "simulate",
            "cm:4",
            "--episodes",
            "1000",
            "--max-rounds",
            "1"
        ])
        .0,
        1
    );
    assert_eq!(wlc(&["formulas", "6"]).0, 0);
}

#[test]
fn optimal_writes_policy_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, text) = wlc(&[
        "optimal",
        "cm:4",
        "--gct",
        "--probe-uniqueness",
        "--json",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["optimal_ect"].as_f64().unwrap() - 2.5).abs() < 1e-9);
    assert_eq!(v["optimal_gct"], "inf");
    assert!(v["probe"]["verdict"]
        .as_str()
        .unwrap()
        .starts_with("Interval"));
    let table = dir.path().join("policy.json");
    let (code, text) = wlc(&[
        "analyze",
        "cm:4",
        "--protocol",
        &format!("table:{}", table.display()),
    ]);
    assert_eq!(code, 0);
    assert!(text.contains("(~2.500000)"), "{text}");
}

#[test]
fn enumerate_and_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = wlc(&["enumerate", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.starts_with("8 games"), "{text}");
    assert!(dir.path().join("census.csv").exists());
    let (code, text) = wlc(&["golden", "--m", "1,2,3,4"]);
    assert_eq!(code, 0);
    assert!(!text.contains("FAIL"));
}

#[test]
fn game_files_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("g.txt");
    std::fs::write(&game, "left 2\nright 2\nedge 0 0\nedge 1 1\n").unwrap();
    let trace = dir.path().join("t.txt");
    std::fs::write(&trace, "round 1: L0 R1 MISS\n").unwrap();
    let (code, text) = wlc(&[
        "classes",
        game.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(text.contains("focal points"), "{text}");
    let (code, text) = wlc(&[
        "simulate",
        game.to_str().unwrap(),
        "--protocol",
        "wm",
        "--episodes",
        "2000",
        "--seed",
        "4",
    ]);
    assert_eq!(code, 0);
    assert!(text.contains("truncated 0"));
}

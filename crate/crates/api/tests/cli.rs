use std::process::Command;

fn seatwin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_seatwin")).args(args).output().unwrap()
}

#[test]
fn passing_run_exits_zero_and_writes_reports() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let o = seatwin(&["run", "--scenario", "a", "--seed", "7", "--duration", "900", "--mode", "virtual", "--out", dir]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("scenario a  PASS"), "{text}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("a-report.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert_eq!(json["seed"], 7);
    assert_eq!(json["duration_s"], 900.0);
    for name in ["a-report.txt", "a-log.jsonl", "a-trace.jsonl"] {
        assert!(out.path().join(name).exists(), "{name}");
    }
}

#[test]
fn failing_assertion_exits_one() {
    // 600 s leaves MANSIO idle for 120 s, too short to count as a gap
    let out = tempfile::tempdir().unwrap();
    let o = seatwin(&["run", "--scenario", "b", "--duration", "600", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] MANSIO stop/start"));
}

#[test]
fn bad_input_exits_two() {
    let o = seatwin(&["run", "--scenario", "a", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = seatwin(&["run", "--scenario", "e"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn custom_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    std::fs::write(
        &path,
        r#"
name = "pair"
seed = 3
duration_s = 600

[[platform]]
name = "FLUX"
x = 100
y = 0
depth = 10
measurement_period_s = 10

[[platform]]
name = "BIGO"
x = -100
y = 0
depth = 10
measurement_period_s = 60
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = seatwin(&["run", "--scenario", "d", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

use seatwin::harness::{run_scenario, MissionConfig, Scenario};

fn run(s: Scenario) {
    let config = MissionConfig::default_mission();
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(s, &config, Some(dir.path())).unwrap();
    println!("{}", report.to_text());
    assert!(report.passed, "{:?}", report.failures().collect::<Vec<_>>());
    for f in report.files.values() {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(dir.path().join(format!("{}-report.json", s.letter())).exists());
}

#[test]
fn scenario_a_default_mission() {
    run(Scenario::A);
}

#[test]
fn scenario_b_default_mission() {
    run(Scenario::B);
}

#[test]
fn scenario_c_default_mission() {
    run(Scenario::C);
}

#[test]
fn scenario_d_default_mission() {
    run(Scenario::D);
}

#[test]
fn mansio_cap_samples_are_flagged() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/missions/mansio_cap.toml");
    let config = MissionConfig::load(std::path::Path::new(path)).unwrap();
    let report = run_scenario(Scenario::A, &config, None).unwrap();
    println!("{}", report.to_text());
    assert!(report.passed);
    let flagged = report.assertion("implausible samples flagged, plausible ones not").unwrap();
    // first four hours above the cap, one sample every 120 s
    assert!(flagged.detail.starts_with("120 flagged"), "{}", flagged.detail);
}

#[test]
fn reports_are_reproducible() {
    let config = MissionConfig::default_mission();
    for s in [Scenario::B, Scenario::D] {
        let one = tempfile::tempdir().unwrap();
        let two = tempfile::tempdir().unwrap();
        run_scenario(s, &config, Some(one.path())).unwrap();
        run_scenario(s, &config, Some(two.path())).unwrap();
        for entry in std::fs::read_dir(one.path()).unwrap() {
            let name = entry.unwrap().file_name();
            let a = std::fs::read(one.path().join(&name)).unwrap();
            let b = std::fs::read(two.path().join(&name)).unwrap();
            assert!(a == b, "{name:?} differs between runs");
        }
    }
}

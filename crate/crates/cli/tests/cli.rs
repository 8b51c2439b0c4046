use std::path::Path;
use std::process::{Command, Output};

fn robotability(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robotability")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> String {
    let city = dir.join("city");
    let out = robotability(&["synth-city", "--blocks-x", "4", "--blocks-y", "4", "-o", s(&city)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    s(&city.join("config.toml")).to_string()
}

#[test]
fn staged_run_matches_single_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = synth(tmp.path());
    let staged = tmp.path().join("staged");
    for stage in ["derive-weights", "build-graph", "segmentize", "extract", "score", "aggregate", "rank"] {
        let out = robotability(&[stage, "-c", &config, "-o", s(&staged)]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let whole = tmp.path().join("whole");
    assert!(robotability(&["run", "-c", &config, "-o", s(&whole)]).status.success());
    for f in ["weights.csv", "points.csv", "features.bin", "scores.csv", "zone_scores.geojson", "ranking.json", "profile_result.json"] {
        let a = std::fs::read(staged.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        let b = std::fs::read(whole.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn exit_codes_follow_error_category() {
    let tmp = tempfile::tempdir().unwrap();
    let config = synth(tmp.path());
    let out = tmp.path().join("out");

    let bad_band = robotability(&["run", "-c", &config, "-o", s(&out), "--band", "0.9"]);
    assert_eq!(bad_band.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad_band.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");

    let empty = tmp.path().join("empty");
    assert_eq!(robotability(&["score", "-c", &config, "-o", s(&empty)]).status.code(), Some(3));

    let missing_config = robotability(&["run", "-c", s(&tmp.path().join("nope.toml"))]);
    assert_eq!(missing_config.status.code(), Some(3));
}

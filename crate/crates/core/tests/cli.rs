use std::path::Path;
use std::process::{Command, Output};

fn gk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("gk runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let help = gk(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["synth", "train", "eval", "segment", "track", "run", "bench"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    let version = gk(dir.path(), &["--version"]);
    assert_eq!(code(&version), 0);
    assert!(String::from_utf8_lossy(&version.stdout).contains(gesturekit::VERSION_LINE));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gk(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&gk(dir.path(), &["run", "--set", "tracking.nope=1"])), 1);
    assert_eq!(code(&gk(dir.path(), &["run", "--context", "toaster"])), 1);
    assert_eq!(code(&gk(dir.path(), &["synth", "--threads", "0"])), 1);
    std::fs::write(dir.path().join("bad.json"), r#"{"tracking": {"r": -1}}"#).unwrap();
    assert_eq!(code(&gk(dir.path(), &["--config", "bad.json", "segment"])), 1);
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = gk(dir.path(), &["train", "--dataset", "nowhere"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
    assert_eq!(code(&gk(dir.path(), &["run", "--trace", "missing.jsonl"])), 2);
    std::fs::write(dir.path().join("t.jsonl"), "{\"frame\": 0}\nnot json\n").unwrap();
    let o = gk(dir.path(), &["run", "--trace", "t.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(gk(d, &["synth", "--classes", "3", "--per-class", "20", "--names", "a,b,c"]).status.success());
    assert!(d.join("dataset/manifest.csv").is_file());
    let o = gk(d, &["train", "--epochs", "3", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("weights.gkw").is_file() && d.join("o/history.csv").is_file());
    let o = gk(d, &["eval", "--split", "all", "--out", "o"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("accuracy") && text.contains("truth"), "{text}");
    assert!(d.join("o/metrics.csv").is_file());
}

#[test]
fn segment_then_track_from_regions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = gk(d, &["segment", "--set", "video.frames=30", "--out", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("30/30"));
    let o = gk(d, &["track", "--regions", "s/regions.jsonl", "--out", "t"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = std::fs::read_to_string(d.join("t/cursor.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

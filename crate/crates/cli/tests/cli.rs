use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disinfo-grid")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn diffuse_writes_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "--seed", "42", "--out", "res", "diffuse"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["traces_without_link_sf0.2.csv", "mean_traces.csv", "peak_rates.csv"] {
        assert!(dir.path().join("res").join(f).is_file(), "missing {f}");
    }
    let peaks = fs::read_to_string(dir.path().join("res/peak_rates.csv")).unwrap();
    // 2 models x 2 k x 3 step durations
    assert_eq!(peaks.lines().count(), 1 + 12);

    let again = tempfile::tempdir().unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "--seed", "42", "--out", "res", "--threads", "2", "diffuse"], again.path());
    assert!(o.status.success());
    assert_eq!(peaks, fs::read_to_string(again.path().join("res/peak_rates.csv")).unwrap());
}

#[test]
fn missing_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--config", "no_such.toml", "sweep"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such.toml"), "{}", stderr(&o));
}

#[test]
fn invalid_config_value_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[grid]\nn_trials = 0\n").unwrap();
    let o = run(&["--config", "bad.toml", "sweep"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n_trials"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn export_lines_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.toml");
    let cfg = cfg.to_str().unwrap();
    let o = run(&["--config", cfg, "--out", "res", "sweep"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        &["--config", cfg, "--out", "res", "export-lines", "--follow-rate", "0.5", "--ev-rate", "0.2", "--trial", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let got = fs::read_to_string(dir.path().join("res/line_status.csv")).unwrap();
    let want = fs::read_to_string(fixture("line_status.csv")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn shipped_example_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "gen-city"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("city.json").is_file());
}

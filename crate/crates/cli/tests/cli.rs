//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_afc-dlcz"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("failed to start afc-dlcz")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("terminated by signal")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Column `name` of a CSV written by the tool, skipping `#` header lines.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = cols.iter().position(|c| *c == name).unwrap_or_else(|| panic!("no column {name} in {cols:?}"));
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

#[test]
fn predict_puts_the_highest_bin_at_tau_mc() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let stdout = ok(&["predict", "--config", s(&config("paper-defaults.toml")), "--out", s(&out)]);
    assert!(stdout.contains("highest bin centre: 9.000 µs"), "{stdout}");
    assert!(stdout.contains("17.3000"), "{stdout}");
    let centers = column(&out.join("histogram.csv"), "center_us");
    let expected = column(&out.join("histogram.csv"), "expected");
    let best = (0..expected.len()).max_by(|&a, &b| expected[a].total_cmp(&expected[b])).unwrap();
    assert_eq!(centers[best], 9.0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn predict_chsh_at_unit_visibility_reaches_tsirelson() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let stdout = ok(&["predict", "--config", s(&config("paper-analyzers.toml")), "--out", s(&out), "--chsh", "--visibility", "1"]);
    assert!(stdout.contains("S = 2.8284"), "{stdout}");
    let e = column(&out.join("chsh.csv"), "e");
    let total = e[0] + e[1] - e[2] + e[3];
    assert!((total - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn predict_fringe_table_spans_one_period() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    ok(&["predict", "--config", s(&config("paper-fringe.toml")), "--out", s(&out), "--fringe", "--phi-s", "90", "--points", "12"]);
    let expected = column(&out.join("fringe.csv"), "expected");
    assert_eq!(expected.len(), 12);
    let (lo, hi) = expected.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(((hi - lo) / (hi + lo) - 0.701).abs() < 0.01);
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("paper-analyzers.toml");
    let tags = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["simulate", "--config", s(&cfg), "--out", s(&out), "--trials", "300000", "--seed", seed]);
        fs::read(out.join("tags.bin")).unwrap()
    };
    let a = tags("a", "11");
    let b = tags("b", "11");
    let c = tags("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn phase_settings_get_independent_default_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("paper-analyzers.toml");
    let seed = |name: &str, phases: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&out), "--trials", "10"];
        args.extend_from_slice(phases);
        ok(&args);
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        manifest["seed"].as_u64().unwrap()
    };
    let plain = seed("plain", &[]);
    let a = seed("a", &["--phi-s", "0", "--phi-as", "45"]);
    let b = seed("b", &["--phi-s", "0", "--phi-as", "225"]);
    let a_again = seed("a2", &["--phi-s", "360", "--phi-as", "45"]);
    assert_eq!(plain, 20190101);
    assert_ne!(a, plain);
    assert_ne!(a, b);
    assert_eq!(a, a_again);
}

#[test]
fn zero_trials_write_a_header_only_stream() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    ok(&["simulate", "--config", s(&config("paper-defaults.toml")), "--out", s(&out), "--trials", "0", "--format", "text"]);
    let text = fs::read_to_string(out.join("tags.txt")).unwrap();
    assert!(text.lines().all(|l| l.starts_with('#')), "{text}");
    assert!(text.contains("# count=0"));
}

#[test]
fn analyze_g2_separates_real_and_shuffled_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    ok(&["simulate", "--config", s(&config("paper-defaults.toml")), "--out", s(&run_dir), "--trials", "10000000", "--seed", "3"]);
    let g2 = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["analyze", "--run", s(&run_dir), "--mode", "g2", "--out", s(&out), "--search", "0"];
        args.extend_from_slice(extra);
        ok(&args);
        let g = column(&out.join("g2.csv"), "g2")[0];
        let sigma = column(&out.join("g2.csv"), "sigma")[0];
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        let stats = &manifest["statistics"];
        assert_eq!(stats["results"]["g2"].as_f64(), Some(g));
        assert_eq!(stats["inputs"][0]["n_conditional"].as_u64(), Some(10_000_000));
        (g, sigma)
    };
    let (real, real_sigma) = g2("real", &[]);
    let (shuffled, shuffled_sigma) = g2("shuffled", &["--shuffle-seed", "9"]);
    assert!((real - 17.3).abs() < 4.0 * real_sigma, "g2 = {real} ± {real_sigma}");
    assert!((shuffled - 1.0).abs() < 4.0 * shuffled_sigma, "shuffled g2 = {shuffled} ± {shuffled_sigma}");
}

#[test]
fn calibrated_config_reproduces_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal");
    ok(&["calibrate", "--config", s(&config("paper-defaults.toml")), "--out", s(&cal), "--g2", "12.5"]);
    let stdout = ok(&["predict", "--config", s(&cal.join("calibrated.toml")), "--out", s(&dir.path().join("p"))]);
    assert!(stdout.contains("(600 ns window): 12.5000"), "{stdout}");
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = s(&out);

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(config("paper-defaults.toml")).unwrap();
    fs::write(&bad, text.replace("readout_efficiency = 0.026", "readout_efficiency = 1.5")).unwrap();
    assert_eq!(code(&["predict", "--config", s(&bad), "--out", out]), 2);

    let analyzers = config("paper-analyzers.toml");
    assert_eq!(code(&["calibrate", "--config", s(&analyzers), "--out", out, "--visibility", "1.2"]), 3);

    assert_eq!(code(&["predict", "--config", s(&dir.path().join("missing.toml")), "--out", out]), 4);

    let run_dir = dir.path().join("run");
    ok(&["simulate", "--config", s(&config("paper-defaults.toml")), "--out", s(&run_dir), "--trials", "1000"]);
    fs::write(run_dir.join("tags.bin"), b"not a tag file").unwrap();
    assert_eq!(code(&["analyze", "--run", s(&run_dir), "--mode", "g2", "--out", out]), 4);
}

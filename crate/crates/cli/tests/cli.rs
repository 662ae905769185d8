use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn afrelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afrelay")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--set", "trials=3", "--set", "symbols=200", "--set", "snr1_db=0,20"];

fn run_in(dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    afrelay(&args)
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn selftest_passes() {
    let o = afrelay(&["selftest"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAILED"));
}

#[test]
fn small_sweep_writes_results_traces_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run_in(&out, "downlink-sweep", SMALL);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(text.starts_with("algorithm,snr1_db,snr2_db,mean_mse_analytic,mean_mse_empirical,mean_ser,mean_iters,trials_ok,trials_flagged\n"));
    let rows = rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 2 * 6);
    assert!(rows.iter().all(|r| r[7] == "3" && r[8] == "0"));
    assert!(out.join("trace_alg1_1.csv").exists());
    assert!(!out.join("trace_direct_af_1.csv").exists());
    let cfg = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(cfg.contains("trials = 3"));
    assert!(cfg.contains("direction = downlink"));
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let with_jobs = |n| [SMALL, &["--jobs", n]].concat();
    assert!(run_in(&a, "uplink-sweep", &with_jobs("1")).status.success());
    let o = run_in(&b, "uplink-sweep", &with_jobs("3"));
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "trace_alg2_1.csv", "config.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_changes_results_and_trace_name() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["--set", "trials=2", "--set", "symbols=100", "--set", "algorithms=direct_af"];
    assert!(run_in(&a, "downlink-sweep", &args).status.success());
    let mut seeded = args.to_vec();
    seeded.extend(["--seed", "9"]);
    assert!(run_in(&b, "downlink-sweep", &seeded).status.success());
    assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
    assert!(fs::read_to_string(b.join("config.txt")).unwrap().contains("seed = 9"));
}

#[test]
fn convergence_trace_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "convergence", &["--set", "trials=3", "--set", "symbols=100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for alg in ["alg1", "alg1_separate"] {
        let trace: Vec<f64> = rows(&dir.path().join(format!("trace_{alg}_1.csv"))).iter().map(|r| r[1].parse().unwrap()).collect();
        assert!(trace.len() > 1);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{alg}: {trace:?}");
    }
    let rows = rows(&dir.path().join("results.csv"));
    assert!(rows.iter().all(|r| r[1] == "2.0000000000000000e1" && r[2] == "2.0000000000000000e1"));
}

#[test]
fn compare_baselines_includes_every_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "compare-baselines", &["--set", "direction=uplink", "--set", "trials=2", "--set", "symbols=100", "--set", "snr2_db=10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let algs: Vec<String> = rows(&dir.path().join("results.csv")).into_iter().map(|r| r[0].clone()).collect();
    for name in ["alg2", "direct_af", "per_hop_equalization", "separate_lmmse", "no_source_precoder"] {
        assert!(algs.iter().any(|a| a == name), "{name} missing from {algs:?}");
    }
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "[system]\nusers = 1\nn_mobile = 2\nstreams = 2\n[experiment]\ntrials = 2\nsymbols = 50\nalgorithms = direct_af\n[sweep]\nsnr1_db = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = run_in(&out, "downlink-sweep", &["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = rows(&out.join("results.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "direct_af");
}

#[test]
fn invalid_config_reports_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[system]\nn_base = 4\nn_relay = zero\n").unwrap();
    let o = run_in(&dir.path().join("out"), "downlink-sweep", &["--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn zero_relay_antennas_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "downlink-sweep", &["--set", "n_relay=0"]);
    assert!(!o.status.success());
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn unknown_override_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "uplink-sweep", &["--set", "trails=3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));
}

#[test]
fn direction_mismatch_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "downlink-sweep", &["--set", "direction=uplink"]);
    assert!(!o.status.success());
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run_in(&blocker.join("sub"), "downlink-sweep", &["--set", "trials=1", "--set", "symbols=10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}

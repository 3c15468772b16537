use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jointsparse"));
    cmd.args(args);
    if let Some(path) = config {
        cmd.arg("--config").arg(path);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sweep_writes_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n=32\nk=2\nl=4\nm=8,10\ntrials=5\n");
    let out = run(&["sweep-m", "--seed", "3"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "sweep_var,algorithm,p_d,p_d_stderr,fraction,mean_iters,iters_min,iters_max,local_scalars,global_scalars,trials,failed_trials,seed"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 4);
}

#[test]
fn json_format_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n=32\nk=2\nl=4\nm=8\nn0=2\ntrials=4\n");
    let target = dir.path().join("rows.json");
    let out = run(
        &["sweep-neighborhood", "--format", "json", "--trials", "2", "--out", target.to_str().unwrap()],
        Some(&cfg),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["trials"], 2);
}

#[test]
fn bounds_emits_labeled_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n=6\nk=1\nl=2\nm=3\n");
    let out = run(&["bounds"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["fano_pe_lower"]["formula"].as_str().unwrap().starts_with("fano"));
    assert!(report["xi_mac"]["value"]["exact"].as_bool().unwrap());
}

#[test]
fn oracle_check_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n=8\nk=2\nl=3\nm=6\nsigma2=0\ntrials=10\n");
    let out = run(&["oracle-check"], Some(&cfg));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["trials"], 10);
    assert_eq!(report["dcomp2_matches"], 10);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n=32\nk=0\n");
    let out = run(&["sweep-m"], Some(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("`k`"), "{err}");

    let out = run(&["sweep-m"], Some(&dir.path().join("missing.cfg")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // Zero noise leaves the component SNR undefined.
    let cfg = write_config(dir.path(), "n=6\nk=1\nl=2\nm=3\nsigma2=0\n");
    let out = run(&["bounds"], Some(&cfg));
    assert_eq!(out.status.code(), Some(2));
}

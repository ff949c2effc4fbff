use std::path::Path;
use std::process::{Command, Output};

fn recur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recur")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(code(&recur(&["bohr", "enumerate", "--sqrt-primes", "1", "--eta", "-0.1", "--window", "0:5"])), 2);
    assert_eq!(code(&recur(&["bohr", "enumerate", "--eta", "0.1", "--window", "0:5"])), 2);
    assert_eq!(code(&recur(&["bohr", "enumerate", "--sqrt-primes", "1", "--eta", "0.1", "--window", "5:0"])), 2);
    assert_eq!(code(&recur(&["no-such-command"])), 2);
}

#[test]
fn caps_exit_four() {
    let out = recur(&["kleitman", "verify", "--k", "2", "--d", "5", "--delta", "1/2", "--r", "1"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn stdout_carries_the_artifact_without_out() {
    let out = recur(&["bohr", "enumerate", "--sqrt-primes", "1", "--eta", "0.1", "--window", "-20:20"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,norm_1,member\n"));
    assert_eq!(text.lines().count(), 42);
    assert!(String::from_utf8_lossy(&out.stderr).contains("runtime"));
}

#[test]
fn verify_round_trip_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bh", "enumerate", "--sqrt-primes", "2", "--eps", "0.2", "--eta", "0.5", "--window", "-300:300"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path(dir.path())]);
    assert_eq!(code(&recur(&with_out)), 0);
    let csv = dir.path().join("bh.csv");

    let check = dir.path().join("check");
    let mut verify = args.to_vec();
    verify.extend(["--verify", path(&csv), "--out", path(&check)]);
    assert_eq!(code(&recur(&verify)), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(check.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["rows"], 601);
    assert_eq!(report["mismatches"].as_array().unwrap().len(), 0);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let row = lines.iter_mut().skip(1).find(|l| l.ends_with(",1")).expect("a member");
    row.replace_range(row.len() - 1.., "0");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    assert_eq!(code(&recur(&verify)), 3);
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "bohr enumerate", "sqrt_primes": 1, "eta": "0.1", "window": "0:10"}"#).unwrap();
    let base = recur(&["--config", path(&cfg)]);
    assert_eq!(code(&base), 0);
    assert_eq!(String::from_utf8_lossy(&base.stdout).lines().count(), 12);

    let wider = recur(&["--config", path(&cfg), "bohr", "enumerate", "--window", "0:20"]);
    assert_eq!(code(&wider), 0);
    assert_eq!(String::from_utf8_lossy(&wider.stdout).lines().count(), 22);
}

#[test]
fn not_found_is_an_artifact() {
    let out = recur(&["kronecker", "solve", "--sqrt-primes", "2", "--target", "0.5,0.5", "--eps", "0.000001", "--bound", "10"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "not_found");
}

#[test]
fn ks_profile_reads_a_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    let build = recur(&[
        "ks", "build", "--set", r#"{"kind":"all"}"#, "--stages", "2", "--window", "-2000:2000", "--out", path(dir.path()),
    ]);
    assert_eq!(code(&build), 0, "{}", String::from_utf8_lossy(&build.stderr));
    for f in ["stages.json", "measure.csv", "profile.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = dir.path().join("stages.json");
    let out = recur(&["ks", "profile", "--report", path(&report), "--m", "0"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("s,m,value,bound,within,kind,chain,stage"));
}

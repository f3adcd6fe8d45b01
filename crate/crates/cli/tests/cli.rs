use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gsdet"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("spawn gsdet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn solve_golden_outputs() {
    let o = run(&[&"solve", &fixture("g_cyl.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "winner: 0; ε -> 0");

    let o = run(&[&"solve", &fixture("g_match.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("winner: 1"));

    let o = run(&[&"solve", &fixture("g_borel.json"), &"--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["winner"], 1);
    assert!(v["method"].as_str().unwrap().starts_with("unraveled"));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(run(&[&"solve", &fixture("unpruned.json")]).status.code(), Some(2));
    assert_eq!(run(&[&"solve", &fixture("missing.json")]).status.code(), Some(2));
    assert_eq!(run(&[&"frobnicate"]).status.code(), Some(2));
    let o = run(&[&"unravel", &fixture("g_cyl.json"), &"--out", &std::env::temp_dir()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_strategy_verdicts() {
    let ok = run(&[&"verify-strategy", &fixture("g_cyl.json"), &fixture("cyl_zero.txt")]);
    assert_eq!(ok.status.code(), Some(0));
    let bad = run(&[&"verify-strategy", &fixture("g_cyl.json"), &fixture("cyl_wrong.txt")]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn unravel_then_verify_covering() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[&"unravel", &fixture("g_closed.json"), &"--out", &dir.path()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["base.json", "unraveled.json", "covering.json"] {
        assert!(dir.path().join(f).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("covering.json")).unwrap()).unwrap();
    assert_eq!(summary["clopen"], true);
    assert_eq!(summary["pruned"], true);
    assert_eq!(run(&[&"verify-covering", &dir.path()]).status.code(), Some(0));

    // Flip the accepted leaves: the stored payoff is no longer a preimage.
    let path = dir.path().join("unraveled.json");
    let mut file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let leaves = file["leaves"].as_array().unwrap().clone();
    let accept = file["accept"].as_array().unwrap().clone();
    file["accept"] = leaves.into_iter().filter(|l| !accept.contains(l)).collect();
    fs::write(&path, file.to_string()).unwrap();
    assert_eq!(run(&[&"verify-covering", &dir.path()]).status.code(), Some(1));
}

#[test]
fn stored_fixtures() {
    assert_eq!(run(&[&"verify-covering", &fixture("covering_ok")]).status.code(), Some(0));
    assert_eq!(run(&[&"verify-covering", &fixture("covering_mutated")]).status.code(), Some(1));
}

fn write_game(dir: &Path, name: &str, body: &serde_json::Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body.to_string()).unwrap();
    p
}

fn winner(o: &Output) -> u64 {
    let v: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
    v["winner"].as_u64().unwrap()
}

#[test]
fn closed_and_expanded_clopen_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let all = ["0", "1", "00", "01", "10", "11", "000", "011", "101", "110"];
    for i in 0..12 {
        let gens: Vec<&str> = all.iter().copied().filter(|_| rng.gen_bool(0.25)).collect();
        let closed = serde_json::json!({"alphabet": 2, "horizon": 3, "tree": "full", "payoff": {"closed": gens}});
        let leaves: Vec<String> = (0..8)
            .map(|b| format!("{:03b}", b))
            .filter(|l| !gens.iter().any(|g| l.starts_with(g)))
            .collect();
        let clopen = serde_json::json!({"alphabet": 2, "horizon": 3, "tree": "full", "payoff": {"clopen": leaves}});
        let a = run(&[&"solve", &write_game(dir.path(), &format!("c{i}.json"), &closed), &"--json"]);
        let b = run(&[&"solve", &write_game(dir.path(), &format!("o{i}.json"), &clopen), &"--json"]);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(b.status.code(), Some(0));
        assert_eq!(winner(&a), winner(&b), "{gens:?}");
    }
}

#[test]
fn selftest_small() {
    let o = run(&[&"selftest", &"--max-alphabet", &"2", &"--max-horizon", &"2", &"--seed", &"3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.ends_with("ok") || l.contains("ok,")));
}

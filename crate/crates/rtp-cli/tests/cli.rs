use assert_cmd::Command;
use predicates::prelude::*;

fn rtp() -> Command {
    Command::cargo_bin("rtp").unwrap()
}

#[test]
fn simulate_smoke_and_determinism() {
    let args = [
        "simulate", "--kind", "citp", "--omega", "1", "--ell", "1", "--horizon", "100",
        "--seed", "7",
    ];
    let first = rtp().args(args).assert().success();
    let out1 = first.get_output().stdout.clone();
    assert!(out1.starts_with(b"t,x,slope,s1,s2\n"));
    assert!(out1.len() > 100);
    let second = rtp().args(args).assert().success();
    assert_eq!(out1, second.get_output().stdout, "same seed, same bytes");
    let other = rtp()
        .args(["simulate", "--kind", "citp", "--omega", "1", "--seed", "8", "--horizon", "100"])
        .assert()
        .success();
    assert_ne!(out1, other.get_output().stdout);
}

#[test]
fn missing_seed_is_a_config_error() {
    rtp()
        .args(["simulate", "--kind", "citp", "--omega", "1"])
        .assert()
        .code(2);
}

#[test]
fn wrong_rates_for_kind_exit_2() {
    rtp()
        .args(["simulate", "--kind", "cftp", "--omega", "1", "--seed", "1"])
        .assert()
        .code(2);
    rtp()
        .args(["simulate", "--kind", "citp", "--omega", "-1", "--seed", "1"])
        .assert()
        .code(2);
}

#[test]
fn worker_count_does_not_change_output() {
    let run = |workers: &str| {
        rtp()
            .env("RTP_WORKERS", workers)
            .args([
                "converge", "--kind", "citp", "--omega", "1", "--l-list", "8,32",
                "--replicas", "32", "--seed", "3",
            ])
            .assert()
            .success()
            .get_output()
            .stdout
            .clone()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn invariant_emits_known_atom_masses() {
    let assert = rtp()
        .args(["invariant", "--kind", "citp", "--omega", "1", "--ell", "1"])
        .assert()
        .success();
    let v: serde_json::Value = serde_json::from_slice(&assert.get_output().stdout).unwrap();
    assert!((v["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    // each boundary atom carries total mass 1/(2 + w ell), twice as much
    // of it on the opposing pair as on each aligned pair
    let rows = v["rows"].as_array().unwrap();
    let atom0: f64 = rows.iter().map(|r| r["atom0"].as_f64().unwrap()).sum();
    assert!((atom0 - 1.0 / 3.0).abs() < 1e-12);
    let jam = rows
        .iter()
        .find(|r| r["s1"] == 1 && r["s2"] == -1)
        .unwrap();
    assert!((jam["atom0"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(jam["atoml"].as_f64().unwrap(), 0.0);
}

#[test]
fn lattice_invariant_csv_has_small_residual() {
    let assert = rtp()
        .args(["invariant", "--kind", "ditp", "--omega", "1", "--l", "50"])
        .assert()
        .success();
    let out = String::from_utf8(assert.get_output().stdout.clone()).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "y,s1,s2,prob,residual");
    let mut total = 0.0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        total += f[3].parse::<f64>().unwrap();
        assert!(f[4].parse::<f64>().unwrap() <= 1e-12);
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn hitting_table_is_deterministic_and_calibrated() {
    let args = ["hitting", "--replicas", "2000", "--seed", "11"];
    let a1 = rtp().args(args).assert().success();
    let out = String::from_utf8(a1.get_output().stdout.clone()).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert!(!rows.is_empty());
    let calibrated = rows
        .iter()
        .filter(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap().abs() <= 3.0)
        .count();
    assert!(
        calibrated * 100 >= rows.len() * 95,
        "{calibrated}/{} rows within 3 sigma",
        rows.len()
    );
    let a2 = rtp().args(args).assert().success();
    assert_eq!(a1.get_output().stdout, a2.get_output().stdout);
}

#[test]
fn every_run_echoes_a_resolved_config() {
    let assert = rtp()
        .args(["invariant", "--kind", "citp", "--omega", "2"])
        .assert()
        .success();
    let stderr = String::from_utf8(assert.get_output().stderr.clone()).unwrap();
    let cfg: serde_json::Value = serde_json::from_str(stderr.lines().next().unwrap()).unwrap();
    assert_eq!(cfg["command"]["Invariant"]["kind"]["omega"], 2.0);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    rtp()
        .args([
            "simulate", "--kind", "dftp", "--alpha", "1", "--beta", "1", "--l", "20",
            "--horizon", "50", "--seed", "5", "--out",
        ])
        .arg(&path)
        .assert()
        .success()
        .stdout(predicate::str::is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    assert!(body.starts_with("t,y,s1,s2\n"));
}

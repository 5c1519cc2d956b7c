//! End-to-end checks of the `rcs` binary and its exit-code contract:
//! 0 success/pass, 1 checked-condition failure, 2 usage/config, 3 numerical.

use std::path::Path;
use std::process::{Command, Output};

fn rcs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn rcs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const CERTIFIED: &str = "c = 10\nn = 8\nkernel = power_law\nbeta = 2\nt_end = 5\n";

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = rcs(&["simulate", "--config", &cfg, "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["trajectory.csv", "diagnostics.json", "manifest.json"] {
        assert!(dir.path().join("out").join(file).exists(), "{file}");
    }
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["report"]["certificate"]["satisfied"], true);
    assert_eq!(diag["report"]["model"], "rcs");
}

#[test]
fn simulate_determinism_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    for sub in ["a", "b"] {
        std::fs::create_dir(dir.path().join(sub)).unwrap();
        let out = rcs(&["simulate", "--config", &cfg, "--out", sub], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["trajectory.csv", "diagnostics.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn simulate_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "c = -1\nn = 8\nkernel = constant\n");
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = rcs(&["simulate", "--config", &bad, "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    let out = rcs(&["simulate", "--config", &cfg, "--out", "missing_dir"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = rcs(&["simulate", "--config", "absent.cfg", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flock_cert_exit_codes_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.cfg", CERTIFIED);
    let out = rcs(&["flock-cert", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["satisfied"], true);
    assert!(v["report"]["lambda"].as_f64().unwrap() > 0.0);

    // wide momentum spread defeats the certificate
    let hostile = write(
        dir.path(),
        "hostile.cfg",
        "c = 10\nn = 8\nkernel = power_law\nbeta = 2\ninit.w_halfwidth = 4\n",
    );
    let out = rcs(&["flock-cert", "--config", &hostile], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let out = rcs(&["flock-cert", "--config", "absent.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn climit_scan_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    let out = rcs(
        &["climit", "--config", &cfg, "--c-list", "10,20,40,80", "--out", "scan.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    let slope = v["report"]["slope"].as_f64().unwrap();
    assert!((-4.4..=-3.6).contains(&slope));
    assert_eq!(
        v["report"]["c_values"].as_array().unwrap().len(),
        v["report"]["sup_delta"].as_array().unwrap().len()
    );

    let out = rcs(&["climit", "--config", &cfg, "--c-list", "10,20"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // cs-vs-cs comparison is identically zero; slope undefined
    let cs = write(dir.path(), "cs.cfg", &format!("{CERTIFIED}model = cs\n"));
    let out = rcs(&["climit", "--config", &cs, "--c-list", "10,20,40"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined"));
}

#[test]
fn meanfield_scan_flag_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    let out = rcs(&["meanfield-scan", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = rcs(
        &["meanfield-scan", "--config", &cfg, "--c-list", "10,20", "--n-list", "8,16"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    let out = rcs(
        &["meanfield-scan", "--config", &cfg, "--c-list", "10,20,40,80"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["coupling_bound_ok"], true);

    let out = rcs(
        &["meanfield-scan", "--config", &cfg, "--n-list", "8,16,32"],
        dir.path(),
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["report"]["decreasing_trend"].is_boolean());
}

#[test]
fn constants_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    let out = rcs(&["constants", "--config", &cfg, "--W", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = rcs_lab::relativity::ModelParams::uniform(
        10.0,
        1.0,
        1.0,
        1.0,
        3.0,
        8,
        rcs_lab::relativity::KernelSpec::PowerLaw { beta: 2.0 },
    );
    let f0 = p.f_of_gamma(1.0, 0).unwrap();
    assert_eq!(v["report"]["F"].as_f64().unwrap(), f0);
    assert_eq!(v["report"]["lambda0"].as_f64().unwrap(), p.lambda0(0.0, 0).unwrap());
    assert!((v["report"]["lambda0"].as_f64().unwrap() - 1.0 / f0).abs() < 1e-14);

    // large c brings the coercivity constant to 1
    let big = write(dir.path(), "big.cfg", "c = 1e6\nn = 8\nkernel = constant\n");
    let out = rcs(&["constants", "--config", &big, "--W", "7"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["report"]["lambda0"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let out = rcs(&["constants", "--config", &cfg, "--W", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wasserstein_between_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    std::fs::create_dir(dir.path().join("r")).unwrap();
    std::fs::create_dir(dir.path().join("c")).unwrap();
    assert_eq!(
        rcs(&["simulate", "--config", &cfg, "--out", "r"], dir.path()).status.code(),
        Some(0)
    );
    assert_eq!(
        rcs(
            &["simulate", "--config", &cfg, "--model", "cs", "--out", "c"],
            dir.path()
        )
        .status
        .code(),
        Some(0)
    );
    let out = rcs(
        &["wasserstein", "--a", "r/trajectory.csv", "--b", "c/trajectory.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w1 = v["report"]["w1"].as_array().unwrap();
    assert_eq!(w1[0].as_f64().unwrap(), 0.0); // identical initial clouds
    assert!(v["report"]["sup_w1"].as_f64().unwrap() > 0.0);

    let out = rcs(
        &["wasserstein", "--a", "r/trajectory.csv", "--b", "absent.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", CERTIFIED);
    let a = rcs(&["flock-cert", "--config", &cfg, "--seed", "1"], dir.path());
    let b = rcs(&["flock-cert", "--config", &cfg, "--seed", "2"], dir.path());
    let a2 = rcs(&["flock-cert", "--config", &cfg, "--seed", "1"], dir.path());
    assert_eq!(a.stdout, a2.stdout);
    assert_ne!(a.stdout, b.stdout);
}

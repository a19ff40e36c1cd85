use std::process::{Command, Output};

fn ftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftlab")).args(args).env_remove("FTLAB_SEED").env_remove("FTLAB_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    format!("{}/../core/configs/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn lists_bundled_configs() {
    let o = ftlab(&["configs"]);
    assert!(o.status.success());
    let names = stdout(&o);
    for n in ["single-classical", "double-quantum-kdt1", "double-classical-kdt0.2", "driven-monitored"] {
        assert!(names.lines().any(|l| l == n), "{n} missing");
    }
}

#[test]
fn discrete_sweep_is_identical_across_thread_counts() {
    let run = |threads: &str| {
        let o = ftlab(&["run-discrete", "--config", "double-quantum-kdt1", "--sweep", "epsilon=0.1,0.3", "--n-traj", "400", "--seed", "7", "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one, run("1"));
    let text = String::from_utf8(one).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("epsilon,source,n,sigma,sigma_se,sigma_cg,sigma_cg_se,i_te,i_te_se,beta_work"));
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}

#[test]
fn continuous_sweep_is_identical_across_thread_counts() {
    let run = |threads: &str| {
        let o = ftlab(&["run-continuous", "--config", "driven-monitored", "--sweep", "kappa_m=1,5", "--n-traj", "60", "--seed", "3", "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let a = run("1");
    assert_eq!(a, run("2"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn seed_can_come_from_the_environment() {
    let args = ["simulate", "--config", "single-classical", "--n-traj", "20"];
    let explicit = ftlab(&[&args[..], &["--seed", "11"]].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_ftlab")).args(args).env("FTLAB_SEED", "11").output().unwrap();
    assert_eq!(explicit.stdout, env.stdout);
    assert_ne!(explicit.stdout, ftlab(&[&args[..], &["--seed", "12"]].concat()).stdout);
    for line in stdout(&explicit).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("ln_probability").is_some());
    }
}

#[test]
fn config_errors_exit_with_2() {
    for args in [
        vec!["run-discrete", "--config", "no-such-config"],
        vec!["run-discrete", "--config", "single-classical", "--sweep", "epsilon"],
        vec!["run-discrete", "--config", "single-classical", "--set", "undeclared=1"],
        vec!["run-discrete", "--config", "driven-monitored"],
        vec!["run-discrete", "--config", "single-classical", "--sweep", "epsilon=1.5", "--n-traj", "10"],
    ] {
        let o = ftlab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: config error"));
    }
}

#[test]
fn corrupted_povm_fails_verification() {
    let o = ftlab(&["verify", "--config", &fixture("corrupted-povm.json"), "--no-dilated"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL povm-completeness")));
    // the strict loader used by the runners refuses the same file
    let o = ftlab(&["run-discrete", "--config", &fixture("corrupted-povm.json"), "--sweep", "epsilon=0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_dilated_residual() {
    let o = ftlab(&["verify", "--config", "single-quantum", "--n-traj", "200", "--dilated-seeds", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("PASS dilated-random")));
    assert!(!out.contains("FAIL"));
}

#[test]
fn statistical_failures_exit_with_4() {
    let o = ftlab(&["run-continuous", "--config", "driven-monitored", "--sweep", "kappa_m=5", "--n-traj", "100", "--z-limit", "1e-6"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tables_have_the_expected_rows() {
    for (table, rows) in [("classical", 8), ("quantum", 16), ("two", 96)] {
        let o = ftlab(&["verify-tables", "--table", table, "--epsilon", "0.25"]);
        assert!(o.status.success());
        let mut r = csv::Reader::from_reader(o.stdout.as_slice());
        let recs: Vec<_> = r.records().map(Result::unwrap).collect();
        assert_eq!(recs.len(), rows);
        let col = r.headers().unwrap().iter().position(|h| h == "probability").unwrap();
        let total: f64 = recs.iter().map(|x| x[col].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12, "{table}: {total}");
    }
}

#[test]
fn postselection_matches_backward_probabilities() {
    let o = ftlab(&["postselect", "--config", "single-quantum", "--n-traj", "3000", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
}

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use afc_core::broker::Client;
use tempfile::TempDir;

fn afc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(args)
        .env("AFC_LOG", "error")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

const TINY: &str = "\
[sim]
lx = 16
ly = 8
center = 4, 4
h = 0.1
n_pe = 2
[train]
n_episodes = 2
actions_per_episode = 8
hidden = 16
baseline_transient = 40
baseline_periods = 8
eval_onset = 2
eval_duration = 60
eval_periods = 8
[ppo]
minibatch = 8
epochs = 2
";

fn write_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("run.ini");
    std::fs::write(&p, format!("{TINY}{extra}")).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_config_is_a_config_error_naming_the_path() {
    let o = afc(&["--config", "/nonexistent/afc.ini", "baseline"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/afc.ini"), "{}", stderr(&o));
}

#[test]
fn dry_run_prints_the_resolved_config() {
    let o = afc(&["--seed", "17", "--broker-addr", "10.0.0.1:7000", "train", "--dry-run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for s in ["[train]", "seed = 17", "addr = 10.0.0.1:7000", "n_episodes = 30", "h = 0.04"] {
        assert!(out.contains(s), "missing {s:?} in\n{out}");
    }
}

#[test]
fn bad_keys_report_the_line() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.ini");
    std::fs::write(&p, "[train]\nseed = 3\nepisodes = 4\n").unwrap();
    let o = afc(&["--config", p.to_str().unwrap(), "train", "--dry-run"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("bad.ini:3:") && e.contains("episodes"), "{e}");

    std::fs::write(&p, "[sim]\nh = -1\n").unwrap();
    let o = afc(&["--config", p.to_str().unwrap(), "baseline", "--dry-run"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn evaluate_without_a_model_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = afc(&["--out", out, "evaluate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("policy.afcp"), "{}", stderr(&o));
    let o = afc(&["--out", out, "--model", "/nope/m.afcp", "evaluate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nope/m.afcp"));
}

#[test]
fn export_without_results_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = afc(&["--out", dir.path().to_str().unwrap(), "export"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn solver_failure_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[sim]\npoisson_tol = 1e-15\npoisson_max_iter = 1\n");
    let o = afc(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "baseline"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn broker_subcommand_serves_and_bind_failure_is_connectivity() {
    let port = free_port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(["--broker-addr", &addr, "broker"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    assert!(line.contains(&addr), "{line}");
    let mut c = Client::connect(addr.as_str()).unwrap();
    c.put_f64("k", &[1.0, 2.0]).unwrap();
    assert_eq!(c.get_f64("k", Duration::from_secs(1)).unwrap(), [1.0, 2.0]);
    let o = afc(&["--broker-addr", &addr, "broker"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    child.kill().unwrap();
    child.wait().unwrap();
}

/// baseline -> train (worker processes, embedded broker) -> evaluate -> export,
/// then training against a broker that is not there.
#[test]
fn full_pipeline_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let addr = format!("127.0.0.1:{}", free_port());
    let run = |args: &[&str]| {
        let mut a = vec!["--config", cfg.as_str(), "--out", out_s, "--broker-addr", addr.as_str()];
        a.extend_from_slice(args);
        afc(&a)
    };

    let o = run(&["baseline"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("St ="), "{}", stdout(&o));
    let stats = std::fs::read_to_string(out.join("baseline/baseline_stats.csv")).unwrap();
    assert!(stats.starts_with("mean_Cl,sigma_Cl,St,mean_Cd,Cd_press,Cd_visc\n"), "{stats}");

    let o = run(&["--embedded-broker", "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("trained 2 episodes"), "{}", stdout(&o));
    assert!(out.join("train/policy.afcp").is_file());

    let o = run(&["evaluate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("Cd reduction:"), "{}", stdout(&o));

    let o = run(&["export"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["cl_cd.csv", "reward.csv", "action.csv", "cp.csv", "spectrum.csv"] {
        assert!(out.join("export").join(f).is_file(), "{f}");
    }

    // Nothing listens on this address any more.
    let o = run(&["train"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

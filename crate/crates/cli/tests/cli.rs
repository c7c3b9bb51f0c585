use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
n_grid = [16, 64]
c_n = 4
times = [1.0, 2.0]
replicas = 20
root_seed = 5

[params]
alpha = 1.0
beta = 2.0
gamma = 2.0
kappa = 1.1

[laws.walk.step]
kind = "rademacher"

[laws.scenery]
kind = "symmetric-discrete-pareto"
index = 1.0

[laws.strategy]
kind = "gaussian-integerized"
sd = 1.0

[[theta_vectors]]
thetas = [1.0]
times = [1.0]
"#;

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_doubly-scenery"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn simulate_csv(config: &str, extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate"];
    args.extend_from_slice(extra);
    let out = run(dir.path(), config, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::read_to_string(dir.path().join("out/gn_samples.csv")).unwrap()
}

#[test]
fn simulate_is_deterministic_across_runs_and_threads() {
    let a = simulate_csv(SMALL, &["--threads", "1"]);
    let b = simulate_csv(SMALL, &["--threads", "3"]);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "# doubly-scenery v1");
    assert_eq!(lines[1], "replica,n,t,value");
    assert_eq!(lines.len(), 2 + 2 * 20 * 2);
}

#[test]
fn seed_flag_changes_samples() {
    assert_ne!(simulate_csv(SMALL, &[]), simulate_csv(SMALL, &["--seed", "6"]));
}

#[test]
fn zero_replicas_writes_header_only() {
    let cfg = SMALL.replace("replicas = 20", "replicas = 0");
    let csv = simulate_csv(&cfg, &[]);
    assert_eq!(csv, "# doubly-scenery v1\nreplica,n,t,value\n");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &format!("replicaz = 3\n{SMALL}"), &["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicaz"));
}

#[test]
fn alpha_kappa_at_gamma_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &SMALL.replace("kappa = 1.1", "kappa = 2.0"), &["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out/gn_samples.csv").exists());
}

#[test]
fn reports_embed_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("[params]", "oracle_test = { n_values = [1, 2], replicas = 2000 }\n\n[params]");
    let out = run(dir.path(), &cfg, &["oracle-test", "--seed", "9"]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let text = fs::read_to_string(dir.path().join("out/oracle_report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["config"]["root_seed"], 9);
    assert_eq!(report["cells"].as_array().unwrap().len(), 2 * 2 * 3);
}

//! End-to-end checks of the `got` binary: exit codes, one-line
//! diagnostics, output files and environment-variable worker caps.

use std::path::Path;
use std::process::{Command, Output};

fn got() -> Command {
    Command::new(env!("CARGO_BIN_EXE_got"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn small_experiment(seed_base: u64) -> String {
    format!(
        r#"{{
  "game": {{
    "players": 3, "arms": 3, "horizon": 9000,
    "c1": 300.0, "c2": 1500.0, "c3": 800.0,
    "delta": 0.0, "epsilon": 0.01, "c_exponent": "auto",
    "seed": 7, "mode": "epochs", "reuse_samples": true,
    "reward": {{
      "kind": "iid_gaussian",
      "variance": 0.05,
      "means": [[0.1, 0.05, 0.9], [0.1, 0.25, 0.3], [0.4, 0.2, 0.8]]
    }}
  }},
  "replications": 3,
  "seed_base": {seed_base},
  "outputs": ["regret_curve", "utility_ratio", "occupancy"],
  "downsample_stride": 500
}}"#
    )
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn assign_prints_solution_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("u.txt");
    write(&matrix, "3 3\n0.1 0.05 0.9\n0.1 0.25 0.3\n0.4 0.2 0.8\n");
    let output = got().arg("assign").arg(&matrix).output().unwrap();
    assert_success(&output);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("3 2 1"), "{stdout}");
    assert!(stdout.contains("J1"), "{stdout}");
    assert!(stdout.contains("J2"), "{stdout}");
    assert!(stdout.contains("margin"), "{stdout}");
}

#[test]
fn missing_file_fails_with_one_line_diagnostic() {
    let output = got().arg("assign").arg("/nonexistent/u.txt").output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
}

#[test]
fn malformed_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "{ not json");
    let output = got().arg("run").arg(&cfg).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn run_emits_expected_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(&cfg, &small_experiment(100));
    let out = dir.path().join("out");
    let output = got()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--seed")
        .arg("3")
        .output()
        .unwrap();
    assert_success(&output);
    for name in ["regret_curve.csv", "utility_ratio.csv", "occupancy.csv", "summary.csv"] {
        let path = out.join(name);
        assert!(path.exists(), "missing {name}");
    }
    let regret = std::fs::read_to_string(out.join("regret_curve.csv")).unwrap();
    let mut lines = regret.lines();
    assert_eq!(
        lines.next().unwrap(),
        "turn,epoch,phase,mean_value,stderr,n_seeds"
    );
    assert_eq!(regret.lines().count() - 1, 9000usize.div_ceil(500));
    assert!(!regret.contains('\r'));
}

#[test]
fn batch_output_is_stable_across_thread_caps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(&cfg, &small_experiment(42));
    let mut bytes = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let output = got()
            .arg("batch")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("GOT_THREADS", threads)
            .output()
            .unwrap();
        assert_success(&output);
        bytes.push(
            ["regret_curve.csv", "utility_ratio.csv", "occupancy.csv", "summary.csv"]
                .map(|name| std::fs::read(out.join(name)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn batch_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    write(&cfg, &small_experiment(42));
    let out = dir.path().join("out");
    let output = got()
        .arg("batch")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--replications")
        .arg("2")
        .arg("--stride")
        .arg("4500")
        .output()
        .unwrap();
    assert_success(&output);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3); // header + 2 seeds
    let regret = std::fs::read_to_string(out.join("regret_curve.csv")).unwrap();
    assert_eq!(regret.lines().count(), 3); // header + 9000/4500 rows
}

#[test]
fn analyze_chain_prints_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("chain.cfg");
    write(
        &cfg,
        r#"{ "utilities": [[1.0, 0.5], [0.5, 1.0]], "epsilons": [0.1, 0.03], "c": 1.4 }"#,
    );
    let csv = dir.path().join("report.csv");
    let output = got()
        .arg("analyze-chain")
        .arg(&cfg)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_success(&output);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("epsilon,pi_zstar,mixing_time,threshold"), "{stdout}");
    let report = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn bounds_accepts_inline_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bounds.cfg");
    write(
        &cfg,
        r#"{
  "players": 3, "arms": 3, "c1": 6000.0, "delta": 0.0,
  "sigma_max": 0.2236068, "b_max": 0.2236068,
  "j1": 1.55, "j2": 1.2, "epochs": [1, 2]
}"#,
    );
    let output = got().arg("bounds").arg(&cfg).output().unwrap();
    assert_success(&output);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("k,w,p_ek,p_union"), "{stdout}");
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for name in ["got3x3.cfg", "got5x5.cfg", "markov2x2.cfg"] {
        let text = std::fs::read_to_string(root.join("configs").join(name)).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(parsed.get("game").is_some(), "{name}");
    }
}

//! End-to-end tests of the `rambo` binary: exit codes, emitted files, and
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn rambo(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rambo"));
    cmd.args(args).env_remove("RAMBO_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "objective = \"piecewise_regime_1d\"\n\
         dim = 1\n\
         budget = 8\n\
         init_count = 5\n\
         burn_in = 5\n\
         sweeps = 1\n\
         restarts = 2\n\
         mc_samples = 4\n\
         update_steps = 3\n\
         new_regime_refine_steps = 3\n\
         rff_features = 16\n\
         mes_samples = 3\n",
    )
    .unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn list_prints_registries() {
    let out = rambo(&["list"], &[]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["levy", "schwefel", "piecewise_regime_1d", "ei", "pi", "ucb", "ts", "mes"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn run_with_missing_config_fails_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let missing = dir.path().join("nope.toml");
    let out = rambo(
        &["run", "--config", missing.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert!(!out.status.success());
    assert!(!out_dir.exists(), "no files may be written on config failure");
}

#[test]
fn run_emits_all_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = rambo(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--method",
            "random",
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("random on piecewise_regime_1d"));

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,y,best,alpha,regimes,ms");
    assert_eq!(lines.count(), 8);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["seed"], 11);
    assert_eq!(summary["config"]["objective"], "piecewise_regime_1d");
    assert_eq!(summary["evaluations"], 8);

    let conv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().next().unwrap(), "t,best");
    assert_eq!(conv.lines().count(), 9);
}

#[test]
fn repeated_runs_are_identical_except_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let mut tables = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = rambo(
            &[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "3",
                "--out",
                out_dir.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        let text = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
        let rows: Vec<Vec<String>> = text
            .lines()
            .map(|line| {
                let mut cells: Vec<String> = line.split(',').map(String::from).collect();
                let ms = cells.len() - 1;
                cells[ms] = String::new(); // timing column may differ
                cells
            })
            .collect();
        tables.push(rows);
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn unknown_names_are_usage_errors_listing_alternatives() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let od = out_dir.to_str().unwrap();

    let out = rambo(&["run", "--objective", "rosenbrock", "--out", od], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("levy"), "stderr: {}", stderr(&out));

    let out = rambo(&["run", "--method", "annealing", "--out", od], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("single_gp"));

    let out = rambo(&["run", "--acquisition", "kg", "--out", od], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ucb"));

    assert!(!out_dir.exists());
}

#[test]
fn sweep_writes_seed_directories_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = rambo(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--methods",
            "random",
            "--seeds",
            "2",
            "--seed0",
            "5",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for seed in [5, 6] {
        assert!(out_dir.join("random").join(format!("seed-{seed}")).join("trace.csv").exists());
    }
    let agg = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(lines.next().unwrap(), "method,t,median_best,se_best");
    assert_eq!(lines.count(), 8); // one method × budget rows
}

#[test]
fn bench_compares_all_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("bench");
    let out = rambo(
        &[
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--seeds",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for name in ["rambo", "single_gp", "random"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
    let cmp = std::fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().next().unwrap(), "method,median_best,se_best,seeds");
    assert_eq!(cmp.lines().count(), 4);
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("from-env");
    let out = rambo(
        &["run", "--config", cfg.to_str().unwrap(), "--method", "random"],
        &[("RAMBO_OUT_DIR", out_dir.to_str().unwrap())],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(out_dir.join("trace.csv").exists());
}

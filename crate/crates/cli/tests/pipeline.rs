//! End-to-end runs of the `defer` binary on a small simulated population.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use defer_core::scores::{Marginals, ScoreTable};
use serde_json::Value;
use tempfile::TempDir;

const SCENARIO: &str = "n_train = 3000\nn_val = 2000\nn_test = 2000\nseed = 7\n";

fn defer(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_defer"));
    cmd.args(args).env_remove("DEFER_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Simulates into `<tmp>/sim` and returns the directory.
fn simulate(tmp: &TempDir) -> PathBuf {
    let scenario = tmp.path().join("scenario.toml");
    fs::write(&scenario, SCENARIO).unwrap();
    let sim = tmp.path().join("sim");
    ok(&defer(&["simulate", "--scenario", scenario.to_str().unwrap(), "--out", sim.to_str().unwrap()], &[]));
    sim
}

/// Config ingesting the simulator's truth scores.
fn ingest_config(tmp: &TempDir, name: &str, body: &str) -> PathBuf {
    let text = format!(
        "seed = 1\n{body}\n[data]\npath = \"sim/data.csv\"\n[scores]\nsource = \"ingest\"\n\
         tuning = \"sim/truth_val.csv\"\ntest = \"sim/truth_test.csv\"\nmarginals = \"sim/marginals.toml\"\n"
    );
    let path = tmp.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn solve(cfg: &Path, out: &Path) -> Output {
    defer(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[])
}

#[test]
fn unconstrained_run_reaches_bayes_objective() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&tmp);
    let cfg = ingest_config(&tmp, "free.toml", "unconstrained = true\n");
    let out = tmp.path().join("free");
    ok(&solve(&cfg, &out));
    let policy = json(&out.join("policy.json"));
    assert_eq!(policy["predictor"]["k"], Value::Array(vec![]));

    let marginals = Marginals::from_kv_str(&fs::read_to_string(sim.join("marginals.toml")).unwrap()).unwrap();
    let truth = ScoreTable::read(sim.join("truth_val.csv"), sim.join("marginals.toml"), None).unwrap();
    assert_eq!(truth.marginals, marginals);
    let bayes = (0..truth.len())
        .map(|i| truth.p_y(i).iter().copied().fold(truth.p_agree[i], f64::max))
        .sum::<f64>()
        / truth.len() as f64;
    let objective = json(&out.join("report_tuning.json"))["objective"].as_f64().unwrap();
    assert!((objective - bayes).abs() < 1e-12, "{objective} vs {bayes}");
}

#[test]
fn missing_score_column_is_named() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&tmp);
    let mut reader = csv::Reader::from_path(sim.join("truth_val.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&j| &headers[j] != "p_m1").collect();
    let mut writer = csv::Writer::from_path(sim.join("no_m1.csv")).unwrap();
    writer.write_record(keep.iter().map(|&j| &headers[j])).unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        writer.write_record(keep.iter().map(|&j| &rec[j])).unwrap();
    }
    writer.flush().unwrap();
    let text = fs::read_to_string(ingest_config(&tmp, "dp.toml", "[[constraint]]\nkind = \"dp\"\ndelta = 0.05\n"))
        .unwrap()
        .replace("truth_val.csv", "no_m1.csv");
    let cfg = tmp.path().join("dp_missing.toml");
    fs::write(&cfg, text).unwrap();
    let o = solve(&cfg, &tmp.path().join("dp"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_m1"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn infeasible_budget_exits_with_diagnostic() {
    let tmp = TempDir::new().unwrap();
    simulate(&tmp);
    let cfg = ingest_config(&tmp, "neg.toml", "[[constraint]]\nkind = \"budget\"\ndelta = -0.1\n");
    let out = tmp.path().join("neg");
    let o = solve(&cfg, &out);
    assert_eq!(o.status.code(), Some(defer_cli::EXIT_NOT_FEASIBLE));
    let inf = json(&out.join("infeasible.json"));
    assert_eq!(inf["deltas"][0].as_f64(), Some(-0.1));
    assert!(inf["min_achievable"][0].as_f64().unwrap().abs() < 1e-12);
    assert!(!out.join("policy.json").exists());
}

#[test]
fn sweep_is_reproducible_and_monotone() {
    let tmp = TempDir::new().unwrap();
    simulate(&tmp);
    let cfg = ingest_config(&tmp, "budget.toml", "[[constraint]]\nkind = \"budget\"\ndelta = 0.1\n");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&defer(
            &["sweep", "--config", cfg.to_str().unwrap(), "--deltas", "0,0.05,0.1,0.3,1", "--out", out.to_str().unwrap()],
            &[],
        ));
        fs::read(out.join("frontier.csv")).unwrap()
    };
    let first = run("s1");
    assert_eq!(first, run("s2"));

    let mut reader = csv::Reader::from_reader(first.as_slice());
    let col = reader.headers().unwrap().iter().position(|h| h == "tuning_objective").unwrap();
    let objectives: Vec<f64> = reader.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(objectives.len(), 5);
    assert!(objectives.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{objectives:?}");

    let free = ingest_config(&tmp, "free.toml", "unconstrained = true\n");
    ok(&solve(&free, &tmp.path().join("free")));
    let unconstrained = json(&tmp.path().join("free/report_tuning.json"))["objective"].as_f64().unwrap();
    assert!((objectives[4] - unconstrained).abs() < 1e-12);
}

#[test]
fn oracle_check_passes() {
    let o = defer(&["oracle-check", "--seed", "3"], &[]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    simulate(&tmp);
    let cfg = ingest_config(&tmp, "budget.toml", "[[constraint]]\nkind = \"budget\"\ndelta = 0.2\n");
    let root = tmp.path().join("root");
    ok(&defer(&["solve", "--config", cfg.to_str().unwrap()], &[("DEFER_OUTPUT_ROOT", &root)]));
    assert!(root.join("solve/policy.json").exists());
    assert!(root.join("solve/manifest.json").exists());
}

#[test]
fn evaluate_reproduces_solve_report() {
    let tmp = TempDir::new().unwrap();
    simulate(&tmp);
    let cfg = ingest_config(&tmp, "dp.toml", "[[constraint]]\nkind = \"dp\"\ndelta = 0.05\n");
    let out = tmp.path().join("dp");
    ok(&solve(&cfg, &out));
    let eval = tmp.path().join("eval");
    ok(&defer(
        &[
            "evaluate",
            "--config",
            cfg.to_str().unwrap(),
            "--policy",
            out.join("policy.json").to_str().unwrap(),
            "--out",
            eval.to_str().unwrap(),
        ],
        &[],
    ));
    assert_eq!(json(&eval.join("report_test.json")), json(&out.join("report_test.json")));
}

#[test]
fn fitted_scores_feed_an_ingest_run() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&tmp);
    let scores = tmp.path().join("scores");
    ok(&defer(
        &[
            "fit-scores",
            "--data",
            sim.join("data.csv").to_str().unwrap(),
            "--expert-model",
            "conditional",
            "--out",
            scores.to_str().unwrap(),
        ],
        &[],
    ));
    for f in ["scores_val.csv", "scores_test.csv", "marginals.toml", "model.json", "manifest.json"] {
        assert!(scores.join(f).exists(), "{f}");
    }
    let text = fs::read_to_string(ingest_config(&tmp, "fitted.toml", "[[constraint]]\nkind = \"eopp\"\ndelta = 0.05\n"))
        .unwrap()
        .replace("sim/truth_val.csv", "scores/scores_val.csv")
        .replace("sim/truth_test.csv", "scores/scores_test.csv")
        .replace("sim/marginals.toml", "scores/marginals.toml");
    let cfg = tmp.path().join("fitted_ingest.toml");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("fitted");
    ok(&solve(&cfg, &out));
    let report = json(&out.join("report_tuning.json"));
    assert!(report["embedded_values"][0].as_f64().unwrap().abs() <= 0.05 + 1e-9);
}

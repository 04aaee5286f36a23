//! End-to-end commands: simulate, fit scores, solve, evaluate, sweep and
//! the generalization study.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use defer_core::embeddings::{ConstraintSpec, EmbeddingSet};
use defer_core::metrics::EvalReport;
use defer_core::oracle::{verify_all, Check};
use defer_core::scores::Marginals;
use defer_core::simulate::{generate, ScenarioConfig};
use defer_core::solver::{evaluate_policy, EvalOptions, MixtureComponent};
use defer_core::{
    build_embeddings, fit_policy, fit_scores, DeferralPolicy, Error, FitConfig, LabeledDataset, ScoreModel,
    ScoreTable, Split,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{with_delta, MarginalSource, RunConfig, ScoreSource};

/// One split with its aligned score rows.
#[derive(Debug, Clone)]
pub struct Part {
    pub data: LabeledDataset,
    pub scores: ScoreTable,
}

impl Part {
    pub fn groups(&self) -> Vec<usize> {
        self.data.records().iter().map(|r| r.group).collect()
    }

    pub fn embeddings(&self, specs: &[ConstraintSpec]) -> defer_core::Result<EmbeddingSet> {
        build_embeddings(&self.scores, &self.groups(), specs)
    }
}

/// Data and scores ready for solving.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub tuning: Part,
    pub test: Option<Part>,
    pub model: Option<ScoreModel>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<LabeledDataset> {
    if let Some(sc) = &cfg.data.scenario {
        return Ok(generate(sc)?.dataset);
    }
    let path = cfg.data.path.as_ref().context("data.path is not set")?;
    LabeledDataset::read_csv(path, cfg.data.num_classes, cfg.seed).with_context(|| format!("reading {}", path.display()))
}

fn split_or_none(ds: &LabeledDataset, split: Split) -> Option<LabeledDataset> {
    ds.split(split).ok()
}

/// Loads records and produces tuning (val) and test score tables.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let mut prep = prepare_scores(cfg)?;
    if cfg.marginals == MarginalSource::PlugIn {
        for part in std::iter::once(&mut prep.tuning).chain(prep.test.as_mut()) {
            part.scores.marginals = part.scores.plug_in_marginals(&part.groups())?;
        }
    }
    Ok(prep)
}

fn prepare_scores(cfg: &RunConfig) -> Result<Prepared> {
    let ds = load_dataset(cfg)?;
    let val = ds.split(Split::Val).context("the tuning (val) split is empty")?;
    let test = split_or_none(&ds, Split::Test);
    match &cfg.scores {
        ScoreSource::Fit {
            group_interactions,
            gd,
            expert_model,
        } => {
            let train = ds.split(Split::Train).context("the train split is empty")?;
            let fit_cfg = FitConfig {
                gd: gd.clone().unwrap_or_default(),
                group_interactions: *group_interactions,
                expert_model: *expert_model,
                require_joint_cells: cfg.constraints.iter().any(ConstraintSpec::is_fairness),
                ..FitConfig::default()
            };
            let model = fit_scores(&train, &fit_cfg)?;
            let tuning = Part {
                scores: model.score(&val)?,
                data: val,
            };
            let test = match test {
                Some(t) => Some(Part {
                    scores: model.score(&t)?,
                    data: t,
                }),
                None => None,
            };
            Ok(Prepared {
                tuning,
                test,
                model: Some(model),
            })
        }
        ScoreSource::Ingest {
            tuning,
            test: test_path,
            marginals,
        } => {
            let m = read_marginals(marginals)?;
            let scores = ScoreTable::from_csv_reader(open(tuning)?, m.clone(), Some(val.len()))
                .with_context(|| format!("reading {}", tuning.display()))?;
            let test = match (test, test_path) {
                (Some(t), Some(p)) => Some(Part {
                    scores: ScoreTable::from_csv_reader(open(p)?, m, Some(t.len()))
                        .with_context(|| format!("reading {}", p.display()))?,
                    data: t,
                }),
                (None, Some(_)) => bail!("test scores given but the dataset has no test split"),
                _ => None,
            };
            Ok(Prepared {
                tuning: Part { data: val, scores },
                test,
                model: None,
            })
        }
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn read_marginals(path: &Path) -> Result<Marginals> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Marginals::from_kv_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Provenance written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<String>,
}

impl Manifest {
    fn new(command: &str, cfg: Option<&RunConfig>, seed: u64) -> Result<Self> {
        let mut inputs = Vec::new();
        if let Some(cfg) = cfg {
            let mut paths: Vec<&PathBuf> = cfg.data.path.iter().collect();
            if let ScoreSource::Ingest { tuning, test, marginals } = &cfg.scores {
                paths.extend([tuning, marginals]);
                paths.extend(test.iter());
            }
            for p in paths {
                inputs.push((p.clone(), file_sha256(p)?));
            }
        }
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: cfg.map(RunConfig::hash),
            seed,
            inputs,
            outputs: Vec::new(),
        })
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes `data.csv` plus ground-truth score tables per split.
pub fn run_simulate(scenario: &ScenarioConfig, out: &Path) -> Result<Vec<String>> {
    create_dir(out)?;
    let sim = generate(scenario)?;
    sim.dataset.write_csv(out.join("data.csv"))?;
    let mut files = vec!["data.csv".to_string()];
    let marginals = out.join("marginals.toml");
    for split in [Split::Train, Split::Val, Split::Test] {
        let idx = sim.dataset.split_indices(split);
        if idx.is_empty() {
            continue;
        }
        let name = format!("truth_{}.csv", split.as_str());
        sim.truth.subset(&idx).write(out.join(&name), &marginals)?;
        files.push(name);
    }
    files.push("marginals.toml".into());
    fs::write(out.join("scenario.toml"), toml::to_string(scenario)?)?;
    files.push("scenario.toml".into());
    let mut m = Manifest::new("simulate", None, scenario.seed)?;
    m.outputs = files.clone();
    m.write(out)?;
    Ok(files)
}

/// Fits score models on the train split of `data` and scores val and test.
pub fn run_fit_scores(
    data: &Path,
    num_classes: Option<usize>,
    seed: u64,
    fit_cfg: &FitConfig,
    out: &Path,
) -> Result<ScoreModel> {
    create_dir(out)?;
    let ds = LabeledDataset::read_csv(data, num_classes, seed).with_context(|| format!("reading {}", data.display()))?;
    let train = ds.split(Split::Train).context("the train split is empty")?;
    let model = fit_scores(&train, fit_cfg)?;
    let marginals = out.join("marginals.toml");
    let mut files = Vec::new();
    for split in [Split::Val, Split::Test] {
        if let Some(part) = split_or_none(&ds, split) {
            let name = format!("scores_{}.csv", split.as_str());
            model.score(&part)?.write(out.join(&name), &marginals)?;
            files.push(name);
        }
    }
    if files.is_empty() {
        fs::write(&marginals, model.marginals.to_kv_string())?;
    }
    files.push("marginals.toml".into());
    write_json(&out.join("model.json"), &model)?;
    files.push("model.json".into());
    let mut m = Manifest::new("fit-scores", None, seed)?;
    m.inputs.push((data.to_path_buf(), file_sha256(data)?));
    m.outputs = files;
    m.write(out)?;
    Ok(model)
}

/// Policy plus reports on the tuning and (if present) test splits.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub policy: DeferralPolicy,
    pub tuning: EvalReport,
    pub test: Option<EvalReport>,
}

/// Fits and evaluates a policy for `specs` without touching the disk.
pub fn solve_prepared(cfg: &RunConfig, prep: &Prepared, specs: &[ConstraintSpec], bootstrap: usize) -> Result<SolveOutcome> {
    let set = prep.tuning.embeddings(specs)?;
    let policy = fit_policy(&set, cfg.solver.mode, &cfg.solver.options(), &cfg.solver.grid)?;
    let opts = EvalOptions {
        bootstrap_iterations: bootstrap,
        seed: cfg.seed,
    };
    let tuning = evaluate_policy(&policy, &set, &prep.tuning.data, &opts)?;
    let test = match &prep.test {
        Some(t) => Some(evaluate_policy(&policy, &t.embeddings(specs)?, &t.data, &opts)?),
        None => None,
    };
    Ok(SolveOutcome { policy, tuning, test })
}

fn summary_text(out: &SolveOutcome) -> String {
    let mut s = String::new();
    let p = &out.policy;
    s.push_str(&format!("mode: {:?}\nmultipliers: {:?}\np: {}\n", p.mode, p.multipliers(), p.predictor.p));
    for c in &p.mixture {
        s.push_str(&format!("mixture component: weight {:.4}, multipliers {:?}\n", c.weight, c.k));
    }
    let mut report = |name: &str, r: &EvalReport| {
        s.push_str(&format!(
            "\n[{name}] n = {}\n  accuracy      {:.4}\n  deferral rate {:.4}\n  objective     {:.4}\n",
            r.n, r.accuracy, r.deferral_rate, r.objective
        ));
        for (j, label) in r.constraint_labels.iter().enumerate() {
            s.push_str(&format!(
                "  {label:<13} value {:+.4} (plug-in {:+.4}) delta {} violation {:.4}\n",
                r.constraint_values[j], r.embedded_values[j], r.deltas[j], r.violations[j]
            ));
        }
        if let Some(iv) = &r.bootstrap_intervals {
            for (name, i) in iv {
                s.push_str(&format!(
                    "  bootstrap {name}: [{:.4}, {:.4}], 5-95% [{:.4}, {:.4}]\n",
                    i.low, i.high, i.p05, i.p95
                ));
            }
        }
    };
    report("tuning", &out.tuning);
    if let Some(t) = &out.test {
        report("test", t);
    }
    s
}

/// Fits the policy and writes `policy.json`, reports, a summary and the manifest.
/// On infeasibility the diagnostic goes to `infeasible.json` and the error is returned.
pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutcome> {
    create_dir(out)?;
    let mut manifest = Manifest::new("solve", Some(cfg), cfg.seed)?;
    let prep = prepare(cfg)?;
    let outcome = match solve_prepared(cfg, &prep, &cfg.constraints, cfg.eval.bootstrap_iterations) {
        Ok(o) => o,
        Err(e) => {
            if let Some(Error::NotFeasible(inf)) = e.downcast_ref::<Error>() {
                write_json(&out.join("infeasible.json"), inf)?;
                manifest.outputs.push("infeasible.json".into());
                manifest.write(out)?;
            }
            return Err(e);
        }
    };
    outcome.policy.save(out.join("policy.json"))?;
    write_json(&out.join("report_tuning.json"), &outcome.tuning)?;
    manifest.outputs.extend(["policy.json".into(), "report_tuning.json".into()]);
    if let Some(t) = &outcome.test {
        write_json(&out.join("report_test.json"), t)?;
        manifest.outputs.push("report_test.json".into());
    }
    if let Some(model) = &prep.model {
        write_json(&out.join("score_model.json"), model)?;
        manifest.outputs.push("score_model.json".into());
    }
    fs::write(out.join("summary.txt"), summary_text(&outcome))?;
    manifest.outputs.push("summary.txt".into());
    manifest.write(out)?;
    Ok(outcome)
}

/// Applies a saved policy to the tuning or test split.
pub fn run_evaluate(cfg: &RunConfig, policy_path: &Path, split: Split, out: &Path) -> Result<EvalReport> {
    let policy = DeferralPolicy::load(policy_path).with_context(|| format!("loading {}", policy_path.display()))?;
    let prep = prepare(cfg)?;
    let part = match split {
        Split::Val => &prep.tuning,
        Split::Test => prep.test.as_ref().context("the dataset has no test split")?,
        Split::Train => bail!("policies are evaluated on the val or test split"),
    };
    let set = part.embeddings(&cfg.constraints)?;
    let report = evaluate_policy(
        &policy,
        &set,
        &part.data,
        &EvalOptions {
            bootstrap_iterations: cfg.eval.bootstrap_iterations,
            seed: cfg.seed,
        },
    )?;
    create_dir(out)?;
    let name = format!("report_{}.json", split.as_str());
    write_json(&out.join(&name), &report)?;
    let mut manifest = Manifest::new("evaluate", Some(cfg), cfg.seed)?;
    manifest.inputs.push((policy_path.to_path_buf(), file_sha256(policy_path)?));
    manifest.outputs.push(name);
    manifest.write(out)?;
    Ok(report)
}

/// One δ of a sweep. Failed points keep `status` and `detail` and leave the rest empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub status: String,
    pub detail: String,
    pub outcome: Option<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub k: Vec<f64>,
    pub p: f64,
    pub mixture: Vec<MixtureComponent>,
    pub tuning_objective: f64,
    pub tuning_max_violation: f64,
    pub test: Option<EvalReport>,
}

fn max_violation(r: &EvalReport) -> f64 {
    r.violations.iter().copied().fold(0.0, f64::max)
}

/// Solves once per δ (in parallel), replacing every constraint tolerance.
pub fn sweep(cfg: &RunConfig, prep: &Prepared, deltas: &[f64]) -> Vec<SweepRow> {
    deltas
        .par_iter()
        .map(|&delta| {
            let specs: Vec<ConstraintSpec> = cfg.constraints.iter().map(|s| with_delta(s, delta)).collect();
            match solve_prepared(cfg, prep, &specs, cfg.eval.bootstrap_iterations) {
                Ok(o) => SweepRow {
                    delta,
                    status: "ok".into(),
                    detail: String::new(),
                    outcome: Some(SweepPoint {
                        k: o.policy.multipliers().to_vec(),
                        p: o.policy.predictor.p,
                        mixture: o.policy.mixture.clone(),
                        tuning_objective: o.tuning.objective,
                        tuning_max_violation: max_violation(&o.tuning),
                        test: o.test,
                    }),
                },
                Err(e) => SweepRow {
                    delta,
                    status: match e.downcast_ref::<Error>() {
                        Some(Error::NotFeasible(_)) => "not_feasible".into(),
                        _ => "error".into(),
                    },
                    detail: e.to_string(),
                    outcome: None,
                },
            }
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `weight@k1;k2|weight@k1;k2…`, empty for a single deterministic rule.
fn format_mixture(mixture: &[MixtureComponent]) -> String {
    mixture
        .iter()
        .map(|c| format!("{}@{}", num(c.weight), c.k.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")))
        .collect::<Vec<_>>()
        .join("|")
}

/// Frontier CSV: one row per δ with test metrics and bootstrap intervals.
pub fn write_frontier<W: std::io::Write>(rows: &[SweepRow], labels: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let metrics: Vec<String> = ["accuracy".to_string(), "deferral_rate".to_string()]
        .into_iter()
        .chain(labels.iter().cloned())
        .collect();
    let mut header: Vec<String> = [
        "delta",
        "status",
        "k",
        "p",
        "mixture",
        "tuning_objective",
        "tuning_max_violation",
        "test_accuracy",
        "test_deferral_rate",
        "test_max_violation",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(labels.iter().map(|l| format!("test_{l}")));
    for m in &metrics {
        for stat in ["low", "high", "p05", "p95"] {
            header.push(format!("{m}_{stat}"));
        }
    }
    header.push("detail".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![num(row.delta), row.status.clone()];
        match &row.outcome {
            Some(o) => {
                rec.push(o.k.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";"));
                rec.push(num(o.p));
                rec.push(format_mixture(&o.mixture));
                rec.push(num(o.tuning_objective));
                rec.push(num(o.tuning_max_violation));
                match &o.test {
                    Some(t) => {
                        rec.extend([num(t.accuracy), num(t.deferral_rate), num(max_violation(t))]);
                        rec.extend(t.constraint_values.iter().map(|v| num(*v)));
                        let iv = t.bootstrap_intervals.as_deref().unwrap_or(&[]);
                        for m in &metrics {
                            match iv.iter().find(|(n, _)| n == m) {
                                Some((_, i)) => rec.extend([num(i.low), num(i.high), num(i.p05), num(i.p95)]),
                                None => rec.extend(std::iter::repeat(String::new()).take(4)),
                            }
                        }
                    }
                    None => rec.extend(std::iter::repeat(String::new()).take(3 + labels.len() + 4 * metrics.len())),
                }
            }
            None => rec.extend(std::iter::repeat(String::new()).take(header.len() - 3)),
        }
        rec.push(row.detail.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Constraint labels the embedding builder assigns for `specs`.
pub fn constraint_labels(prep: &Prepared, specs: &[ConstraintSpec]) -> Result<Vec<String>> {
    Ok(prep.tuning.embeddings(specs)?.constraints.into_iter().map(|c| c.label).collect())
}

/// Runs the sweep and writes `frontier.csv`.
pub fn run_sweep(cfg: &RunConfig, deltas: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if cfg.constraints.is_empty() {
        bail!("a sweep needs at least one constraint");
    }
    create_dir(out)?;
    let prep = prepare(cfg)?;
    let labels = constraint_labels(&prep, &cfg.constraints)?;
    let rows = sweep(cfg, &prep, deltas);
    let file = fs::File::create(out.join("frontier.csv"))?;
    write_frontier(&rows, &labels, file)?;
    let mut manifest = Manifest::new("sweep", Some(cfg), cfg.seed)?;
    manifest.outputs.push("frontier.csv".into());
    manifest.write(out)?;
    Ok(rows)
}

/// One tuning run of the generalization study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRun {
    pub n: usize,
    pub seed: u64,
    pub d_n: f64,
    pub status: String,
    /// `max_j (value_j − δ_j)` on the tuning and held-out splits.
    pub tuning_excess: f64,
    pub heldout_excess: f64,
    /// `max(heldout_excess, 0)`.
    pub heldout_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub n: usize,
    pub d_n: f64,
    pub runs: usize,
    pub median_heldout_excess: f64,
    pub median_heldout_violation: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn excess(r: &EvalReport, deltas: &[f64]) -> f64 {
    r.constraint_values
        .iter()
        .zip(&r.two_sided)
        .zip(deltas)
        .map(|((&v, &two), &d)| if two { v.abs() } else { v } - d)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Tunes on `n` simulated validation points at tolerance `max(δ − d_n, 0)`
/// using the simulator's exact conditionals, and measures the constraint
/// excess over `δ` on the scenario's test split.
pub fn generalization_study(cfg: &RunConfig, ns: &[usize], seeds: usize) -> Result<(Vec<StudyRun>, Vec<StudySummary>)> {
    let base = cfg.data.scenario.as_ref().context("the generalization study needs a simulator scenario")?;
    if cfg.constraints.is_empty() {
        bail!("the generalization study needs at least one constraint");
    }
    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| (0..seeds as u64).map(move |s| (n, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, s)| -> Result<StudyRun> {
            let scenario = ScenarioConfig {
                n_train: 0,
                n_val: n,
                seed: base.seed.wrapping_add(s),
                ..base.clone()
            };
            let sim = generate(&scenario)?;
            let part = |split| -> Result<Part> {
                let idx = sim.dataset.split_indices(split);
                Ok(Part {
                    data: sim.dataset.split(split)?,
                    scores: sim.truth.subset(&idx),
                })
            };
            let prep = Prepared {
                tuning: part(Split::Val)?,
                test: Some(part(Split::Test).context("the scenario needs n_test > 0")?),
                model: None,
            };
            let d_n = cfg.margin.d_n(n);
            let full = prep.tuning.embeddings(&cfg.constraints)?;
            let deltas: Vec<f64> = full.constraints.iter().map(|c| c.delta).collect();
            let specs: Vec<ConstraintSpec> = cfg
                .constraints
                .iter()
                .map(|sp| match sp {
                    ConstraintSpec::Longtail { .. } => sp.clone(),
                    _ => {
                        let d = spec_delta(sp);
                        with_delta(sp, (d - d_n).max(0.0))
                    }
                })
                .collect();
            let mut run = StudyRun {
                n,
                seed: scenario.seed,
                d_n,
                status: "ok".into(),
                tuning_excess: f64::NAN,
                heldout_excess: f64::NAN,
                heldout_violation: f64::NAN,
            };
            match solve_prepared(cfg, &prep, &specs, 0) {
                Ok(o) => {
                    run.tuning_excess = excess(&o.tuning, &deltas);
                    run.heldout_excess = excess(o.test.as_ref().expect("test part present"), &deltas);
                    run.heldout_violation = run.heldout_excess.max(0.0);
                }
                Err(e) => run.status = e.to_string(),
            }
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ns
        .iter()
        .map(|&n| {
            let ok: Vec<&StudyRun> = runs.iter().filter(|r| r.n == n && r.status == "ok").collect();
            let ex: Vec<f64> = ok.iter().map(|r| r.heldout_excess).collect();
            let vi: Vec<f64> = ok.iter().map(|r| r.heldout_violation).collect();
            StudySummary {
                n,
                d_n: cfg.margin.d_n(n),
                runs: ok.len(),
                median_heldout_excess: median(&ex),
                median_heldout_violation: median(&vi),
            }
        })
        .collect();
    Ok((runs, summary))
}

fn spec_delta(spec: &ConstraintSpec) -> f64 {
    match spec {
        ConstraintSpec::Budget { delta }
        | ConstraintSpec::Dp { delta }
        | ConstraintSpec::Eopp { delta }
        | ConstraintSpec::Eodds { delta }
        | ConstraintSpec::Typek { delta, .. }
        | ConstraintSpec::Ood { delta } => *delta,
        ConstraintSpec::Longtail { delta, .. } => delta.unwrap_or(0.0),
    }
}

/// Runs the study and writes `gen_study_runs.csv` and `gen_study.csv`.
pub fn run_gen_study(cfg: &RunConfig, ns: &[usize], seeds: usize, out: &Path) -> Result<Vec<StudySummary>> {
    create_dir(out)?;
    let (runs, summary) = generalization_study(cfg, ns, seeds)?;
    let mut w = csv::Writer::from_path(out.join("gen_study_runs.csv"))?;
    for r in &runs {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("gen_study.csv"))?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush()?;
    let mut manifest = Manifest::new("gen-study", Some(cfg), cfg.seed)?;
    manifest.outputs.extend(["gen_study_runs.csv".into(), "gen_study.csv".into()]);
    manifest.write(out)?;
    Ok(summary)
}

/// Runs every oracle verification.
pub fn run_oracle_check(seed: u64) -> Result<Vec<Check>> {
    Ok(verify_all(seed)?)
}

/// Fixed-width pass/fail table.
pub fn format_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| format!("{}  {:<width$}  {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect()
}

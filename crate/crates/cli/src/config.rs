//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use defer_core::embeddings::ConstraintSpec;
use defer_core::logistic::GdConfig;
use defer_core::simulate::ScenarioConfig;
use defer_core::{ExpertModel, GridSpec, PolicyMode, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DEFER_OUTPUT_ROOT";

/// Where records come from: a CSV file or the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Number of classes; inferred from the labels when absent.
    #[serde(default)]
    pub num_classes: Option<usize>,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
}

/// Exactly one score source.
/// Where the group marginals behind fairness coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalSource {
    /// The score model's train frequencies, or the ingested sidecar.
    #[default]
    Scores,
    /// Plug-in masses on each split being solved or evaluated.
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScoreSource {
    /// Fit logistic models on the train split.
    Fit {
        #[serde(default = "default_true")]
        group_interactions: bool,
        #[serde(default)]
        gd: Option<GdConfig>,
        #[serde(default)]
        expert_model: ExpertModel,
    },
    /// Read precomputed score tables aligned with the val and test splits.
    Ingest {
        tuning: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        marginals: PathBuf,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: PolicyMode,
    pub eps_tie: f64,
    pub min_jump: f64,
    pub breakpoint_cap: usize,
    pub feasibility_tol: f64,
    pub grid: GridSpec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            mode: PolicyMode::Randomized,
            eps_tie: o.eps_tie,
            min_jump: o.min_jump,
            breakpoint_cap: o.breakpoint_cap,
            feasibility_tol: o.feasibility_tol,
            grid: GridSpec::default(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            eps_tie: self.eps_tie,
            min_jump: self.min_jump,
            breakpoint_cap: self.breakpoint_cap,
            feasibility_tol: self.feasibility_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bootstrap_iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bootstrap_iterations: defer_core::bootstrap::DEFAULT_ITERATIONS,
        }
    }
}

/// Margin `d_n = c·(√ln n + √ln(1/ε))/√n` used by the generalization study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginConfig {
    pub constant: f64,
    pub epsilon: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self {
            constant: 1.0,
            epsilon: 0.05,
        }
    }
}

impl MarginConfig {
    pub fn d_n(&self, n: usize) -> f64 {
        let n = n as f64;
        self.constant * (n.ln().sqrt() + (1.0 / self.epsilon).ln().sqrt()) / n.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub scores: ScoreSource,
    /// Must be set when no constraint is given.
    #[serde(default)]
    pub unconstrained: bool,
    #[serde(default, rename = "constraint")]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub margin: MarginConfig,
    #[serde(default)]
    pub marginals: MarginalSource,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.path.as_mut() {
            fix(p);
        }
        if let ScoreSource::Ingest { tuning, test, marginals } = &mut self.scores {
            fix(tuning);
            fix(marginals);
            if let Some(t) = test.as_mut() {
                fix(t);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.scenario) {
            (Some(_), Some(_)) => bail!("data: give either `path` or `scenario`, not both"),
            (None, None) => bail!("data: one of `path` or `scenario` is required"),
            _ => {}
        }
        if let Some(s) = &self.data.scenario {
            s.validate()?;
        }
        if self.constraints.is_empty() && !self.unconstrained {
            bail!("no constraints given; set `unconstrained = true` to solve without any");
        }
        if !self.constraints.is_empty() && self.unconstrained {
            bail!("`unconstrained = true` conflicts with the listed constraints");
        }
        if !(self.margin.epsilon > 0.0 && self.margin.epsilon < 1.0) {
            bail!("margin.epsilon must lie in (0, 1)");
        }
        Ok(())
    }

    /// Applies a command-line seed, which also reseeds the simulator.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            if let Some(sc) = self.data.scenario.as_mut() {
                sc.seed = s;
            }
        }
        self
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// `--out`, then `output_dir`, then `$DEFER_OUTPUT_ROOT/<command>`, then `runs/<command>`.
    pub fn output_dir(&self, cli: Option<&Path>, command: &str) -> PathBuf {
        resolve_output(cli, self.output_dir.as_deref(), command)
    }
}

pub fn resolve_output(cli: Option<&Path>, configured: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = cli.or(configured) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(command)
}

/// Returns `spec` with its tolerance replaced. Long-tail slack is left as is.
pub fn with_delta(spec: &ConstraintSpec, delta: f64) -> ConstraintSpec {
    let mut s = spec.clone();
    match &mut s {
        ConstraintSpec::Budget { delta: d }
        | ConstraintSpec::Dp { delta: d }
        | ConstraintSpec::Eopp { delta: d }
        | ConstraintSpec::Eodds { delta: d }
        | ConstraintSpec::Typek { delta: d, .. }
        | ConstraintSpec::Ood { delta: d } => *d = delta,
        ConstraintSpec::Longtail { .. } => {}
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[data.scenario]
n_train = 100
[scores]
source = "fit"
[[constraint]]
kind = "dp"
delta = 0.05
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.constraints, vec![ConstraintSpec::Dp { delta: 0.05 }]);
        assert_eq!(c.data.scenario.as_ref().unwrap().n_train, 100);
        assert_eq!(c.solver.mode, PolicyMode::Randomized);
    }

    #[test]
    fn needs_constraint_or_flag() {
        let text = BASE.replace("[[constraint]]\nkind = \"dp\"\ndelta = 0.05\n", "");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("unconstrained"));
        assert!(RunConfig::from_toml(&format!("unconstrained = true\n{text}")).is_ok());
    }

    #[test]
    fn rejects_two_score_sources() {
        let text = BASE.replace("source = \"fit\"", "source = \"fit\"\ntuning = \"a.csv\"");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn margin_shrinks_like_root_log_over_root_n() {
        let m = MarginConfig::default();
        for n in [1_000usize, 10_000] {
            let ratio = m.d_n(n) / m.d_n(10 * n);
            let reference = ((n as f64).ln() / n as f64).sqrt() / ((10.0 * n as f64).ln() / (10 * n) as f64).sqrt();
            assert!(ratio / reference < 2.0 && reference / ratio < 2.0);
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml(BASE).unwrap();
        let b = a.clone().with_seed(Some(4));
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::from_toml(BASE).unwrap().hash());
    }

    #[test]
    fn parses_expert_model_and_marginal_source() {
        let text = BASE.replace("source = \"fit\"", "source = \"fit\"\nexpert_model = \"conditional\"");
        let c = RunConfig::from_toml(&format!("marginals = \"plugin\"\n{text}")).unwrap();
        assert_eq!(c.marginals, MarginalSource::PlugIn);
        assert!(matches!(c.scores, ScoreSource::Fit { expert_model: ExpertModel::Conditional, .. }));
        assert_eq!(RunConfig::from_toml(BASE).unwrap().marginals, MarginalSource::Scores);
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use defer_cli::config::{resolve_output, RunConfig};
use defer_cli::pipeline::{
    format_checks, run_evaluate, run_fit_scores, run_gen_study, run_oracle_check, run_simulate, run_solve, run_sweep,
};
use defer_cli::{EXIT_NOT_FEASIBLE, EXIT_ORACLE_MISMATCH};
use defer_core::simulate::ScenarioConfig;
use defer_core::{Error, ExpertModel, FitConfig, Split};

#[derive(Parser)]
#[command(name = "defer", version, about = "Constrained learn-to-defer post-processing")]
struct Cli {
    /// Seed for splits, simulation and bootstrap; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to $DEFER_OUTPUT_ROOT/<command>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population with ground-truth scores.
    Simulate {
        /// Scenario TOML; defaults are used when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Fit score models on the train split of a dataset CSV.
    FitScores {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        num_classes: Option<usize>,
        /// Disable feature × group interaction columns.
        #[arg(long)]
        no_interactions: bool,
        /// Expert scores from one model per event (`joint`) or per-class
        /// models of `Pr(M = y | Y = y, x)` (`conditional`).
        #[arg(long, default_value = "joint", value_parser = parse_expert_model)]
        expert_model: ExpertModel,
    },
    /// Fit a constrained deferral policy on the val split.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Apply a saved policy to a split.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Solve for each tolerance and write the accuracy/violation frontier.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2")]
        deltas: Vec<f64>,
    },
    /// Held-out violation of margin-tuned policies across sample sizes.
    GenStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "n", value_delimiter = ',', default_value = "1000,10000,100000")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Cross-check the solver against exact oracles and analytic examples.
    OracleCheck,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    Ok(RunConfig::load(path)?.with_seed(seed))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate { scenario } => {
            let mut sc = match scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str::<ScenarioConfig>(&text).context("parsing scenario")?
                }
                None => ScenarioConfig::default(),
            };
            if let Some(s) = cli.seed {
                sc.seed = s;
            }
            let dir = resolve_output(out, None, "simulate");
            let files = run_simulate(&sc, &dir)?;
            println!("wrote {} to {}", files.join(", "), dir.display());
        }
        Command::FitScores {
            data,
            num_classes,
            no_interactions,
            expert_model,
        } => {
            let dir = resolve_output(out, None, "fit-scores");
            let cfg = FitConfig {
                group_interactions: !no_interactions,
                expert_model,
                ..FitConfig::default()
            };
            let model = run_fit_scores(&data, num_classes, cli.seed.unwrap_or(0), &cfg, &dir)?;
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote scores to {}", dir.display());
        }
        Command::Solve { config } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cfg.output_dir(out, "solve");
            let o = run_solve(&cfg, &dir)?;
            println!(
                "k = {:?}, p = {}, tuning accuracy {:.4}, deferral rate {:.4}; wrote {}",
                o.policy.multipliers(),
                o.policy.predictor.p,
                o.tuning.accuracy,
                o.tuning.deferral_rate,
                dir.display()
            );
        }
        Command::Evaluate { config, policy, split } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cfg.output_dir(out, "evaluate");
            let r = run_evaluate(&cfg, &policy, split, &dir)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Sweep { config, deltas } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cfg.output_dir(out, "sweep");
            let rows = run_sweep(&cfg, &deltas, &dir)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} points ({failed} failed); wrote {}", rows.len(), dir.join("frontier.csv").display());
        }
        Command::GenStudy { config, ns, seeds } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = cfg.output_dir(out, "gen-study");
            for s in run_gen_study(&cfg, &ns, seeds, &dir)? {
                println!(
                    "n = {:>7}  d_n = {:.4}  runs = {}  median excess {:+.4}  median violation {:.4}",
                    s.n, s.d_n, s.runs, s.median_heldout_excess, s.median_heldout_violation
                );
            }
        }
        Command::OracleCheck => {
            let checks = run_oracle_check(cli.seed.unwrap_or(0))?;
            print!("{}", format_checks(&checks));
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("oracle_check.json"), serde_json::to_string_pretty(&checks)?)?;
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(EXIT_ORACLE_MISMATCH as u8));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(Error::NotFeasible(inf)) = e.downcast_ref::<Error>() {
                for ((c, d), m) in inf.constraints.iter().zip(&inf.deltas).zip(&inf.min_achievable) {
                    eprintln!("  {c}: delta {d}, closest achievable {m}");
                }
                return ExitCode::from(EXIT_NOT_FEASIBLE as u8);
            }
            ExitCode::FAILURE
        }
    }
}

fn parse_expert_model(s: &str) -> Result<ExpertModel, String> {
    match s {
        "joint" => Ok(ExpertModel::Joint),
        "conditional" => Ok(ExpertModel::Conditional),
        other => Err(format!("unknown expert model `{other}` (joint | conditional)")),
    }
}

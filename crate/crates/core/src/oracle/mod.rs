//! Independent exact solvers and analytic counterexamples used to check
//! the main solver.

pub mod budget;
pub mod knapsack;
pub mod lp;
pub mod counterexamples;

pub use budget::{assignment_loss, budget_deterministic};
pub use knapsack::{knapsack_to_l2d, l2d_brute, KnapsackInstance, Reduction};
pub use lp::{lp_exact, lp_exact_two_sided, lp_simplex, FiniteInstance, LpSolution};
pub use counterexamples::{compositionality_demo, impossibility_instances, CompositionalityReport, ImpossibilityCase};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embeddings::Embedding;
use crate::error::Result;
use crate::solver::{solve_single, SolverOptions};

/// Outcome of one verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Random budget instance with `n` atoms, `d = 3`.
fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Runs every oracle verification with `seed` and returns one check each.
pub fn verify_all(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // single-constraint solver against the hull greedy and the simplex
    let (mut worst_obj, mut worst_cons, mut worst_simplex) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(2..=40);
        let rows = random_rows(&mut rng, n);
        let psi1: Vec<Vec<f64>> = (0..n).map(|_| vec![0.0, 0.0, 1.0]).collect();
        let delta = rng.gen_range(0.0..0.6);
        let inst = FiniteInstance::new(vec![1.0 / n as f64; n], rows.clone(), vec![psi1.clone()])?;
        let lp = lp_exact(&inst, &[delta])?;
        let sx = lp_simplex(&inst, &[delta])?;
        let s = solve_single(
            &Embedding::from_rows(&rows)?,
            &Embedding::from_rows(&psi1)?,
            delta,
            false,
            "budget",
            &SolverOptions::default(),
        )?;
        worst_obj = worst_obj.max((s.objective - lp.objective).abs());
        worst_cons = worst_cons.max(s.constraint_value - delta);
        worst_simplex = worst_simplex.max((sx.objective - lp.objective).abs());
    }
    out.push(check(
        "solver_matches_lp",
        worst_obj <= 1e-9 && worst_cons <= 1e-9,
        format!("max |objective gap| {worst_obj:.2e}, max constraint excess {worst_cons:.2e}"),
    ));
    out.push(check(
        "greedy_matches_simplex",
        worst_simplex <= 1e-9,
        format!("max |objective gap| {worst_simplex:.2e}"),
    ));

    // knapsack reduction
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=15);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=20) as f64).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64).collect();
        let cap = rng.gen_range(1..=(weights.iter().sum::<f64>() as i64)) as f64;
        let kp = KnapsackInstance::new(values, weights, cap)?;
        let r = knapsack_to_l2d(&kp)?;
        let v = r.to_knapsack_value(l2d_brute(&r.instance, r.budget)?);
        worst = worst.max((v - kp.brute_force()?).abs());
    }
    out.push(check("knapsack_reduction", worst <= 1e-9, format!("max |value gap| {worst:.2e}")));

    // deterministic budget rule within 1/n of the randomized optimum
    let mut worst_slack = f64::NEG_INFINITY;
    for _ in 0..50 {
        let n = 50;
        let human: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen::<f64>() < 0.3))).collect();
        let ai: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen::<f64>() < 0.3))).collect();
        let b = rng.gen_range(0.0..0.5);
        let det = assignment_loss(&human, &ai, &budget_deterministic(&human, &ai, b)?);
        let inst = FiniteInstance::new(
            vec![1.0 / n as f64; n],
            (0..n).map(|i| vec![-ai[i], -human[i]]).collect(),
            vec![vec![vec![0.0, 1.0]; n]],
        )?;
        let lp_loss = -lp_exact(&inst, &[b])?.objective;
        worst_slack = worst_slack.max(det - lp_loss - 1.0 / n as f64);
    }
    out.push(check(
        "budget_rule_within_1_over_n",
        worst_slack <= 0.0,
        format!("max (deterministic − LP − 1/n) {worst_slack:.2e}"),
    ));

    // no swap of a deferred and a kept record lowers the loss
    let mut improving = 0usize;
    for _ in 0..50 {
        let n = 50;
        let human: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ai: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b = rng.gen_range(0.0..1.0);
        let dec = budget_deterministic(&human, &ai, b)?;
        let base = assignment_loss(&human, &ai, &dec);
        for i in (0..n).filter(|&i| dec[i]) {
            for j in (0..n).filter(|&j| !dec[j]) {
                let mut alt = dec.clone();
                alt.swap(i, j);
                if assignment_loss(&human, &ai, &alt) < base - 1e-12 {
                    improving += 1;
                }
            }
        }
    }
    out.push(check("budget_rule_exchange", improving == 0, format!("{improving} improving swaps")));

    // label rules that do not transfer
    let cases = impossibility_instances();
    let ok = cases.iter().all(|c| {
        (c.label_rates[0] - c.label_rates[1]).abs() < 1e-15
            && c.own_loss.iter().all(|&l| l <= 1.0 / 3.0 + 1e-15)
            && (0..2).all(|i| c.cross_loss[i] > c.own_loss[i])
    });
    let table: Vec<String> = cases
        .iter()
        .map(|c| {
            format!(
                "a={} b={}: own {:.4}/{:.4} cross {:.4}/{:.4}",
                u8::from(c.a),
                u8::from(c.b),
                c.own_loss[0],
                c.own_loss[1],
                c.cross_loss[0],
                c.cross_loss[1]
            )
        })
        .collect();
    out.push(check("deferral_labels_not_interchangeable", ok, table.join("; ")));

    let comp = compositionality_demo()?;
    out.push(check(
        "deferral_breaks_fairness",
        comp.classifier_gap == 0.0 && comp.expert_gap == 0.0 && comp.system_gap.abs() == 0.5 && comp.best_fair_loss >= 0.5,
        format!(
            "gaps classifier {} expert {} system {}; optimal loss {}; best fair loss {}",
            comp.classifier_gap, comp.expert_gap, comp.system_gap, comp.system_loss, comp.best_fair_loss
        ),
    ));
    Ok(out)
}

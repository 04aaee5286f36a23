//! Single-constraint solver: the smallest multiplier meeting the tolerance,
//! with randomization at the curve's discontinuity.

use serde::{Deserialize, Serialize};

use super::curve::{self, constraint_curve_capped, predictor_outputs, ConstraintCurve, LEFT_PROBE};
use super::tau::EPS_TIE;
use crate::embeddings::Embedding;
use crate::error::{Error, Infeasibility, Result};

/// Numerical settings shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps_tie: f64,
    /// Jumps of `C` at or below this size are not randomized (`p = 0`).
    pub min_jump: f64,
    /// Cap on `n·d²` for the exact sweep; larger inputs use bisection.
    pub breakpoint_cap: usize,
    /// Slack when checking two-sided feasibility.
    pub feasibility_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_tie: EPS_TIE,
            min_jump: 0.0,
            breakpoint_cap: curve::DEFAULT_BREAKPOINT_CAP,
            feasibility_tol: 1e-12,
        }
    }
}

/// Outcome of [`solve_single`]. `k` is the effective signed multiplier:
/// negative when the lower side of a two-sided constraint binds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSolution {
    pub k: f64,
    pub p: f64,
    /// `+1` or `−1`: orientation of the constraint that was solved.
    pub sign: f64,
    /// `C(k̂)` and `lim_{t↑k̂} C(t)` in the solved orientation.
    pub curve_value: f64,
    pub curve_left: f64,
    /// Mean `⟨f, ψ0⟩` and `⟨f, ψ1⟩` (original orientation) of the returned predictor.
    pub objective: f64,
    pub constraint_value: f64,
    /// Whether `C` was evaluated exactly or by bisection.
    pub exact_curve: bool,
    pub monotone: bool,
}

struct Oriented {
    k: f64,
    p: f64,
    value: f64,
    left: f64,
    exact: bool,
    monotone: bool,
}

fn solve_oriented(psi0: &Embedding, psi1: &Embedding, delta: f64, opts: &SolverOptions) -> std::result::Result<Oriented, f64> {
    match constraint_curve_capped(psi0, psi1, opts.breakpoint_cap) {
        Ok(c) => solve_on_curve(&c, delta, opts),
        Err(_) => {
            let at = |t| curve::direct_value(psi0, psi1, t);
            let c0 = at(0.0);
            if c0 <= delta {
                return Ok(Oriented { k: 0.0, p: 0.0, value: c0, left: c0, exact: false, monotone: true });
            }
            let Some(k) = curve::bisect_threshold(psi0, psi1, delta, 100) else {
                return Err(at(1e12));
            };
            let value = at(k);
            let left = at((k - LEFT_PROBE).max(0.0));
            let p = randomization(delta, value, left, opts.min_jump);
            Ok(Oriented { k, p, value, left, exact: false, monotone: left + 1e-9 >= value })
        }
    }
}

fn randomization(delta: f64, value: f64, left: f64, min_jump: f64) -> f64 {
    let jump = left - value;
    if jump <= min_jump || jump <= 0.0 {
        0.0
    } else {
        ((delta - value) / jump).clamp(0.0, 1.0)
    }
}

fn solve_on_curve(c: &ConstraintCurve, delta: f64, opts: &SolverOptions) -> std::result::Result<Oriented, f64> {
    let monotone = c.monotonicity_violations(1e-9) == 0;
    if c.at_zero <= delta {
        return Ok(Oriented { k: 0.0, p: 0.0, value: c.at_zero, left: c.at_zero, exact: true, monotone });
    }
    let Some(j) = c.values.iter().position(|&v| v <= delta) else {
        return Err(c.min_value());
    };
    let value = c.values[j];
    let left = c.left_limit(j);
    Ok(Oriented {
        k: c.breakpoints[j],
        p: randomization(delta, value, left, opts.min_jump),
        value,
        left,
        exact: true,
        monotone,
    })
}

/// Maximizes mean `⟨f, ψ0⟩` subject to mean `⟨f, ψ1⟩ ≤ δ` (or `|·| ≤ δ` when
/// `two_sided`) over predictors `f_{k,p}` with `k ≥ 0` in the solved orientation.
pub fn solve_single(
    psi0: &Embedding,
    psi1: &Embedding,
    delta: f64,
    two_sided: bool,
    label: &str,
    opts: &SolverOptions,
) -> Result<SingleSolution> {
    if psi0.dim() != psi1.dim() || psi0.len() != psi1.len() {
        return Err(Error::Structure("objective and constraint embeddings differ in shape".into()));
    }
    if psi0.is_empty() {
        return Err(Error::Invalid("no tuning instances".into()));
    }
    let infeasible = |min: f64| {
        Error::NotFeasible(Infeasibility {
            constraints: vec![label.to_string()],
            deltas: vec![delta],
            min_achievable: vec![min],
        })
    };
    if two_sided && delta < 0.0 {
        return Err(infeasible(0.0));
    }
    let mut sign = 1.0;
    let mut sol = solve_oriented(psi0, psi1, delta, opts).map_err(infeasible)?;
    let mut neg = None;
    // only a start below −δ calls for the other side; crossings are randomized onto δ
    if two_sided && sol.k == 0.0 && sol.value < -delta - opts.feasibility_tol {
        let flipped = psi1.negated();
        sign = -1.0;
        sol = solve_oriented(psi0, &flipped, delta, opts).map_err(|m| infeasible(-m))?;
        neg = Some(flipped);
    }
    let k = sign * sol.k;
    // tie-breaks follow the solved orientation
    let outputs = predictor_outputs(psi0, neg.as_ref().unwrap_or(psi1), sol.k, sol.p, opts.eps_tie);
    let constraint_value = psi1.mean_dot(&outputs);
    if two_sided && constraint_value.abs() > delta + opts.feasibility_tol.max(1e-9) {
        // both sides bind
        return Err(infeasible(constraint_value));
    }
    Ok(SingleSolution {
        k,
        p: sol.p,
        sign,
        curve_value: sol.value,
        curve_left: sol.left,
        objective: psi0.mean_dot(&outputs),
        constraint_value,
        exact_curve: sol.exact,
        monotone: sol.monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget_instance() -> (Embedding, Embedding) {
        // expert gain over the best class decreases with the index
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let best = 0.6 + 0.01 * i as f64;
                vec![best, 1.0 - best, best + 0.3 - 0.05 * i as f64]
            })
            .collect();
        (Embedding::from_rows(&rows).unwrap(), Embedding::constant(10, &[0.0, 0.0, 1.0]))
    }

    #[test]
    fn slack_budget_returns_unconstrained() {
        let (psi0, psi1) = budget_instance();
        let s = solve_single(&psi0, &psi1, 1.0, false, "budget", &SolverOptions::default()).unwrap();
        assert_eq!((s.k, s.p), (0.0, 0.0));
    }

    #[test]
    fn budget_randomizes_to_exact_mass() {
        let (psi0, psi1) = budget_instance();
        // six instances defer unconstrained; the budget allows 0.25
        let s = solve_single(&psi0, &psi1, 0.25, false, "budget", &SolverOptions::default()).unwrap();
        assert!(s.k > 0.0);
        assert!((s.constraint_value - 0.25).abs() < 1e-12, "{s:?}");
        assert!((s.p - 0.5).abs() < 1e-9);
    }

    #[test]
    fn min_jump_disables_randomization() {
        let (psi0, psi1) = budget_instance();
        let opts = SolverOptions { min_jump: 0.2, ..SolverOptions::default() };
        let s = solve_single(&psi0, &psi1, 0.25, false, "budget", &opts).unwrap();
        assert_eq!(s.p, 0.0);
        assert!((s.constraint_value - 0.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_reports_minimum() {
        let psi0 = Embedding::from_rows(&[vec![0.2, 0.8, 0.5]]).unwrap();
        let psi1 = Embedding::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        match solve_single(&psi0, &psi1, 0.5, false, "c", &SolverOptions::default()) {
            Err(Error::NotFeasible(inf)) => assert_eq!(inf.min_achievable, vec![1.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lower_side_of_two_sided_constraint() {
        let psi0 = Embedding::from_rows(&[vec![0.9, 0.1, 0.0], vec![0.1, 0.9, 0.0]]).unwrap();
        let psi1 = Embedding::from_rows(&[vec![0.0, -2.0, 0.0], vec![0.0, -2.0, 0.0]]).unwrap();
        // unconstrained value is −1; |·| ≤ 0.5 forces it up
        let s = solve_single(&psi0, &psi1, 0.5, true, "dp", &SolverOptions::default()).unwrap();
        assert_eq!(s.sign, -1.0);
        assert!(s.k < 0.0);
        assert!((s.constraint_value + 0.5).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn two_sided_zero_tolerance_is_reached_by_randomization() {
        let psi0 = Embedding::from_rows(&[vec![0.1, 0.9, 0.0], vec![0.1, 0.9, 0.0], vec![0.2, 0.7, 0.1]]).unwrap();
        let psi1 = Embedding::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        // C drops from 1/3 to −1/3 at k = 0.8
        let s = solve_single(&psi0, &psi1, 0.0, true, "dp", &SolverOptions::default()).unwrap();
        assert_eq!(s.sign, 1.0);
        assert!(s.curve_value < 0.0);
        assert!(s.constraint_value.abs() < 1e-12, "{s:?}");
        assert!((s.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bisection_fallback_agrees() {
        let (psi0, psi1) = budget_instance();
        let opts = SolverOptions { breakpoint_cap: 1, ..SolverOptions::default() };
        let exact = solve_single(&psi0, &psi1, 0.25, false, "budget", &SolverOptions::default()).unwrap();
        let approx = solve_single(&psi0, &psi1, 0.25, false, "budget", &opts).unwrap();
        assert!(!approx.exact_curve);
        assert!((approx.k - exact.k).abs() < 1e-9);
        assert!((approx.constraint_value - 0.25).abs() < 1e-9);
    }
}

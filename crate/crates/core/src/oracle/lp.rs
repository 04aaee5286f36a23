//! Exact linear programs over finitely supported distributions.
//!
//! Single constraint: per-atom upper convex hulls in the `(ψ1, ψ0)` plane,
//! consumed in order of objective loss per unit of constraint removed, with
//! the last move fractional. Several constraints: dense two-phase simplex
//! with Bland's rule.

use crate::decision::SimplexVector;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Infeasibility, Result};

/// Largest `n·d` accepted by the simplex oracle.
pub const SIMPLEX_CAP: usize = 200;
const PIVOT_EPS: f64 = 1e-11;

/// Atoms with probabilities, objective rows and constraint rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    pub probs: Vec<f64>,
    pub psi0: Vec<Vec<f64>>,
    /// `constraints[j][i]` is `ψ_j` on atom `i`.
    pub constraints: Vec<Vec<Vec<f64>>>,
}

impl FiniteInstance {
    pub fn new(probs: Vec<f64>, psi0: Vec<Vec<f64>>, constraints: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = probs.len();
        if n == 0 {
            return Err(Error::Invalid("instance without atoms".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Invalid("atom probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("atom probabilities sum to {total}")));
        }
        let d = psi0[0].len();
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == d);
        if d < 2 || !rows_ok(&psi0) || !constraints.iter().all(rows_ok) {
            return Err(Error::Structure("atom rows must all have the same width d ≥ 2".into()));
        }
        Ok(Self {
            probs,
            psi0,
            constraints,
        })
    }

    /// Uniform atoms over the rows of an embedding set.
    pub fn from_embeddings(set: &EmbeddingSet) -> Result<Self> {
        let n = set.len();
        Self::new(
            vec![1.0 / n as f64; n],
            set.psi0.rows().map(<[f64]>::to_vec).collect(),
            set.constraints
                .iter()
                .map(|c| c.psi.rows().map(<[f64]>::to_vec).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.psi0[0].len()
    }

    /// Same atoms with constraint `j` negated.
    pub fn with_negated(&self, j: usize) -> Self {
        let mut out = self.clone();
        for row in &mut out.constraints[j] {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        out
    }

    fn expectation(&self, rows: &[Vec<f64>], policy: &[SimplexVector]) -> f64 {
        self.probs.iter().zip(rows).zip(policy).map(|((p, r), f)| p * f.dot(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub policy: Vec<SimplexVector>,
    pub constraint_values: Vec<f64>,
}

fn finish(inst: &FiniteInstance, policy: Vec<SimplexVector>) -> LpSolution {
    LpSolution {
        objective: inst.expectation(&inst.psi0, &policy),
        constraint_values: inst.constraints.iter().map(|c| inst.expectation(c, &policy)).collect(),
        policy,
    }
}

fn infeasible(inst: &FiniteInstance, deltas: &[f64]) -> Error {
    Error::NotFeasible(Infeasibility {
        constraints: (0..deltas.len()).map(|j| format!("constraint_{j}")).collect(),
        deltas: deltas.to_vec(),
        min_achievable: inst
            .constraints
            .iter()
            .map(|rows| {
                inst.probs
                    .iter()
                    .zip(rows)
                    .map(|(p, r)| p * r.iter().copied().fold(f64::INFINITY, f64::min))
                    .sum()
            })
            .collect(),
    })
}

/// `max Σ p_i⟨f_i, ψ0_i⟩` s.t. `Σ p_i⟨f_i, ψ_j,i⟩ ≤ δ_j`.
pub fn lp_exact(inst: &FiniteInstance, deltas: &[f64]) -> Result<LpSolution> {
    if deltas.len() != inst.constraints.len() {
        return Err(Error::Structure(format!(
            "{} tolerances for {} constraints",
            deltas.len(),
            inst.constraints.len()
        )));
    }
    match deltas.len() {
        0 => Ok(finish(inst, (0..inst.len()).map(|i| top_choice(inst, i, None)).collect())),
        1 => lp_greedy(inst, deltas[0]),
        _ => lp_simplex(inst, deltas),
    }
}

/// `|Σ p_i⟨f_i, ψ_i⟩| ≤ δ` for a single constraint, by solving each one-sided relaxation.
pub fn lp_exact_two_sided(inst: &FiniteInstance, delta: f64) -> Result<LpSolution> {
    if inst.constraints.len() != 1 {
        return Err(Error::Invalid("two-sided oracle takes exactly one constraint".into()));
    }
    let upper = lp_greedy(inst, delta)?;
    if upper.constraint_values[0] >= -delta - 1e-12 {
        return Ok(upper);
    }
    let lower = lp_greedy(&inst.with_negated(0), delta)?;
    let sol = finish(inst, lower.policy);
    if sol.constraint_values[0] <= delta + 1e-12 {
        Ok(sol)
    } else {
        Err(infeasible(inst, &[delta]))
    }
}

fn top_choice(inst: &FiniteInstance, i: usize, psi1: Option<&[f64]>) -> SimplexVector {
    let row = &inst.psi0[i];
    let mut best = 0;
    for j in 1..row.len() {
        let tie_better = psi1.is_some_and(|c| c[j] < c[best]);
        if row[j] > row[best] || (row[j] == row[best] && tie_better) {
            best = j;
        }
    }
    SimplexVector::one_hot(row.len(), best)
}

/// Upper hull of `(x, y)` points, left to right, as indices.
fn upper_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[b].total_cmp(&ys[a])).then(a.cmp(&b)));
    idx.dedup_by(|b, a| xs[*a] == xs[*b]);
    let mut hull: Vec<usize> = Vec::new();
    for &p in &idx {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[a] - xs[o]) * (ys[p] - ys[o]) - (ys[a] - ys[o]) * (xs[p] - xs[o]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

struct Move {
    ratio: f64,
    atom: usize,
    step: usize,
    from: usize,
    to: usize,
}

fn lp_greedy(inst: &FiniteInstance, delta: f64) -> Result<LpSolution> {
    let psi1 = &inst.constraints[0];
    let d = inst.dim();
    let mut choice = Vec::with_capacity(inst.len());
    let mut moves = Vec::new();
    for i in 0..inst.len() {
        let (x, y) = (&psi1[i], &inst.psi0[i]);
        let hull = upper_hull(x, y);
        // the top point: largest ψ0, then smallest ψ1
        let top = hull
            .iter()
            .copied()
            .fold(hull[0], |b, j| if y[j] > y[b] { j } else { b });
        let pos = hull.iter().position(|&j| j == top).expect("top on hull");
        choice.push(top);
        for (step, w) in hull[..=pos].windows(2).rev().enumerate() {
            let (to, from) = (w[0], w[1]);
            moves.push(Move {
                ratio: (y[from] - y[to]) / (x[from] - x[to]),
                atom: i,
                step,
                from,
                to,
            });
        }
    }
    moves.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.atom.cmp(&b.atom)).then(a.step.cmp(&b.step)));
    let mut value: f64 = (0..inst.len()).map(|i| inst.probs[i] * psi1[i][choice[i]]).sum();
    let mut policy: Vec<SimplexVector> = choice.iter().map(|&c| SimplexVector::one_hot(d, c)).collect();
    for mv in moves {
        if value <= delta {
            break;
        }
        let gain = inst.probs[mv.atom] * (psi1[mv.atom][mv.from] - psi1[mv.atom][mv.to]);
        if value - gain >= delta {
            value -= gain;
            policy[mv.atom] = SimplexVector::one_hot(d, mv.to);
        } else {
            let theta = (value - delta) / gain;
            let mut w = vec![0.0; d];
            w[mv.to] = theta;
            w[mv.from] = 1.0 - theta;
            policy[mv.atom] = SimplexVector::new(w)?;
            value = delta;
        }
    }
    if value > delta + 1e-12 {
        return Err(infeasible(inst, &[delta]));
    }
    Ok(finish(inst, policy))
}

/// Dense two-phase simplex with Bland's rule; requires `n·d ≤ SIMPLEX_CAP`.
pub fn lp_simplex(inst: &FiniteInstance, deltas: &[f64]) -> Result<LpSolution> {
    let (n, d) = (inst.len(), inst.dim());
    if n * d > SIMPLEX_CAP {
        return Err(Error::TooLarge(format!("simplex oracle limited to n·d ≤ {SIMPLEX_CAP}, got {}", n * d)));
    }
    let nv = n * d;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut is_le = Vec::new();
    for (j, cons) in inst.constraints.iter().enumerate() {
        let mut r = vec![0.0; nv];
        for i in 0..n {
            for c in 0..d {
                r[i * d + c] = inst.probs[i] * cons[i][c];
            }
        }
        rows.push(r);
        rhs.push(deltas[j]);
        is_le.push(true);
    }
    for i in 0..n {
        let mut r = vec![0.0; nv];
        r[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 1.0);
        rows.push(r);
        rhs.push(1.0);
        is_le.push(false);
    }
    let cost: Vec<f64> = (0..nv).map(|v| inst.probs[v / d] * inst.psi0[v / d][v % d]).collect();
    let x = simplex_max(&rows, &rhs, &is_le, &cost).ok_or_else(|| infeasible(inst, deltas))?;
    let policy = (0..n)
        .map(|i| {
            let w: Vec<f64> = x[i * d..(i + 1) * d].iter().map(|v| v.max(0.0)).collect();
            let s: f64 = w.iter().sum();
            SimplexVector::new(w.iter().map(|v| v / s).collect())
        })
        .collect::<Result<_>>()?;
    Ok(finish(inst, policy))
}

/// Maximizes `c·x` subject to rows (`≤` or `=`) and `x ≥ 0`; `None` when infeasible.
pub(crate) fn simplex_max(a: &[Vec<f64>], b: &[f64], is_le: &[bool], c: &[f64]) -> Option<Vec<f64>> {
    let m = a.len();
    let nv = c.len();
    let n_slack = is_le.iter().filter(|&&l| l).count();
    let art0 = nv + n_slack;
    let ncols = art0 + m;
    let mut t = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0; m];
    let mut slack = nv;
    for r in 0..m {
        t[r][..nv].copy_from_slice(&a[r]);
        if is_le[r] {
            t[r][slack] = 1.0;
            slack += 1;
        }
        t[r][ncols] = b[r];
        if b[r] < 0.0 {
            t[r].iter_mut().for_each(|v| *v = -*v);
        }
        t[r][art0 + r] = 1.0;
        basis[r] = art0 + r;
    }
    // phase 1: maximize −Σ artificials
    let mut z = vec![0.0; ncols + 1];
    for j in art0..ncols {
        z[j] = 1.0;
    }
    for row in &t {
        for (zj, v) in z.iter_mut().zip(row) {
            *zj -= v;
        }
    }
    run_simplex(&mut t, &mut z, &mut basis, ncols)?;
    if z[ncols] < -1e-9 {
        return None;
    }
    for r in 0..m {
        if basis[r] >= art0 {
            if let Some(j) = (0..art0).find(|&j| t[r][j].abs() > 1e-9) {
                pivot(&mut t, &mut z, &mut basis, r, j);
            }
        }
    }
    // phase 2
    let mut z = vec![0.0; ncols + 1];
    for j in 0..nv {
        z[j] = -c[j];
    }
    for r in 0..m {
        let cb = if basis[r] < nv { c[basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for (zj, v) in z.iter_mut().zip(&t[r]) {
                *zj += cb * v;
            }
        }
    }
    run_simplex(&mut t, &mut z, &mut basis, art0)?;
    let mut x = vec![0.0; nv];
    for r in 0..m {
        if basis[r] < nv {
            x[basis[r]] = t[r][ncols];
        }
    }
    Some(x)
}

/// Pivots until no column below `allowed` has a negative reduced cost.
fn run_simplex(t: &mut [Vec<f64>], z: &mut [f64], basis: &mut [usize], allowed: usize) -> Option<()> {
    let rhs = z.len() - 1;
    for _ in 0..100_000 {
        let Some(j) = (0..allowed).find(|&j| z[j] < -PIVOT_EPS) else {
            return Some(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..t.len() {
            if t[r][j] > PIVOT_EPS {
                let ratio = t[r][rhs] / t[r][j];
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => ratio < lratio - 1e-15 || (ratio <= lratio + 1e-15 && basis[r] < basis[lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let (r, _) = leave?;
        pivot(t, z, basis, r, j);
    }
    None
}

fn pivot(t: &mut [Vec<f64>], z: &mut [f64], basis: &mut [usize], r: usize, j: usize) {
    let pv = t[r][j];
    t[r].iter_mut().for_each(|v| *v /= pv);
    let prow = t[r].clone();
    for (k, row) in t.iter_mut().enumerate() {
        if k != r && row[j] != 0.0 {
            let f = row[j];
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
    }
    let f = z[j];
    if f != 0.0 {
        for (v, p) in z.iter_mut().zip(&prow) {
            *v -= f * p;
        }
    }
    basis[r] = j;
}

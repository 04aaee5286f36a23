//! Multi-constraint search over a grid of multiplier vectors, evaluating
//! the deterministic conservative predictor at every vertex.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tau::tie_tolerance;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Infeasibility, Result};
use crate::oracle::lp::simplex_max;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Log-spaced positive values per axis, in addition to 0.
    pub points: usize,
    pub min: f64,
    pub max: f64,
    /// Hard cap on the number of vertices.
    pub max_vertices: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 40,
            min: 1e-3,
            max: 1e2,
            max_vertices: 2_000_000,
        }
    }
}

impl GridSpec {
    /// `0`, then the log-spaced values, then (two-sided) their negatives.
    pub fn axis(&self, two_sided: bool) -> Vec<f64> {
        let mut v = vec![0.0];
        let pos: Vec<f64> = match self.points {
            0 => vec![],
            1 => vec![self.min],
            n => {
                let (a, b) = (self.min.ln(), self.max.ln());
                (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        };
        v.extend(&pos);
        if two_sided {
            v.extend(pos.iter().map(|x| -x));
        }
        v
    }
}

/// One evaluated grid vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub k: Vec<f64>,
    pub objective: f64,
    pub values: Vec<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSolution {
    pub best: Vertex,
    pub frontier: Vec<Vertex>,
}

/// A deterministic vertex used with probability `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub k: Vec<f64>,
}

/// Best randomization over frontier vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<MixtureComponent>,
    pub objective: f64,
    pub values: Vec<f64>,
}

pub(crate) fn satisfied(value: f64, delta: f64, two_sided: bool, tol: f64) -> bool {
    let v = if two_sided { value.abs() } else { value };
    v <= delta + tol
}

/// Index chosen by the deterministic conservative predictor for multipliers
/// `k`, where `block` holds `ψ0, ψ1, …, ψm` for one instance back to back.
fn select_index(block: &[f64], d: usize, k: &[f64], eps_tie: f64, score: &mut Vec<f64>) -> usize {
    score.clear();
    score.extend_from_slice(&block[..d]);
    for (j, kj) in k.iter().enumerate() {
        if *kj != 0.0 {
            let row = &block[(j + 1) * d..(j + 2) * d];
            for c in 0..d {
                score[c] -= kj * row[c];
            }
        }
    }
    let max = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_tolerance(score, eps_tie);
    let eff = |c: usize| k.iter().enumerate().map(|(j, kj)| kj * block[(j + 1) * d + c]).sum::<f64>();
    let mut best: Option<(usize, f64)> = None;
    for c in 0..d {
        if score[c] >= max - tol {
            let e = eff(c);
            if best.map_or(true, |(_, be)| e < be) {
                best = Some((c, e));
            }
        }
    }
    best.expect("non-empty argmax").0
}

/// Evaluates the deterministic predictor at every grid vertex.
pub fn grid_frontier(set: &EmbeddingSet, grid: &GridSpec, eps_tie: f64, tol: f64) -> Result<Vec<Vertex>> {
    let m = set.constraints.len();
    if set.is_empty() {
        return Err(Error::Invalid("no tuning instances".into()));
    }
    let axes: Vec<Vec<f64>> = set.constraints.iter().map(|c| grid.axis(c.two_sided)).collect();
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&t| t <= grid.max_vertices)
        .ok_or_else(|| Error::TooLarge(format!("grid over {m} constraints exceeds {} vertices", grid.max_vertices)))?;
    let n = set.len();
    let d = set.dim();
    let stride = (m + 1) * d;
    let mut flat = Vec::with_capacity(n * stride);
    for i in 0..n {
        flat.extend_from_slice(set.psi0.row(i));
        for c in &set.constraints {
            flat.extend_from_slice(c.psi.row(i));
        }
    }
    Ok((0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut k = Vec::with_capacity(m);
            for a in &axes {
                k.push(a[idx % a.len()]);
                idx /= a.len();
            }
            let mut score = Vec::with_capacity(d);
            let mut objective = 0.0;
            let mut values = vec![0.0; m];
            for block in flat.chunks_exact(stride) {
                let c = select_index(block, d, &k, eps_tie, &mut score);
                objective += block[c];
                for (j, v) in values.iter_mut().enumerate() {
                    *v += block[(j + 1) * d + c];
                }
            }
            objective /= n as f64;
            values.iter_mut().for_each(|v| *v /= n as f64);
            let feasible = set
                .constraints
                .iter()
                .zip(&values)
                .all(|(c, &v)| satisfied(v, c.delta, c.two_sided, tol));
            Vertex {
                k,
                objective,
                values,
                feasible,
            }
        })
        .collect())
}

/// Feasible vertex with the largest objective; the first one wins ties.
pub fn best_vertex(frontier: &[Vertex]) -> Option<&Vertex> {
    frontier.iter().filter(|v| v.feasible).fold(None, |b, v| match b {
        Some(b) if b.objective >= v.objective => Some(b),
        _ => Some(v),
    })
}

/// Infeasibility diagnostic: the smallest value each constraint reaches on the grid.
pub fn grid_infeasibility(set: &EmbeddingSet, frontier: &[Vertex]) -> Error {
    Error::NotFeasible(Infeasibility {
        constraints: set.constraints.iter().map(|c| c.label.clone()).collect(),
        deltas: set.constraints.iter().map(|c| c.delta).collect(),
        min_achievable: set
            .constraints
            .iter()
            .enumerate()
            .map(|(j, c)| {
                frontier
                    .iter()
                    .map(|v| if c.two_sided { v.values[j].abs() } else { v.values[j] })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    })
}

/// Best feasible grid vertex for all constraints of `set`.
pub fn solve_multi(set: &EmbeddingSet, grid: &GridSpec, eps_tie: f64, tol: f64) -> Result<MultiSolution> {
    let frontier = grid_frontier(set, grid, eps_tie, tol)?;
    match best_vertex(&frontier).cloned() {
        Some(best) => Ok(MultiSolution { best, frontier }),
        None => Err(grid_infeasibility(set, &frontier)),
    }
}

/// Weights over frontier vertices maximizing the mean objective subject to
/// the constraints holding for the mixture; `None` when no mixture is feasible.
pub fn mix_frontier(set: &EmbeddingSet, frontier: &[Vertex], tol: f64) -> Option<Mixture> {
    let m = set.constraints.len();
    // identical vertices only add columns
    let mut cand: Vec<&Vertex> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in frontier {
        let key: Vec<u64> = std::iter::once(v.objective).chain(v.values.iter().copied()).map(f64::to_bits).collect();
        if seen.insert(key) {
            cand.push(v);
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut is_le = Vec::new();
    for (j, c) in set.constraints.iter().enumerate() {
        a.push(cand.iter().map(|v| v.values[j]).collect());
        b.push(c.delta);
        is_le.push(true);
        if c.two_sided {
            a.push(cand.iter().map(|v| -v.values[j]).collect());
            b.push(c.delta);
            is_le.push(true);
        }
    }
    a.push(vec![1.0; cand.len()]);
    b.push(1.0);
    is_le.push(false);
    let obj: Vec<f64> = cand.iter().map(|v| v.objective).collect();
    let lambda = simplex_max(&a, &b, &is_le, &obj)?;
    let mut components: Vec<(f64, &Vertex)> =
        lambda.iter().zip(&cand).filter(|(w, _)| **w > 1e-12).map(|(&w, &v)| (w, v)).collect();
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    components.iter_mut().for_each(|(w, _)| *w /= total);
    components.sort_by(|x, y| y.0.total_cmp(&x.0));
    let objective = components.iter().map(|(w, v)| w * v.objective).sum();
    let values: Vec<f64> = (0..m).map(|j| components.iter().map(|(w, v)| w * v.values[j]).sum()).collect();
    let ok = set
        .constraints
        .iter()
        .zip(&values)
        .all(|(c, &v)| satisfied(v, c.delta, c.two_sided, tol.max(1e-9)));
    ok.then(|| Mixture {
        components: components
            .into_iter()
            .map(|(weight, v)| MixtureComponent { weight, k: v.k.clone() })
            .collect(),
        objective,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{Constraint, ConstraintKind, Embedding};

    fn set(deltas: &[f64]) -> EmbeddingSet {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let b = 0.55 + 0.05 * i as f64;
                vec![b, 1.0 - b, b + 0.2 - 0.04 * i as f64]
            })
            .collect();
        let psi0 = Embedding::from_rows(&rows).unwrap();
        let constraints = deltas
            .iter()
            .map(|&d| Constraint {
                label: "budget".into(),
                kind: ConstraintKind::Budget,
                psi: Embedding::constant(8, &[0.0, 0.0, 1.0]),
                delta: d,
                two_sided: false,
            })
            .collect();
        EmbeddingSet::new(psi0, constraints).unwrap()
    }

    #[test]
    fn axis_has_zero_and_log_points() {
        let a = GridSpec::default().axis(true);
        assert_eq!(a.len(), 81);
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 1e-3).abs() < 1e-15 && (a[40] - 1e2).abs() < 1e-9);
    }

    #[test]
    fn vacuous_constraints_pick_origin() {
        let s = solve_multi(&set(&[f64::INFINITY, f64::INFINITY]), &GridSpec::default(), 1e-12, 1e-12).unwrap();
        assert_eq!(s.best.k, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicated_budget_is_respected() {
        let s = solve_multi(&set(&[0.25, 0.25]), &GridSpec::default(), 1e-12, 1e-12).unwrap();
        assert!(s.best.values.iter().all(|&v| v <= 0.25));
        assert!(s.frontier.len() == 41 * 41);
    }

    #[test]
    fn vertex_cap() {
        let g = GridSpec { max_vertices: 100, ..GridSpec::default() };
        assert!(matches!(solve_multi(&set(&[0.2, 0.2]), &g, 1e-12, 1e-12), Err(Error::TooLarge(_))));
    }

    fn identical(n: usize, deltas: &[f64]) -> EmbeddingSet {
        let psi0 = Embedding::constant(n, &[0.6, 0.4, 0.9]);
        let constraints = deltas
            .iter()
            .map(|&d| Constraint {
                label: "budget".into(),
                kind: ConstraintKind::Budget,
                psi: Embedding::constant(n, &[0.0, 0.0, 1.0]),
                delta: d,
                two_sided: false,
            })
            .collect();
        EmbeddingSet::new(psi0, constraints).unwrap()
    }

    #[test]
    fn mixture_splits_identical_instances() {
        let set = identical(4, &[0.5, 0.5]);
        let f = grid_frontier(&set, &GridSpec::default(), 1e-12, 1e-12).unwrap();
        assert_eq!(best_vertex(&f).unwrap().objective, 0.6);
        let m = mix_frontier(&set, &f, 1e-12).unwrap();
        assert!((m.objective - 0.75).abs() < 1e-12, "{m:?}");
        assert!(m.values.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!((m.components.iter().map(|c| c.weight).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_absent_when_nothing_is_feasible() {
        let set = identical(4, &[-0.1, 0.5]);
        let f = grid_frontier(&set, &GridSpec::default(), 1e-12, 1e-12).unwrap();
        assert!(mix_frontier(&set, &f, 1e-12).is_none());
        assert!(matches!(solve_multi(&set, &GridSpec::default(), 1e-12, 1e-12), Err(Error::NotFeasible(_))));
    }
}

//! Fitted deferral policies: the parametric predictor `f_{k,p}`, its
//! serialized form, per-instance decisions and evaluation.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::multi::{best_vertex, grid_frontier, grid_infeasibility, mix_frontier, GridSpec, MixtureComponent};
use super::single::{solve_single, SolverOptions};
use super::tau::tau_select;
use crate::bootstrap::{bootstrap, Interval};
use crate::dataset::LabeledDataset;
use crate::decision::{DeferralDecision, SimplexVector};
use crate::embeddings::{empirical_constraint_value, ConstraintKind, EmbeddingSet};
use crate::error::{Error, Result};
use crate::metrics::{expected_accuracy, expected_deferral_rate, violation, EvalReport};

/// `f_{k,p}`: argmax of `ψ0 − Σ_j k_j ψ_j` with ties split `p` / `1 − p`
/// between the max-`ψ0` and min-`Σ_j k_j ψ_j` selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricPredictor {
    /// Signed multipliers, one per constraint of the embedding set.
    pub k: Vec<f64>,
    pub p: f64,
    pub eps_tie: f64,
}

impl ParametricPredictor {
    /// Score vector `s(x)` and combined constraint row `Σ_j k_j ψ_j(x)`.
    pub fn score(&self, set: &EmbeddingSet, i: usize) -> (Vec<f64>, Vec<f64>) {
        let psi0 = set.psi0.row(i);
        let mut eff = vec![0.0; psi0.len()];
        for (c, kj) in set.constraints.iter().zip(&self.k) {
            for (e, v) in eff.iter_mut().zip(c.psi.row(i)) {
                *e += kj * v;
            }
        }
        let score = psi0.iter().zip(&eff).map(|(a, b)| a - b).collect();
        (score, eff)
    }

    pub fn output(&self, set: &EmbeddingSet, i: usize) -> SimplexVector {
        let (score, eff) = self.score(set, i);
        tau_select(&score, set.psi0.row(i), &eff, self.p, self.eps_tie)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Randomized,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConstraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub delta: f64,
    pub two_sided: bool,
    /// Orientation that was solved: `+1`, or `−1` when the lower side binds.
    pub sign: f64,
}

/// Diagnostics recorded at fit time on the tuning data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n_tuning: usize,
    pub objective: f64,
    pub constraint_values: Vec<f64>,
    pub feasible: bool,
    /// Single constraint only: `C(k̂)` and its left limit.
    pub curve_value: Option<f64>,
    pub curve_left: Option<f64>,
    pub exact_curve: bool,
    pub monotone_curve: bool,
    /// Multi-constraint grid frontier size.
    pub grid_vertices: usize,
}

/// A fitted rule producing `h*(x)` and `r*(x)` from embedding rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferralPolicy {
    pub predictor: ParametricPredictor,
    pub mode: PolicyMode,
    pub num_classes: usize,
    pub constraints: Vec<PolicyConstraint>,
    pub schema_hash: String,
    pub min_jump: f64,
    pub summary: FitSummary,
    /// Randomization over deterministic grid vertices; empty unless several
    /// constraints are only met, or better met, by mixing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixture: Vec<MixtureComponent>,
}

/// Hash of the embedding layout a policy can be applied to.
pub fn schema_hash(set: &EmbeddingSet) -> String {
    let mut h = Sha256::new();
    h.update(format!("d={}", set.dim()));
    for c in &set.constraints {
        h.update(format!(";{}:{}", c.label, c.two_sided));
    }
    hex::encode(h.finalize())
}

/// Fits the policy on tuning embeddings: closed-form search for zero or one
/// constraint, grid search for several.
pub fn fit_policy(set: &EmbeddingSet, mode: PolicyMode, opts: &SolverOptions, grid: &GridSpec) -> Result<DeferralPolicy> {
    if set.is_empty() {
        return Err(Error::Invalid("no tuning instances".into()));
    }
    let mut summary = FitSummary {
        n_tuning: set.len(),
        objective: 0.0,
        constraint_values: vec![],
        feasible: true,
        curve_value: None,
        curve_left: None,
        exact_curve: true,
        monotone_curve: true,
        grid_vertices: 0,
    };
    let mut signs = vec![1.0; set.constraints.len()];
    let mut mixture = Vec::new();
    let (k, p) = match set.constraints.len() {
        0 => (vec![], 0.0),
        1 => {
            let c = &set.constraints[0];
            let s = solve_single(&set.psi0, &c.psi, c.delta, c.two_sided, &c.label, opts)?;
            if !s.monotone {
                return Err(Error::Invalid(format!("constraint curve for `{}` is not monotone", c.label)));
            }
            signs[0] = s.sign;
            summary.curve_value = Some(s.curve_value);
            summary.curve_left = Some(s.curve_left);
            summary.exact_curve = s.exact_curve;
            (vec![s.k], s.p)
        }
        _ => {
            let frontier = grid_frontier(set, grid, opts.eps_tie, opts.feasibility_tol)?;
            summary.grid_vertices = frontier.len();
            let best = best_vertex(&frontier);
            let mix = match mode {
                PolicyMode::Randomized => mix_frontier(set, &frontier, opts.feasibility_tol)
                    .filter(|m| m.components.len() > 1 && best.map_or(true, |b| m.objective > b.objective + 1e-12)),
                PolicyMode::Deterministic => None,
            };
            let k = match (&mix, best) {
                (Some(m), _) => m.components[0].k.clone(),
                (None, Some(b)) => b.k.clone(),
                (None, None) => return Err(grid_infeasibility(set, &frontier)),
            };
            for (s, kj) in signs.iter_mut().zip(&k) {
                if *kj < 0.0 {
                    *s = -1.0;
                }
            }
            mixture = mix.map(|m| m.components).unwrap_or_default();
            (k, 0.0)
        }
    };
    let mut policy = DeferralPolicy {
        predictor: ParametricPredictor {
            k,
            p,
            eps_tie: opts.eps_tie,
        },
        mode,
        num_classes: set.dim() - 1,
        constraints: set
            .constraints
            .iter()
            .zip(&signs)
            .map(|(c, &sign)| PolicyConstraint {
                label: c.label.clone(),
                kind: c.kind.clone(),
                delta: c.delta,
                two_sided: c.two_sided,
                sign,
            })
            .collect(),
        schema_hash: schema_hash(set),
        min_jump: opts.min_jump,
        summary,
        mixture,
    };
    let outputs = policy.outputs(set)?;
    policy.summary.objective = set.psi0.mean_dot(&outputs);
    policy.summary.constraint_values = set.constraints.iter().map(|c| c.psi.mean_dot(&outputs)).collect();
    Ok(policy)
}

impl DeferralPolicy {
    pub fn check_schema(&self, set: &EmbeddingSet) -> Result<()> {
        let h = schema_hash(set);
        if h != self.schema_hash {
            return Err(Error::Structure(format!(
                "embedding layout {} does not match the policy's {}",
                &h[..12],
                &self.schema_hash[..12]
            )));
        }
        Ok(())
    }

    /// `f(x_i)`: the randomized output, or the one-hot deterministic decision.
    pub fn output(&self, set: &EmbeddingSet, i: usize) -> SimplexVector {
        match self.mode {
            PolicyMode::Randomized if !self.mixture.is_empty() => self.mixture_output(set, i),
            PolicyMode::Randomized => self.predictor.output(set, i),
            PolicyMode::Deterministic => self.decide_deterministic(set, i).to_simplex(self.num_classes),
        }
    }

    fn mixture_output(&self, set: &EmbeddingSet, i: usize) -> SimplexVector {
        let mut w = vec![0.0; set.dim()];
        for c in &self.mixture {
            let f = ParametricPredictor { k: c.k.clone(), p: 0.0, eps_tie: self.predictor.eps_tie }.output(set, i);
            for (a, b) in w.iter_mut().zip(f.weights()) {
                *a += c.weight * b;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v = (*v / total).clamp(0.0, 1.0));
        SimplexVector::new(w).expect("convex combination of simplex vectors")
    }

    pub fn outputs(&self, set: &EmbeddingSet) -> Result<Vec<SimplexVector>> {
        use rayon::prelude::*;
        self.check_schema(set)?;
        Ok((0..set.len()).into_par_iter().map(|i| self.output(set, i)).collect())
    }

    /// `h*(x) = argmax_{c<L} s_c(x)`, `r*(x) = 1{s_L(x) > s_{h*}(x)}`.
    pub fn decide_deterministic(&self, set: &EmbeddingSet, i: usize) -> DeferralDecision {
        let (score, _) = self.predictor.score(set, i);
        let l = self.num_classes;
        let h = (1..l).fold(0, |b, c| if score[c] > score[b] { c } else { b });
        if score[l] > score[h] {
            DeferralDecision::defer(h)
        } else {
            DeferralDecision::predict(h)
        }
    }

    /// Samples from `f(x_i)`; zero class mass falls back to the argmax of
    /// the objective's class coordinates.
    pub fn decide<R: Rng + ?Sized>(&self, set: &EmbeddingSet, i: usize, rng: &mut R) -> DeferralDecision {
        match self.mode {
            PolicyMode::Deterministic => self.decide_deterministic(set, i),
            PolicyMode::Randomized => {
                let psi0 = set.psi0.row(i);
                let l = self.num_classes;
                let fallback = (1..l).fold(0, |b, c| if psi0[c] > psi0[b] { c } else { b });
                self.output(set, i).sample(rng, fallback)
            }
        }
    }

    /// Multipliers of the closed-form solution, the deterministic grid vertex,
    /// or the heaviest mixture component.
    pub fn multipliers(&self) -> &[f64] {
        &self.predictor.k
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Options for [`evaluate_policy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// `0` disables the bootstrap.
    pub bootstrap_iterations: usize,
    pub seed: u64,
}

/// Plug-in and label-based metrics of `policy` on `set`, whose rows align with `ds`.
pub fn evaluate_policy(
    policy: &DeferralPolicy,
    set: &EmbeddingSet,
    ds: &LabeledDataset,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if ds.len() != set.len() {
        return Err(Error::Structure(format!("{} records for {} embedding rows", ds.len(), set.len())));
    }
    let outputs = policy.outputs(set)?;
    let labels: Vec<String> = set.constraints.iter().map(|c| c.label.clone()).collect();
    let deltas: Vec<f64> = set.constraints.iter().map(|c| c.delta).collect();
    let two_sided: Vec<bool> = set.constraints.iter().map(|c| c.two_sided).collect();
    let embedded_values: Vec<f64> = set.constraints.iter().map(|c| c.psi.mean_dot(&outputs)).collect();
    let constraint_values = set
        .constraints
        .iter()
        .map(|c| empirical_constraint_value(ds, &outputs, c))
        .collect::<Result<Vec<_>>>()?;
    let violations = constraint_values
        .iter()
        .zip(&deltas)
        .zip(&two_sided)
        .map(|((&v, &d), &t)| violation(v, d, t))
        .collect();
    let bootstrap_intervals = if opts.bootstrap_iterations > 0 {
        let intervals: Vec<Interval> = bootstrap(ds.len(), opts.bootstrap_iterations, opts.seed, |idx| {
            let sub = ds.subset(idx);
            let out: Vec<SimplexVector> = idx.iter().map(|&i| outputs[i].clone()).collect();
            let sub_set = set.subset(idx);
            let mut m = vec![expected_accuracy(&sub, &out)?, expected_deferral_rate(&out)];
            for c in &sub_set.constraints {
                m.push(empirical_constraint_value(&sub, &out, c)?);
            }
            Ok(m)
        })?;
        let names = ["accuracy".to_string(), "deferral_rate".to_string()]
            .into_iter()
            .chain(labels.iter().cloned());
        Some(names.zip(intervals).collect())
    } else {
        None
    };
    Ok(EvalReport {
        n: ds.len(),
        objective: set.psi0.mean_dot(&outputs),
        constraint_labels: labels,
        deltas,
        two_sided,
        constraint_values,
        embedded_values,
        violations,
        deferral_rate: expected_deferral_rate(&outputs),
        accuracy: expected_accuracy(ds, &outputs)?,
        bootstrap_intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{Constraint, Embedding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set_with(psi0: Vec<Vec<f64>>, delta: f64) -> EmbeddingSet {
        let n = psi0.len();
        EmbeddingSet::new(
            Embedding::from_rows(&psi0).unwrap(),
            vec![Constraint {
                label: "budget".into(),
                kind: ConstraintKind::Budget,
                psi: Embedding::constant(n, &[0.0, 0.0, 1.0]),
                delta,
                two_sided: false,
            }],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_rule_reads_score() {
        let set = EmbeddingSet::new(Embedding::from_rows(&[vec![0.5, 0.2, 0.3]]).unwrap(), vec![]).unwrap();
        let pol = fit_policy(&set, PolicyMode::Deterministic, &SolverOptions::default(), &GridSpec::default()).unwrap();
        assert_eq!(pol.decide_deterministic(&set, 0), DeferralDecision::predict(0));
    }

    #[test]
    fn one_hot_defer_always_defers() {
        let set = set_with(vec![vec![0.1, 0.2, 0.9]], 1.0);
        let pol = fit_policy(&set, PolicyMode::Randomized, &SolverOptions::default(), &GridSpec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..50).all(|_| pol.decide(&set, 0, &mut rng).deferred));
    }

    #[test]
    fn tie_randomization_frequency() {
        // two identical instances; budget 0.5 defers each with probability 1/2
        let set = set_with(vec![vec![0.6, 0.4, 0.9], vec![0.6, 0.4, 0.9]], 0.5);
        let pol = fit_policy(&set, PolicyMode::Randomized, &SolverOptions::default(), &GridSpec::default()).unwrap();
        assert!((pol.predictor.p - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 10_000;
        let hits = (0..trials).filter(|_| pol.decide(&set, 0, &mut rng).deferred).count() as f64;
        let sigma = (0.25 / trials as f64).sqrt();
        assert!((hits / trials as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let set = set_with(vec![vec![0.6, 0.4, 0.9], vec![0.3, 0.7, 0.5]], 0.3);
        let pol = fit_policy(&set, PolicyMode::Randomized, &SolverOptions::default(), &GridSpec::default()).unwrap();
        let back = DeferralPolicy::from_json(&pol.to_json().unwrap()).unwrap();
        assert_eq!(back, pol);
        let other = EmbeddingSet::new(set.psi0.clone(), vec![]).unwrap();
        assert!(back.outputs(&other).is_err());
    }

    #[test]
    fn randomized_multi_constraint_policy_mixes_vertices() {
        let n = 4;
        let budget = |d| Constraint {
            label: "budget".into(),
            kind: ConstraintKind::Budget,
            psi: Embedding::constant(n, &[0.0, 0.0, 1.0]),
            delta: d,
            two_sided: false,
        };
        let set = EmbeddingSet::new(Embedding::constant(n, &[0.6, 0.4, 0.9]), vec![budget(0.5), budget(0.7)]).unwrap();
        let opts = SolverOptions::default();
        let pol = fit_policy(&set, PolicyMode::Randomized, &opts, &GridSpec::default()).unwrap();
        assert!(pol.mixture.len() > 1);
        assert!((pol.summary.objective - 0.75).abs() < 1e-12);
        assert!((pol.output(&set, 0).defer_mass() - 0.5).abs() < 1e-12);
        assert_eq!(DeferralPolicy::from_json(&pol.to_json().unwrap()).unwrap(), pol);
        let det = fit_policy(&set, PolicyMode::Deterministic, &opts, &GridSpec::default()).unwrap();
        assert!(det.mixture.is_empty());
        assert_eq!(det.summary.objective, 0.6);
    }
}

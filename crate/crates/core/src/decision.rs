use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-9;

/// A randomized policy output on one instance: masses on classes `0..L`
/// followed by the defer mass in the last coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Invalid("simplex vector needs at least one class and a defer slot".into()));
        }
        if weights.iter().any(|w| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(w)) {
            return Err(Error::Invalid(format!("simplex entry outside [0,1]: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Invalid(format!("simplex entries sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn one_hot(d: usize, index: usize) -> Self {
        let mut w = vec![0.0; d];
        w[index] = 1.0;
        Self(w)
    }

    /// Mass `p` on `first`, `1 - p` on `second`; collapses to one-hot when equal.
    pub(crate) fn two_point(d: usize, first: usize, p: f64, second: usize) -> Self {
        let mut w = vec![0.0; d];
        w[first] += p;
        w[second] += 1.0 - p;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn num_classes(&self) -> usize {
        self.0.len() - 1
    }

    pub fn defer_mass(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn class_mass(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn dot(&self, psi: &[f64]) -> f64 {
        self.0.iter().zip(psi).map(|(a, b)| a * b).sum()
    }

    /// Probability that the composed system outputs class `c` when the expert says `expert`.
    pub fn output_prob(&self, c: usize, expert: usize) -> f64 {
        self.0[c] + if expert == c { self.defer_mass() } else { 0.0 }
    }

    /// Draws a decision: defer with the defer mass, else class `i` with
    /// probability proportional to its mass. Zero class mass falls back to
    /// `fallback_class`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, fallback_class: usize) -> DeferralDecision {
        let u: f64 = rng.gen();
        if u < self.defer_mass() {
            return DeferralDecision::defer(fallback_class);
        }
        let classes = self.class_mass();
        let total: f64 = classes.iter().sum();
        if total <= 0.0 {
            return DeferralDecision::predict(fallback_class);
        }
        let mut v: f64 = rng.gen::<f64>() * total;
        for (i, &m) in classes.iter().enumerate() {
            if v < m {
                return DeferralDecision::predict(i);
            }
            v -= m;
        }
        let last = classes.iter().rposition(|&m| m > 0.0).unwrap_or(fallback_class);
        DeferralDecision::predict(last)
    }
}

/// Realized outcome for one instance: `r(x)` and `h(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeferralDecision {
    pub deferred: bool,
    /// Classifier output; only meaningful when `deferred` is false.
    pub predicted_class: usize,
}

impl DeferralDecision {
    pub fn defer(placeholder_class: usize) -> Self {
        Self {
            deferred: true,
            predicted_class: placeholder_class,
        }
    }

    pub fn predict(class: usize) -> Self {
        Self {
            deferred: false,
            predicted_class: class,
        }
    }

    /// The system output `Ŷ = r·m + (1 − r)·h`.
    pub fn output(&self, expert: usize) -> usize {
        if self.deferred {
            expert
        } else {
            self.predicted_class
        }
    }

    /// The degenerate simplex vector realizing this decision.
    pub fn to_simplex(&self, num_classes: usize) -> SimplexVector {
        let idx = if self.deferred { num_classes } else { self.predicted_class };
        SimplexVector::one_hot(num_classes + 1, idx)
    }
}

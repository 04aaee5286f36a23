//! 0-1 knapsack and its reduction to deterministic budgeted deferral.

use super::lp::FiniteInstance;
use crate::error::{Error, Result};

/// Largest item count accepted by the `2^n` enumerations.
pub const BRUTE_FORCE_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub capacity: f64,
}

impl KnapsackInstance {
    pub fn new(values: Vec<f64>, weights: Vec<f64>, capacity: f64) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Structure("values and weights must be non-empty and aligned".into()));
        }
        if values.iter().chain(&weights).any(|&v| !(v > 0.0)) || !(capacity > 0.0) {
            return Err(Error::Invalid("knapsack values, weights and capacity must be positive".into()));
        }
        Ok(Self {
            values,
            weights,
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Optimum by enumerating all `2^n` subsets.
    pub fn brute_force(&self) -> Result<f64> {
        let n = self.len();
        check_cap(n)?;
        let mut best = 0.0f64;
        for mask in 0u64..(1u64 << n) {
            let (mut v, mut w) = (0.0, 0.0);
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    v += self.values[i];
                    w += self.weights[i];
                }
            }
            if w <= self.capacity {
                best = best.max(v);
            }
        }
        Ok(best)
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge(format!("brute force limited to {BRUTE_FORCE_CAP} items, got {n}")));
    }
    Ok(())
}

/// The reduced deferral instance with its budget and the affine map back
/// to knapsack values.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    /// One class (`h ≡ 0`) plus the defer slot; the expert is always right.
    pub instance: FiniteInstance,
    pub budget: f64,
    /// Objective of deferring nothing.
    pub offset: f64,
    /// Multiply `objective − offset` by this to get the knapsack value.
    pub scale: f64,
}

impl Reduction {
    pub fn to_knapsack_value(&self, objective: f64) -> f64 {
        (objective - self.offset) * self.scale
    }
}

/// Item `i` becomes an atom of mass `w_i/Σw` whose classifier loss is
/// `ℓ_i = (c_i/w_i)/Σ_j(c_j/w_j)`; the budget is `K/Σw`.
pub fn knapsack_to_l2d(kp: &KnapsackInstance) -> Result<Reduction> {
    let sw: f64 = kp.weights.iter().sum();
    let sr: f64 = kp.values.iter().zip(&kp.weights).map(|(c, w)| c / w).sum();
    let ell: Vec<f64> = kp.values.iter().zip(&kp.weights).map(|(c, w)| (c / w) / sr).collect();
    let probs: Vec<f64> = kp.weights.iter().map(|w| w / sw).collect();
    let offset = probs.iter().zip(&ell).map(|(p, l)| p * (1.0 - l)).sum();
    let n = kp.len();
    let mut probs = probs;
    // absorb rounding so the atoms sum to one
    let drift = 1.0 - probs.iter().sum::<f64>();
    probs[n - 1] += drift;
    let instance = FiniteInstance::new(
        probs,
        ell.iter().map(|l| vec![1.0 - l, 1.0]).collect(),
        vec![vec![vec![0.0, 1.0]; n]],
    )?;
    Ok(Reduction {
        instance,
        budget: kp.capacity / sw,
        offset,
        scale: sw * sr,
    })
}

/// Best objective over deterministic policies meeting `Σ p_i⟨f_i, ψ1_i⟩ ≤ b`,
/// by enumerating all `d^n` one-hot assignments.
pub fn l2d_brute(inst: &FiniteInstance, b: f64) -> Result<f64> {
    let (n, d) = (inst.len(), inst.dim());
    if inst.constraints.len() != 1 {
        return Err(Error::Invalid("brute force expects a single constraint".into()));
    }
    let total = (d as f64).powi(n as i32);
    if total > (1u64 << BRUTE_FORCE_CAP) as f64 {
        return Err(Error::TooLarge(format!("{d}^{n} assignments exceed the enumeration cap")));
    }
    let psi1 = &inst.constraints[0];
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; n];
    loop {
        let mut c = 0.0;
        let mut obj = 0.0;
        for i in 0..n {
            c += inst.probs[i] * psi1[i][choice[i]];
            obj += inst.probs[i] * inst.psi0[i][choice[i]];
        }
        if c <= b + 1e-12 {
            best = best.max(obj);
        }
        // next assignment in mixed radix
        let mut i = 0;
        while i < n {
            choice[i] += 1;
            if choice[i] < d {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Invalid("no deterministic policy meets the budget".into()));
    }
    Ok(best)
}

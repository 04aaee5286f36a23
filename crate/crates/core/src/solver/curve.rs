//! The constraint curve `C(t) = mean ⟨f_{t,0}(x), ψ1(x)⟩` of the conservative
//! tie-break predictor, computed exactly from per-instance upper envelopes.
//!
//! For each instance the lines `t ↦ ψ0_i − t·ψ1_i` are swept from `t = 0`
//! upward; every change of the selected line is an event lowering `C`.

use rayon::prelude::*;

use super::tau::{tau_select, EPS_TIE};
use crate::decision::SimplexVector;
use crate::embeddings::Embedding;
use crate::error::{Error, Result};

/// Breakpoints closer than this are merged.
pub const BREAKPOINT_DEDUP: f64 = 1e-12;
/// Pairs whose constraint coordinates differ by less than this never cross.
pub const MIN_DENOMINATOR: f64 = 1e-12;
/// Default cap on `n·d²` for the exact sweep.
pub const DEFAULT_BREAKPOINT_CAP: usize = 10_000_000;
/// Left-limit probe used when the exact sweep is unavailable.
pub const LEFT_PROBE: f64 = 1e-8;

/// Piecewise-constant, right-continuous, non-increasing curve on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCurve {
    /// `C(0)`.
    pub at_zero: f64,
    /// Sorted positive multipliers where `C` drops.
    pub breakpoints: Vec<f64>,
    /// `C` at each breakpoint (and to the right of it, up to the next).
    pub values: Vec<f64>,
}

impl ConstraintCurve {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => self.at_zero,
            j => self.values[j - 1],
        }
    }

    /// `lim_{τ↑b_j} C(τ)`.
    pub fn left_limit(&self, j: usize) -> f64 {
        if j == 0 {
            self.at_zero
        } else {
            self.values[j - 1]
        }
    }

    /// Smallest value the curve reaches.
    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.at_zero)
    }

    /// Number of successive increases larger than `tol`.
    pub fn monotonicity_violations(&self, tol: f64) -> usize {
        let mut prev = self.at_zero;
        let mut bad = 0;
        for &v in &self.values {
            if v > prev + tol {
                bad += 1;
            }
            prev = v;
        }
        bad
    }
}

/// Index selected by `f_{0,0}`: argmax of `psi0`, ties to the smallest `psi1`.
fn start_index(psi0: &[f64], psi1: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..psi0.len() {
        if psi0[j] > psi0[best] || (psi0[j] == psi0[best] && psi1[j] < psi1[best]) {
            best = j;
        }
    }
    best
}

/// Events `(t, Δψ1)` of one instance's envelope over `t > 0`, with
/// changes at `t ≤ BREAKPOINT_DEDUP` folded into the starting index.
fn envelope_events(psi0: &[f64], psi1: &[f64], out: &mut Vec<(f64, f64)>) -> usize {
    let mut cur = start_index(psi0, psi1);
    let mut t = 0.0f64;
    let mut start = cur;
    loop {
        let mut next: Option<(f64, usize)> = None;
        for j in 0..psi0.len() {
            let den = psi1[cur] - psi1[j];
            if den <= MIN_DENOMINATOR {
                continue;
            }
            let k = ((psi0[cur] - psi0[j]) / den).max(t);
            let better = match next {
                None => true,
                Some((kb, b)) => k < kb || (k == kb && psi1[j] < psi1[b]),
            };
            if better {
                next = Some((k, j));
            }
        }
        let Some((k, j)) = next else { break };
        if k <= BREAKPOINT_DEDUP {
            start = j;
        } else {
            out.push((k, psi1[j] - psi1[cur]));
        }
        cur = j;
        t = k;
    }
    start
}

/// Exact curve from envelope sweeps over all instances.
pub fn constraint_curve(psi0: &Embedding, psi1: &Embedding) -> Result<ConstraintCurve> {
    constraint_curve_capped(psi0, psi1, DEFAULT_BREAKPOINT_CAP)
}

pub fn constraint_curve_capped(psi0: &Embedding, psi1: &Embedding, cap: usize) -> Result<ConstraintCurve> {
    check_shapes(psi0, psi1)?;
    let n = psi0.len();
    let d = psi0.dim();
    if n.saturating_mul(d * d) > cap {
        return Err(Error::TooLarge(format!("{n} instances of width {d} exceed the breakpoint cap {cap}")));
    }
    let w = 1.0 / n as f64;
    let per: Vec<(f64, Vec<(f64, f64)>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (psi0.row(i), psi1.row(i));
            let mut ev = Vec::new();
            let s = envelope_events(a, b, &mut ev);
            (b[s], ev)
        })
        .collect();
    let at_zero = per.iter().map(|(v, _)| v).sum::<f64>() * w;
    let mut events: Vec<(f64, f64)> = per.into_iter().flat_map(|(_, e)| e).collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut breakpoints: Vec<f64> = Vec::new();
    let mut drops: Vec<f64> = Vec::new();
    for (k, delta) in events {
        match breakpoints.last() {
            Some(&last) if k - last <= BREAKPOINT_DEDUP => *drops.last_mut().expect("paired") += delta * w,
            _ => {
                breakpoints.push(k);
                drops.push(delta * w);
            }
        }
    }
    let mut values = Vec::with_capacity(drops.len());
    let mut acc = at_zero;
    for dlt in drops {
        acc += dlt;
        values.push(acc);
    }
    Ok(ConstraintCurve {
        at_zero,
        breakpoints,
        values,
    })
}

fn check_shapes(psi0: &Embedding, psi1: &Embedding) -> Result<()> {
    if psi0.dim() != psi1.dim() || psi0.len() != psi1.len() {
        return Err(Error::Structure("objective and constraint embeddings differ in shape".into()));
    }
    if psi0.is_empty() {
        return Err(Error::Invalid("constraint curve over no instances".into()));
    }
    Ok(())
}

/// Policy outputs of `f_{t,p}` on every instance.
pub fn predictor_outputs(psi0: &Embedding, psi1: &Embedding, t: f64, p: f64, eps_tie: f64) -> Vec<SimplexVector> {
    (0..psi0.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = (psi0.row(i), psi1.row(i));
            let score: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - t * y).collect();
            tau_select(&score, a, b, p, eps_tie)
        })
        .collect()
}

/// `C(t)` by direct evaluation of `f_{t,0}`.
pub fn direct_value(psi0: &Embedding, psi1: &Embedding, t: f64) -> f64 {
    psi1.mean_dot(&predictor_outputs(psi0, psi1, t, 0.0, EPS_TIE))
}

/// Smallest `t` on `[0, t_max]` with `C(t) ≤ δ`, located by doubling and
/// bisection on direct evaluations. Used when the exact sweep is too large.
pub fn bisect_threshold(psi0: &Embedding, psi1: &Embedding, delta: f64, iterations: usize) -> Option<f64> {
    let c = |t| direct_value(psi0, psi1, t);
    if c(0.0) <= delta {
        return Some(0.0);
    }
    let mut hi = 1e-6;
    while c(hi) > delta {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if hi <= 1e-6 {
        lo = 0.0;
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if c(mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

//! Deterministic budgeted deferral: defer the records where the expert
//! gains most, up to `⌊b·n⌋` of them.

use crate::error::{Error, Result};

/// Deferral flags for per-record expert losses `human` and classifier
/// losses `ai`. Only records with `ℓ_H − ℓ_AI ≤ 0` are candidates; at most
/// `⌊b·n⌋` of them are deferred, lowest difference first, ties by index.
pub fn budget_deterministic(human: &[f64], ai: &[f64], b: f64) -> Result<Vec<bool>> {
    if human.len() != ai.len() {
        return Err(Error::Structure(format!("{} expert losses for {} records", human.len(), ai.len())));
    }
    if b.is_nan() {
        return Err(Error::Invalid("budget is NaN".into()));
    }
    let n = human.len();
    let cap = (b.clamp(0.0, 1.0) * n as f64 + 1e-9).floor() as usize;
    let diff: Vec<f64> = human.iter().zip(ai).map(|(h, a)| h - a).collect();
    let mut cand: Vec<usize> = (0..n).filter(|&i| diff[i] <= 0.0).collect();
    cand.sort_by(|&x, &y| diff[x].total_cmp(&diff[y]).then(x.cmp(&y)));
    let mut out = vec![false; n];
    for &i in cand.iter().take(cap) {
        out[i] = true;
    }
    Ok(out)
}

/// Mean loss of a deferral assignment.
pub fn assignment_loss(human: &[f64], ai: &[f64], deferred: &[bool]) -> f64 {
    let n = human.len().max(1) as f64;
    deferred
        .iter()
        .enumerate()
        .map(|(i, &r)| if r { human[i] } else { ai[i] })
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_budget_perfect_expert_defers_all() {
        let r = budget_deterministic(&[0.0; 5], &[1.0, 0.0, 1.0, 0.0, 0.0], 1.0).unwrap();
        assert!(r.iter().all(|&x| x));
    }

    #[test]
    fn zero_budget_never_defers() {
        let r = budget_deterministic(&[0.0; 5], &[1.0; 5], 0.0).unwrap();
        assert!(r.iter().all(|&x| !x));
    }

    #[test]
    fn budget_is_respected() {
        let r = budget_deterministic(&[0.0; 10], &[1.0; 10], 0.35).unwrap();
        assert_eq!(r.iter().filter(|&&x| x).count(), 3);
        assert_eq!(&r[..4], &[true, true, true, false]);
    }
}

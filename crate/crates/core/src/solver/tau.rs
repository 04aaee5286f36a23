//! Tie-aware argmax selection producing a point of the simplex.

use crate::decision::SimplexVector;

/// Default absolute tie tolerance, scaled by the score magnitude.
pub const EPS_TIE: f64 = 1e-12;

pub(crate) fn tie_tolerance(score: &[f64], eps_tie: f64) -> f64 {
    eps_tie * (1.0 + score.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Indices within tolerance of the maximum of `score`.
pub fn argmax_set(score: &[f64], eps_tie: f64) -> Vec<usize> {
    let max = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = tie_tolerance(score, eps_tie);
    (0..score.len()).filter(|&i| score[i] >= max - tol).collect()
}

/// The two extreme tie-breaks over the argmax set of `score`: the first
/// index maximizing `psi0` and the first index minimizing `psi1`.
pub fn tie_extremes(score: &[f64], psi0: &[f64], psi1: &[f64], eps_tie: f64) -> (usize, usize) {
    let tied = argmax_set(score, eps_tie);
    let mut hi = tied[0];
    let mut lo = tied[0];
    for &i in &tied[1..] {
        if psi0[i] > psi0[hi] {
            hi = i;
        }
        if psi1[i] < psi1[lo] {
            lo = i;
        }
    }
    (hi, lo)
}

/// One-hot at the unique maximizer of `score`; on a tie, mass `p` on the
/// first tied index maximizing `psi0` and `1 − p` on the first tied index
/// minimizing `psi1`.
pub fn tau_select(score: &[f64], psi0: &[f64], psi1: &[f64], p: f64, eps_tie: f64) -> SimplexVector {
    let (hi, lo) = tie_extremes(score, psi0, psi1, eps_tie);
    if hi == lo || p <= 0.0 {
        return SimplexVector::one_hot(score.len(), lo);
    }
    if p >= 1.0 {
        return SimplexVector::one_hot(score.len(), hi);
    }
    SimplexVector::two_point(score.len(), hi, p, lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clear_max_is_one_hot() {
        let f = tau_select(&[0.2, 0.9, 0.1], &[0.0; 3], &[0.0; 3], 0.5, EPS_TIE);
        assert_eq!(f.weights(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn tie_at_zero_p_takes_smaller_psi1() {
        let f = tau_select(&[0.5, 0.5, 0.1], &[0.9, 0.6, 0.0], &[0.8, 0.2, 0.0], 0.0, EPS_TIE);
        assert_eq!(f.weights(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn tie_splits_mass() {
        let f = tau_select(&[0.5, 0.5, 0.1], &[0.9, 0.6, 0.0], &[0.8, 0.2, 0.0], 0.25, EPS_TIE);
        assert_eq!(f.weights(), &[0.25, 0.75, 0.0]);
    }

    proptest! {
        #[test]
        fn shift_invariance(
            s in prop::collection::vec(-5.0f64..5.0, 3..6),
            c in -100.0f64..100.0,
            p in 0.0f64..1.0,
        ) {
            let d = s.len();
            let psi0: Vec<f64> = (0..d).map(|i| i as f64 * 0.1).collect();
            let psi1: Vec<f64> = (0..d).map(|i| 1.0 - i as f64 * 0.2).collect();
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let a = tau_select(&s, &psi0, &psi1, p, EPS_TIE);
            let b = tau_select(&shifted, &psi0, &psi1, p, EPS_TIE);
            // well-separated scores keep the same support after the shift
            let mut sorted = s.clone();
            sorted.sort_by(|x, y| y.total_cmp(x));
            if sorted[0] - sorted[1] > 1e-9 {
                prop_assert_eq!(a, b);
            }
        }
    }
}

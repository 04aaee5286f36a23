//! Small analytic counterexamples: deferral labels that do not transfer
//! between distributions, and fairness that does not survive deferral.

use crate::dataset::{LabeledDataset, Record, Split};
use crate::decision::{DeferralDecision, SimplexVector};
use crate::error::Result;
use crate::metrics::{deferral_loss, signed_rate_gap};

/// Probability mass on one (classifier correct, expert correct) event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventAtom {
    pub prob: f64,
    pub classifier_correct: bool,
    pub expert_correct: bool,
}

const fn atom(prob: f64, classifier_correct: bool, expert_correct: bool) -> EventAtom {
    EventAtom {
        prob,
        classifier_correct,
        expert_correct,
    }
}

/// Deferral loss of the constant rule `r ≡ defer` under `mu`.
pub fn constant_rule_loss(mu: &[EventAtom], defer: bool) -> f64 {
    mu.iter()
        .filter(|e| if defer { !e.expert_correct } else { !e.classifier_correct })
        .map(|e| e.prob)
        .sum()
}

/// Probability that the empirical deferral label is 1, for the label rule
/// with free choices `a` (both wrong) and `b` (both right).
pub fn label_rate(mu: &[EventAtom], a: bool, b: bool) -> f64 {
    mu.iter()
        .filter(|e| match (e.classifier_correct, e.expert_correct) {
            (false, true) => true,
            (true, false) => false,
            (false, false) => a,
            (true, true) => b,
        })
        .map(|e| e.prob)
        .sum()
}

/// One label rule `(a, b)` with its pair of measures and the resulting losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpossibilityCase {
    pub a: bool,
    pub b: bool,
    pub measures: [Vec<EventAtom>; 2],
    /// `Pr(r̂ = 1)` under each measure.
    pub label_rates: [f64; 2],
    /// Optimal constant rule per measure (`true` = always defer).
    pub optimal_defer: [bool; 2],
    /// `L^{μ_i}(r*_{μ_i})`.
    pub own_loss: [f64; 2],
    /// `L^{μ_i}(r*_{μ_j})`, `j ≠ i`.
    pub cross_loss: [f64; 2],
}

const T: f64 = 1.0 / 3.0;
const TT: f64 = 2.0 / 3.0;

/// The four label rules and the measure pairs built for each.
pub fn impossibility_instances() -> Vec<ImpossibilityCase> {
    let cases: [(bool, bool, Vec<EventAtom>, Vec<EventAtom>); 4] = [
        (
            false,
            false,
            vec![atom(TT, true, true), atom(T, false, true)],
            vec![atom(TT, true, false), atom(T, false, true)],
        ),
        (
            true,
            false,
            vec![atom(T, false, true), atom(TT, true, false)],
            vec![atom(T, false, true), atom(TT, true, true)],
        ),
        (
            false,
            true,
            vec![atom(T, true, false), atom(TT, false, true)],
            vec![atom(T, true, false), atom(TT, true, true)],
        ),
        (
            true,
            true,
            vec![atom(T, true, false), atom(TT, false, true)],
            vec![atom(T, true, false), atom(T, false, false), atom(T, true, true)],
        ),
    ];
    cases
        .into_iter()
        .map(|(a, b, mu1, mu2)| {
            let measures = [mu1, mu2];
            let optimal_defer = [0, 1].map(|i| {
                let m = &measures[i];
                constant_rule_loss(m, true) < constant_rule_loss(m, false)
            });
            ImpossibilityCase {
                a,
                b,
                label_rates: [0, 1].map(|i| label_rate(&measures[i], a, b)),
                own_loss: [0, 1].map(|i| constant_rule_loss(&measures[i], optimal_defer[i])),
                cross_loss: [0, 1].map(|i| constant_rule_loss(&measures[i], optimal_defer[1 - i])),
                optimal_defer,
                measures,
            }
        })
        .collect()
}

/// Fairness of the parts versus fairness of the deferral system on the
/// four-point example.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalityReport {
    /// Signed equal-opportunity gaps `rate(A=1) − rate(A=0)`.
    pub classifier_gap: f64,
    pub expert_gap: f64,
    pub system_gap: f64,
    pub system_loss: f64,
    pub classifier_loss: f64,
    pub expert_loss: f64,
    /// Loss and signed gap of all 16 deterministic deferral rules, indexed by bit mask.
    pub rules: Vec<(f64, f64)>,
    /// Smallest loss among rules with zero gap.
    pub best_fair_loss: f64,
}

/// Four equiprobable points, groups `(0, 0, 1, 1)`, `Y ≡ 1`,
/// classifier `(1, 0, 1, 0)`, expert `(0, 1, 1, 0)`.
pub fn compositionality_dataset() -> Result<LabeledDataset> {
    let h = [1, 0, 1, 0];
    let m = [0, 1, 1, 0];
    let records = (0..4)
        .map(|i| Record {
            features: vec![h[i] as f64],
            group: i / 2,
            expert: m[i],
            label: 1,
            split: Split::Test,
        })
        .collect();
    LabeledDataset::new(records, 2)
}

pub fn compositionality_demo() -> Result<CompositionalityReport> {
    let ds = compositionality_dataset()?;
    let h: Vec<usize> = ds.records().iter().map(|r| r.features[0] as usize).collect();
    let rule = |mask: usize| -> Vec<DeferralDecision> {
        (0..4)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    DeferralDecision::defer(h[i])
                } else {
                    DeferralDecision::predict(h[i])
                }
            })
            .collect()
    };
    let eval = |dec: &[DeferralDecision]| -> Result<(f64, f64)> {
        let out: Vec<SimplexVector> = dec.iter().map(|d| d.to_simplex(2)).collect();
        Ok((deferral_loss(&ds, dec)?, signed_rate_gap(&ds, &out, Some(1))?))
    };
    let rules = (0..16).map(|mask| eval(&rule(mask))).collect::<Result<Vec<_>>>()?;
    let (classifier_loss, classifier_gap) = rules[0];
    let (expert_loss, expert_gap) = rules[15];
    let min_loss = rules.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    // among optimal rules, the one deferring x2 only
    let (system_loss, system_gap) = rules[0b0010];
    debug_assert_eq!(system_loss, min_loss);
    let best_fair_loss = rules
        .iter()
        .filter(|r| r.1 == 0.0)
        .map(|r| r.0)
        .fold(f64::INFINITY, f64::min);
    Ok(CompositionalityReport {
        classifier_gap,
        expert_gap,
        system_gap,
        system_loss,
        classifier_loss,
        expert_loss,
        rules,
        best_fair_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-15;

    #[test]
    fn base_case_losses() {
        let c = &impossibility_instances()[0];
        assert!(c.optimal_defer[0] && !c.optimal_defer[1]);
        assert!(c.own_loss[0].abs() < EPS);
        assert!((c.own_loss[1] - 1.0 / 3.0).abs() < EPS);
        // deferring everything under the second measure
        assert!((c.cross_loss[1] - 2.0 / 3.0).abs() < EPS);
        // never deferring under the first measure only costs the classifier errors
        assert!((c.cross_loss[0] - 1.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn labels_are_equally_distributed() {
        for c in impossibility_instances() {
            assert!((c.label_rates[0] - c.label_rates[1]).abs() < EPS, "{c:?}");
        }
    }

    #[test]
    fn optimal_rules_are_not_interchangeable() {
        for c in impossibility_instances() {
            for i in 0..2 {
                assert!(c.own_loss[i] <= 1.0 / 3.0 + EPS);
                assert!(c.cross_loss[i] > c.own_loss[i]);
            }
        }
        let both = &impossibility_instances()[3];
        assert!(both.cross_loss.iter().all(|&l| (l - 2.0 / 3.0).abs() < EPS));
    }

    #[test]
    fn deferral_breaks_fairness() {
        let r = compositionality_demo().unwrap();
        assert_eq!(r.classifier_gap, 0.0);
        assert_eq!(r.expert_gap, 0.0);
        assert_eq!(r.system_gap.abs(), 0.5);
        assert_eq!((r.classifier_loss, r.expert_loss), (0.5, 0.5));
        // both agents are right on x3 and wrong on x4
        assert_eq!(r.system_loss, 0.25);
        assert_eq!(r.best_fair_loss, 0.5);
    }
}

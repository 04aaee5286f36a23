//! Deferral loss, accuracy and group-fairness gaps of a composed human–AI
//! system, for realized decisions or in expectation over a randomized policy.

use serde::{Deserialize, Serialize};

use crate::bootstrap::Interval;
use crate::dataset::LabeledDataset;
use crate::decision::{DeferralDecision, SimplexVector};
use crate::error::{Error, Result};

/// Per-record losses for the two agents. The default is 0-1 loss for both.
#[derive(Debug, Clone)]
pub struct LossTable {
    /// `ℓ_H` per record.
    pub human: Vec<f64>,
    /// `ℓ_AI(y, c)` per record and predicted class `c`.
    pub ai: Vec<Vec<f64>>,
}

impl LossTable {
    pub fn zero_one(ds: &LabeledDataset) -> Self {
        let l = ds.num_classes();
        let human = ds
            .records()
            .iter()
            .map(|r| f64::from(u8::from(r.expert != r.label)))
            .collect();
        let ai = ds
            .records()
            .iter()
            .map(|r| (0..l).map(|c| f64::from(u8::from(c != r.label))).collect())
            .collect();
        Self { human, ai }
    }
}

fn check_len(ds: &LabeledDataset, n: usize) -> Result<()> {
    if ds.len() != n {
        return Err(Error::Structure(format!(
            "{n} decisions for {} records",
            ds.len()
        )));
    }
    if n == 0 {
        return Err(Error::Invalid("empty dataset".into()));
    }
    Ok(())
}

/// Mean of `r·ℓ_H + (1 − r)·ℓ_AI` with 0-1 losses.
pub fn deferral_loss(ds: &LabeledDataset, decisions: &[DeferralDecision]) -> Result<f64> {
    deferral_loss_with(ds, decisions, &LossTable::zero_one(ds))
}

pub fn deferral_loss_with(
    ds: &LabeledDataset,
    decisions: &[DeferralDecision],
    losses: &LossTable,
) -> Result<f64> {
    check_len(ds, decisions.len())?;
    if losses.human.len() != ds.len() || losses.ai.len() != ds.len() {
        return Err(Error::Structure("loss table does not match dataset".into()));
    }
    let total: f64 = decisions
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if d.deferred {
                losses.human[i]
            } else {
                losses.ai[i][d.predicted_class]
            }
        })
        .sum();
    Ok(total / ds.len() as f64)
}

/// Deferral loss in expectation over the randomization of each `f(x)`.
pub fn expected_deferral_loss(ds: &LabeledDataset, outputs: &[SimplexVector]) -> Result<f64> {
    Ok(1.0 - expected_accuracy(ds, outputs)?)
}

/// `P(Ŷ = Y)` in expectation over the policy's randomization.
pub fn expected_accuracy(ds: &LabeledDataset, outputs: &[SimplexVector]) -> Result<f64> {
    check_len(ds, outputs.len())?;
    let total: f64 = ds
        .records()
        .iter()
        .zip(outputs)
        .map(|(r, f)| f.output_prob(r.label, r.expert))
        .sum();
    Ok(total / ds.len() as f64)
}

pub fn expected_deferral_rate(outputs: &[SimplexVector]) -> f64 {
    if outputs.is_empty() {
        return 0.0;
    }
    outputs.iter().map(SimplexVector::defer_mass).sum::<f64>() / outputs.len() as f64
}

/// Group gaps of the positive-output rate. Signed values are `rate(A=1) − rate(A=0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessGaps {
    pub dp_signed: f64,
    pub dp_gap: f64,
    pub eopp_signed: f64,
    pub eopp_gap: f64,
    /// Signed gaps conditioned on `Y = 0` and `Y = 1`.
    pub eodds_signed: [f64; 2],
    pub eodds_gap: f64,
}

pub fn fairness_gaps(ds: &LabeledDataset, decisions: &[DeferralDecision]) -> Result<FairnessGaps> {
    let outputs: Vec<SimplexVector> = decisions
        .iter()
        .map(|d| d.to_simplex(ds.num_classes()))
        .collect();
    expected_fairness_gaps(ds, &outputs)
}

/// Signed gap `P(Ŷ=1 | A=1, ·) − P(Ŷ=1 | A=0, ·)`, conditioned on `Y = label`
/// when given, in expectation over the policy's randomization.
pub fn signed_rate_gap(ds: &LabeledDataset, outputs: &[SimplexVector], label: Option<usize>) -> Result<f64> {
    check_len(ds, outputs.len())?;
    if ds.num_classes() != 2 {
        return Err(Error::Invalid("fairness gaps need a binary task".into()));
    }
    if ds.num_groups() != 2 {
        return Err(Error::Invalid(format!(
            "fairness gaps need exactly two groups, found {}",
            ds.num_groups()
        )));
    }
    let mut pos = [0.0f64; 2];
    let mut cnt = [0usize; 2];
    for (r, f) in ds.records().iter().zip(outputs) {
        if label.map_or(true, |y| r.label == y) {
            pos[r.group] += f.output_prob(1, r.expert);
            cnt[r.group] += 1;
        }
    }
    for a in 0..2 {
        if cnt[a] == 0 {
            return Err(Error::EmptyCell(match label {
                Some(y) => format!("A={a}, Y={y}"),
                None => format!("A={a}"),
            }));
        }
    }
    Ok(pos[1] / cnt[1] as f64 - pos[0] / cnt[0] as f64)
}

/// Fairness gaps of `P(Ŷ = 1 | ·)` in expectation over the policy's randomization.
/// Requires a binary task, two groups and every `(A, Y)` cell populated.
pub fn expected_fairness_gaps(ds: &LabeledDataset, outputs: &[SimplexVector]) -> Result<FairnessGaps> {
    let dp_signed = signed_rate_gap(ds, outputs, None)?;
    let e0 = signed_rate_gap(ds, outputs, Some(0))?;
    let e1 = signed_rate_gap(ds, outputs, Some(1))?;
    Ok(FairnessGaps {
        dp_signed,
        dp_gap: dp_signed.abs(),
        eopp_signed: e1,
        eopp_gap: e1.abs(),
        eodds_signed: [e0, e1],
        eodds_gap: e0.abs().max(e1.abs()),
    })
}

/// Summary of a policy on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// Plug-in objective, mean `⟨f, ψ0⟩`.
    pub objective: f64,
    pub constraint_labels: Vec<String>,
    pub deltas: Vec<f64>,
    pub two_sided: Vec<bool>,
    /// Constraint values measured from realized labels and expert decisions
    /// (plug-in value where no label-based measurement exists, e.g. OOD).
    pub constraint_values: Vec<f64>,
    /// Plug-in constraint values, mean `⟨f, ψ_j⟩`.
    pub embedded_values: Vec<f64>,
    /// `max(value − δ, 0)`, with `|value|` for two-sided constraints.
    pub violations: Vec<f64>,
    pub deferral_rate: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_intervals: Option<Vec<(String, Interval)>>,
}

pub fn violation(value: f64, delta: f64, two_sided: bool) -> f64 {
    let v = if two_sided { value.abs() } else { value };
    (v - delta).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Record, Split};

    fn ds(rows: &[(usize, usize, usize)]) -> LabeledDataset {
        // (group, expert, label)
        LabeledDataset::new(
            rows.iter()
                .map(|&(a, m, y)| Record {
                    features: vec![],
                    group: a,
                    expert: m,
                    label: y,
                    split: Split::Val,
                })
                .collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn perfect_expert_all_defer_is_zero() {
        let d = ds(&[(0, 1, 1), (1, 0, 0), (0, 0, 0)]);
        let dec = vec![DeferralDecision::defer(0); 3];
        assert_eq!(deferral_loss(&d, &dec).unwrap(), 0.0);
    }

    #[test]
    fn perfect_classifier_no_defer_is_zero() {
        let d = ds(&[(0, 0, 1), (1, 1, 0)]);
        let dec = vec![DeferralDecision::predict(1), DeferralDecision::predict(0)];
        assert_eq!(deferral_loss(&d, &dec).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_errors() {
        let d = ds(&[(0, 0, 1), (1, 1, 0)]);
        let err = deferral_loss(&d, &[DeferralDecision::predict(1)]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn custom_loss_table_is_used() {
        let d = ds(&[(0, 0, 1), (1, 1, 1)]);
        let mut losses = LossTable::zero_one(&d);
        losses.human = vec![0.25, 0.75];
        let dec = vec![DeferralDecision::defer(0), DeferralDecision::defer(0)];
        assert!((deferral_loss_with(&d, &dec, &losses).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_cell_is_named() {
        // no A=1, Y=0 record
        let d = ds(&[(0, 0, 0), (0, 1, 1), (1, 1, 1)]);
        let dec = vec![DeferralDecision::predict(1); 3];
        match fairness_gaps(&d, &dec) {
            Err(Error::EmptyCell(c)) => assert_eq!(c, "A=1, Y=0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_blind_decisions_on_symmetric_groups_have_zero_gaps() {
        let rows = [(0, 0, 0), (0, 1, 1), (1, 0, 0), (1, 1, 1)];
        let d = ds(&rows);
        let dec: Vec<_> = rows.iter().map(|&(_, _, y)| DeferralDecision::predict(y)).collect();
        let g = fairness_gaps(&d, &dec).unwrap();
        assert_eq!(g.dp_gap, 0.0);
        assert_eq!(g.eopp_gap, 0.0);
        assert_eq!(g.eodds_gap, 0.0);
    }

    #[test]
    fn violation_is_nonnegative() {
        assert_eq!(violation(0.03, 0.05, false), 0.0);
        assert!((violation(-0.08, 0.05, true) - 0.03).abs() < 1e-15);
        assert_eq!(violation(-0.08, 0.05, false), 0.0);
    }
}

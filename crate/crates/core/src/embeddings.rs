//! Embedding vectors `ψ_i(x) ∈ R^{L+1}` whose inner product with a policy
//! output `f(x)` gives the conditional expected reward or constraint.
//!
//! Every constraint is oriented as `E⟨f, ψ⟩ ≤ δ`; two-sided constraints
//! (`|E⟨f, ψ⟩| ≤ δ`) carry a flag and are sign-resolved by the solver.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::decision::SimplexVector;
use crate::error::{Error, Result};
use crate::metrics::{expected_deferral_rate, signed_rate_gap};
use crate::scores::{Marginals, ScoreTable};

/// Default slack turning long-tail equalities into `|·| ≤ ε_eq`.
pub const LONGTAIL_SLACK: f64 = 0.01;
const MIN_CLASS_MARGINAL: f64 = 1e-9;

/// Row-major `n × d` table of per-instance vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    d: usize,
    data: Vec<f64>,
}

impl Embedding {
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d < 2 || data.len() % d != 0 {
            return Err(Error::Structure(format!("{} entries do not form rows of width {d}", data.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite embedding entry at row {}", pos / d)));
        }
        Ok(Self { d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Structure("embedding rows of unequal length".into()));
        }
        Self::new(d, rows.concat())
    }

    /// The same vector on every one of `n` instances.
    pub fn constant(n: usize, row: &[f64]) -> Self {
        Self {
            d: row.len(),
            data: row.repeat(n),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn negated(&self) -> Self {
        Self {
            d: self.d,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    /// `Σ_j c_j · e_j` over embeddings of equal shape.
    pub fn combine(parts: &[(f64, &Embedding)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("empty embedding combination".into()))?
            .1;
        let mut data = vec![0.0; first.data.len()];
        for (c, e) in parts {
            if e.d != first.d || e.data.len() != data.len() {
                return Err(Error::Structure("combining embeddings of different shapes".into()));
            }
            for (o, v) in data.iter_mut().zip(&e.data) {
                *o += c * v;
            }
        }
        Ok(Self { d: first.d, data })
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            d: self.d,
            data: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
        }
    }

    /// Empirical mean of `⟨f(x_i), ψ(x_i)⟩`.
    pub fn mean_dot(&self, outputs: &[SimplexVector]) -> f64 {
        if outputs.is_empty() {
            return 0.0;
        }
        self.rows().zip(outputs).map(|(r, f)| f.dot(r)).sum::<f64>() / outputs.len() as f64
    }
}

/// What a constraint row measures; used for label-based evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Budget,
    Dp,
    Eopp,
    /// Equalized odds, `Y = 1` row.
    EoddsPos,
    /// Equalized odds, `Y = 0` row.
    EoddsNeg,
    TypeK { k: usize },
    Ood,
    LongTail { group: usize, classes: Vec<usize>, target: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub psi: Embedding,
    pub delta: f64,
    pub two_sided: bool,
}

/// Objective embedding plus constraint rows, aligned with a set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub psi0: Embedding,
    pub constraints: Vec<Constraint>,
}

impl EmbeddingSet {
    pub fn new(psi0: Embedding, constraints: Vec<Constraint>) -> Result<Self> {
        for c in &constraints {
            if c.psi.dim() != psi0.dim() || c.psi.len() != psi0.len() {
                return Err(Error::Structure(format!("constraint `{}` does not match the objective shape", c.label)));
            }
            if c.delta.is_nan() {
                return Err(Error::Invalid(format!("constraint `{}` has NaN tolerance", c.label)));
            }
        }
        Ok(Self { psi0, constraints })
    }

    pub fn len(&self) -> usize {
        self.psi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.psi0.dim()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            psi0: self.psi0.subset(indices),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    psi: c.psi.subset(indices),
                    ..c.clone()
                })
                .collect(),
        }
    }
}

/// `s(a)` and `t(a, y)` reweighting coefficients for two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCoefficients {
    pub s_of_a: [f64; 2],
    /// Indexed `[a][y]`.
    pub t_of_ay: [[f64; 2]; 2],
}

impl GroupCoefficients {
    pub fn from_marginals(m: &Marginals) -> Result<Self> {
        if m.p_group.len() != 2 {
            return Err(Error::Invalid(format!(
                "group coefficients need exactly two groups, found {}",
                m.p_group.len()
            )));
        }
        m.require_groups()?;
        let s_of_a = [-1.0 / m.p_group[0], 1.0 / m.p_group[1]];
        let mut t_of_ay = [[f64::NAN; 2]; 2];
        for (y, row) in m.p_label_group.iter().enumerate().take(2) {
            for (a, &p) in row.iter().enumerate() {
                let sign = if a == 1 { 1.0 } else { -1.0 };
                t_of_ay[a][y] = if p > 0.0 { sign / p } else { f64::NAN };
            }
        }
        Ok(Self { s_of_a, t_of_ay })
    }

    /// `t(a, y)`, failing on an empty `(y, a)` cell.
    pub fn t(&self, a: usize, y: usize) -> Result<f64> {
        let v = self.t_of_ay[a][y];
        if v.is_nan() {
            return Err(Error::EmptyCell(format!("Y={y}, A={a}")));
        }
        Ok(v)
    }
}

/// `[Pr(Y=0|x), …, Pr(Y=L−1|x), Pr(Y=M|x)]`.
pub fn accuracy_embedding(scores: &ScoreTable) -> Embedding {
    let l = scores.num_classes();
    let mut data = Vec::with_capacity(scores.len() * (l + 1));
    for i in 0..scores.len() {
        data.extend_from_slice(scores.p_y(i));
        data.push(scores.p_agree[i]);
    }
    Embedding { d: l + 1, data }
}

/// `[0, …, 0, 1]`: the deferral probability.
pub fn budget_embedding(num_classes: usize, n: usize) -> Embedding {
    let mut row = vec![0.0; num_classes + 1];
    row[num_classes] = 1.0;
    Embedding::constant(n, &row)
}

/// `[ratio, …, ratio, 0]`: out-of-distribution mass that is not deferred.
pub fn ood_embedding(scores: &ScoreTable) -> Result<Embedding> {
    let ratio = scores.column("density_ratio")?;
    let d = scores.num_classes() + 1;
    let data = ratio
        .iter()
        .flat_map(|&r| (0..d).map(move |i| if i + 1 == d { 0.0 } else { r }))
        .collect();
    Embedding::new(d, data)
}

/// `(1/Pr(Y=k))·[p_k, …, 0 at k, …, p_k, Pr(M≠k, Y=k|x)]`: type-k error.
pub fn typek_embedding(scores: &ScoreTable, k: usize) -> Result<Embedding> {
    let l = scores.num_classes();
    if k >= l {
        return Err(Error::Invalid(format!("type-k class {k} outside [0, {}]", l - 1)));
    }
    let pk = scores.marginals.p_label[k];
    if pk < MIN_CLASS_MARGINAL {
        return Err(Error::Invalid(format!("Pr(Y={k}) = {pk} is too small for a type-k constraint")));
    }
    let mneq = scores.column(&format!("p_mneq_y_{k}"))?;
    let mut data = Vec::with_capacity(scores.len() * (l + 1));
    for (i, &joint) in mneq.iter().enumerate() {
        let p = scores.p_y(i)[k];
        data.extend((0..l).map(|c| if c == k { 0.0 } else { p / pk }));
        data.push(joint / pk);
    }
    Embedding::new(l + 1, data)
}

fn check_binary_groups(scores: &ScoreTable, groups: &[usize]) -> Result<()> {
    if scores.num_classes() != 2 {
        return Err(Error::Invalid("fairness constraints need a binary task".into()));
    }
    if groups.len() != scores.len() {
        return Err(Error::Structure(format!(
            "{} group values for {} score rows",
            groups.len(),
            scores.len()
        )));
    }
    if let Some(&a) = groups.iter().find(|&&a| a > 1) {
        return Err(Error::Invalid(format!("fairness constraints need groups 0/1, found {a}")));
    }
    Ok(())
}

/// `s(a)·[0, 1, Pr(M=1|x)]`: signed demographic-parity gap.
pub fn dp_embedding(scores: &ScoreTable, groups: &[usize], coeffs: &GroupCoefficients) -> Result<Embedding> {
    check_binary_groups(scores, groups)?;
    let m1 = scores.column("p_m1")?;
    let data = groups
        .iter()
        .zip(m1)
        .flat_map(|(&a, &pm)| {
            let s = coeffs.s_of_a[a];
            [0.0, s, s * pm]
        })
        .collect();
    Embedding::new(3, data)
}

/// `t(a,1)·[0, Pr(Y=1|x), Pr(M=1, Y=1|x)]`: signed true-positive-rate gap.
pub fn eopp_embedding(scores: &ScoreTable, groups: &[usize], coeffs: &GroupCoefficients) -> Result<Embedding> {
    check_binary_groups(scores, groups)?;
    let joint = scores.column("p_m1_y1")?;
    let mut data = Vec::with_capacity(3 * groups.len());
    for (i, (&a, &pj)) in groups.iter().zip(joint).enumerate() {
        let t = coeffs.t(a, 1)?;
        data.extend([0.0, t * scores.p_y(i)[1], t * pj]);
    }
    Embedding::new(3, data)
}

/// The equalized-odds pair: the equal-opportunity row and
/// `t(a,0)·[0, Pr(Y=0|x), Pr(Y=0|x) − Pr(M=0, Y=0|x)]`, the signed
/// false-positive-rate gap.
pub fn eodds_embeddings(
    scores: &ScoreTable,
    groups: &[usize],
    coeffs: &GroupCoefficients,
) -> Result<(Embedding, Embedding)> {
    let pos = eopp_embedding(scores, groups, coeffs)?;
    let joint = scores.column("p_m0_y0")?;
    let mut data = Vec::with_capacity(3 * groups.len());
    for (i, (&a, &pj)) in groups.iter().zip(joint).enumerate() {
        let t = coeffs.t(a, 0)?;
        let p0 = scores.p_y(i)[0];
        data.extend([0.0, t * p0, t * (p0 - pj)]);
    }
    Ok((pos, Embedding::new(3, data)?))
}

/// Long-tail objective and per-group balance rows.
///
/// The objective is `−[Σ_i Σ_{y∈G_i, y≠l} Pr(Y=y|x) / (α_i Pr(Y∈G_i))]_l`
/// with 0 in the defer slot; row `i` is
/// `(Pr(Y∈G_i|x)/Pr(Y∈G_i))·[1, …, 1, 0] − α_i/K`.
pub fn longtail_embeddings(
    scores: &ScoreTable,
    partition: &[Vec<usize>],
    alphas: &[f64],
) -> Result<(Embedding, Vec<Embedding>)> {
    let l = scores.num_classes();
    let k = partition.len();
    if k == 0 || alphas.len() != k {
        return Err(Error::Invalid(format!("{k} groups with {} alphas", alphas.len())));
    }
    let mut owner = vec![None; l];
    for (gi, g) in partition.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::Invalid(format!("long-tail group {gi} is empty")));
        }
        for &y in g {
            if y >= l || owner[y].is_some() {
                return Err(Error::Invalid(format!("class {y} is out of range or in two groups")));
            }
            owner[y] = Some(gi);
        }
    }
    if let Some(y) = owner.iter().position(Option::is_none) {
        return Err(Error::Invalid(format!("class {y} is not covered by the partition")));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::Invalid(format!("long-tail alpha {a} must be positive")));
    }
    let pg: Vec<f64> = partition
        .iter()
        .map(|g| g.iter().map(|&y| scores.marginals.p_label[y]).sum())
        .collect();
    if let Some(gi) = pg.iter().position(|&p| p <= 0.0) {
        return Err(Error::EmptyCell(format!("Y in long-tail group {gi}")));
    }
    let n = scores.len();
    let mut obj = Vec::with_capacity(n * (l + 1));
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(n * (l + 1)); k];
    for i in 0..n {
        let py = scores.p_y(i);
        // weighted mass of each group, and of the class itself
        let gmass: Vec<f64> = partition.iter().map(|g| g.iter().map(|&y| py[y]).sum()).collect();
        let total: f64 = (0..k).map(|gi| gmass[gi] / (alphas[gi] * pg[gi])).sum();
        for c in 0..l {
            let gi = owner[c].expect("covered");
            obj.push(-(total - py[c] / (alphas[gi] * pg[gi])));
        }
        obj.push(0.0);
        for gi in 0..k {
            let w = gmass[gi] / pg[gi];
            let shift = alphas[gi] / k as f64;
            rows[gi].extend((0..l).map(|_| w - shift));
            rows[gi].push(-shift);
        }
    }
    Ok((
        Embedding::new(l + 1, obj)?,
        rows.into_iter().map(|r| Embedding::new(l + 1, r)).collect::<Result<_>>()?,
    ))
}

/// One constraint entry of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    Budget {
        delta: f64,
    },
    Dp {
        delta: f64,
    },
    Eopp {
        delta: f64,
    },
    Eodds {
        delta: f64,
    },
    Typek {
        delta: f64,
        k: usize,
    },
    Ood {
        delta: f64,
    },
    Longtail {
        groups: Vec<Vec<usize>>,
        alphas: Vec<f64>,
        /// Equality slack; defaults to [`LONGTAIL_SLACK`].
        #[serde(default)]
        delta: Option<f64>,
    },
}

impl ConstraintSpec {
    /// Score columns this constraint reads beyond `p_y` and `p_agree`.
    pub fn required_columns(&self) -> Vec<String> {
        match self {
            Self::Dp { .. } => vec!["p_m1".into()],
            Self::Eopp { .. } => vec!["p_m1_y1".into()],
            Self::Eodds { .. } => vec!["p_m1_y1".into(), "p_m0_y0".into()],
            Self::Typek { k, .. } => vec![format!("p_mneq_y_{k}")],
            Self::Ood { .. } => vec!["density_ratio".into()],
            Self::Budget { .. } | Self::Longtail { .. } => vec![],
        }
    }

    pub fn is_fairness(&self) -> bool {
        matches!(self, Self::Dp { .. } | Self::Eopp { .. } | Self::Eodds { .. })
    }
}

/// Builds the objective and all constraint rows for `scores`, where
/// `groups[i]` is the group of score row `i`.
pub fn build_embeddings(scores: &ScoreTable, groups: &[usize], specs: &[ConstraintSpec]) -> Result<EmbeddingSet> {
    let n = scores.len();
    let l = scores.num_classes();
    let mut psi0 = accuracy_embedding(scores);
    let mut constraints = Vec::new();
    let mut coeffs: Option<GroupCoefficients> = None;
    let mut get_coeffs = || -> Result<GroupCoefficients> {
        if coeffs.is_none() {
            coeffs = Some(GroupCoefficients::from_marginals(&scores.marginals)?);
        }
        Ok(coeffs.expect("set above"))
    };
    let mut longtail_seen = false;
    for spec in specs {
        for col in spec.required_columns() {
            scores.column(&col)?;
        }
        match spec {
            ConstraintSpec::Budget { delta } => constraints.push(Constraint {
                label: "budget".into(),
                kind: ConstraintKind::Budget,
                psi: budget_embedding(l, n),
                delta: *delta,
                two_sided: false,
            }),
            ConstraintSpec::Dp { delta } => constraints.push(Constraint {
                label: "dp".into(),
                kind: ConstraintKind::Dp,
                psi: dp_embedding(scores, groups, &get_coeffs()?)?,
                delta: *delta,
                two_sided: true,
            }),
            ConstraintSpec::Eopp { delta } => constraints.push(Constraint {
                label: "eopp".into(),
                kind: ConstraintKind::Eopp,
                psi: eopp_embedding(scores, groups, &get_coeffs()?)?,
                delta: *delta,
                two_sided: true,
            }),
            ConstraintSpec::Eodds { delta } => {
                let (pos, neg) = eodds_embeddings(scores, groups, &get_coeffs()?)?;
                constraints.push(Constraint {
                    label: "eodds_y1".into(),
                    kind: ConstraintKind::EoddsPos,
                    psi: pos,
                    delta: *delta,
                    two_sided: true,
                });
                constraints.push(Constraint {
                    label: "eodds_y0".into(),
                    kind: ConstraintKind::EoddsNeg,
                    psi: neg,
                    delta: *delta,
                    two_sided: true,
                });
            }
            ConstraintSpec::Typek { delta, k } => constraints.push(Constraint {
                label: format!("typek_{k}"),
                kind: ConstraintKind::TypeK { k: *k },
                psi: typek_embedding(scores, *k)?,
                delta: *delta,
                two_sided: false,
            }),
            ConstraintSpec::Ood { delta } => constraints.push(Constraint {
                label: "ood".into(),
                kind: ConstraintKind::Ood,
                psi: ood_embedding(scores)?,
                delta: *delta,
                two_sided: false,
            }),
            ConstraintSpec::Longtail {
                groups: partition,
                alphas,
                delta,
            } => {
                if longtail_seen {
                    return Err(Error::Invalid("at most one long-tail specification per run".into()));
                }
                longtail_seen = true;
                let (obj, rows) = longtail_embeddings(scores, partition, alphas)?;
                psi0 = obj;
                let k = partition.len();
                for (gi, psi) in rows.into_iter().enumerate() {
                    constraints.push(Constraint {
                        label: format!("longtail_{gi}"),
                        kind: ConstraintKind::LongTail {
                            group: gi,
                            classes: partition[gi].clone(),
                            target: alphas[gi] / k as f64,
                        },
                        psi,
                        delta: delta.unwrap_or(LONGTAIL_SLACK),
                        two_sided: true,
                    });
                }
            }
        }
    }
    EmbeddingSet::new(psi0, constraints)
}

/// Constraint value measured from realized labels and expert decisions, in
/// expectation over the policy's randomization. OOD has no label-based
/// counterpart and returns the plug-in value.
pub fn empirical_constraint_value(
    ds: &LabeledDataset,
    outputs: &[SimplexVector],
    constraint: &Constraint,
) -> Result<f64> {
    if ds.len() != outputs.len() {
        return Err(Error::Structure(format!("{} outputs for {} records", outputs.len(), ds.len())));
    }
    if ds.is_empty() {
        return Err(Error::Invalid("empty dataset".into()));
    }
    let recs = ds.records();
    // mean of `value` over records passing `keep`
    let cond_mean = |keep: &dyn Fn(usize) -> bool, value: &dyn Fn(usize) -> f64, cell: String| -> Result<f64> {
        let (mut s, mut c) = (0.0, 0usize);
        for i in 0..recs.len() {
            if keep(i) {
                s += value(i);
                c += 1;
            }
        }
        if c == 0 {
            return Err(Error::EmptyCell(cell));
        }
        Ok(s / c as f64)
    };
    let gap = |label: Option<usize>| signed_rate_gap(ds, outputs, label);
    match &constraint.kind {
        ConstraintKind::Budget => Ok(expected_deferral_rate(outputs)),
        ConstraintKind::Dp => gap(None),
        ConstraintKind::Eopp | ConstraintKind::EoddsPos => gap(Some(1)),
        ConstraintKind::EoddsNeg => gap(Some(0)),
        ConstraintKind::TypeK { k } => cond_mean(
            &|i| recs[i].label == *k,
            &|i| 1.0 - outputs[i].output_prob(*k, recs[i].expert),
            format!("Y={k}"),
        ),
        ConstraintKind::Ood => Ok(constraint.psi.mean_dot(outputs)),
        ConstraintKind::LongTail { group, classes, target } => cond_mean(
            &|i| classes.contains(&recs[i].label),
            &|i| 1.0 - outputs[i].defer_mass(),
            format!("Y in long-tail group {group}"),
        )
        .map(|v| v - target),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::RawScores;

    fn marg(pa1: f64) -> Marginals {
        Marginals {
            p_group: vec![1.0 - pa1, pa1],
            p_label: vec![0.5, 0.5],
            p_label_group: vec![vec![(1.0 - pa1) / 2.0, pa1 / 2.0], vec![(1.0 - pa1) / 2.0, pa1 / 2.0]],
        }
    }

    fn table(p_y: Vec<Vec<f64>>, agree: Vec<f64>) -> ScoreTable {
        let n = agree.len();
        let raw = RawScores {
            p_y,
            p_agree: agree,
            p_m1: Some(vec![0.4; n]),
            p_m1_y1: Some(vec![0.3; n]),
            p_m0_y0: Some(vec![0.2; n]),
            ..Default::default()
        };
        ScoreTable::new(raw, marg(0.5)).unwrap()
    }

    #[test]
    fn accuracy_row_assembly() {
        let t = table(vec![vec![0.3, 0.7]], vec![0.9]);
        assert_eq!(accuracy_embedding(&t).row(0), &[0.3, 0.7, 0.9]);
    }

    #[test]
    fn uniform_scores_give_equal_coordinates() {
        let t = table(vec![vec![0.5, 0.5]], vec![0.5]);
        let r = accuracy_embedding(&t);
        assert!(r.row(0).iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn budget_row_is_defer_indicator() {
        let e = budget_embedding(2, 4);
        assert_eq!(e.row(3), &[0.0, 0.0, 1.0]);
        assert_eq!(e.mean_dot(&vec![SimplexVector::one_hot(3, 2); 4]), 1.0);
        assert_eq!(e.mean_dot(&vec![SimplexVector::one_hot(3, 0); 4]), 0.0);
    }

    #[test]
    fn dp_coefficients_with_balanced_groups() {
        let c = GroupCoefficients::from_marginals(&marg(0.5)).unwrap();
        assert_eq!(c.s_of_a, [-2.0, 2.0]);
        let t = table(vec![vec![0.5, 0.5]; 2], vec![0.8; 2]);
        let e = dp_embedding(&t, &[1, 0], &c).unwrap();
        assert_eq!(e.row(0)[1], 2.0);
        assert_eq!(e.row(1)[1], -2.0);
    }

    #[test]
    fn eopp_coefficient_from_joint_cell() {
        let c = GroupCoefficients::from_marginals(&marg(0.5)).unwrap();
        assert_eq!(c.t(1, 1).unwrap(), 4.0);
        assert!(c.s_of_a[1] > 0.0 && c.s_of_a[0] < 0.0);
    }

    #[test]
    fn ood_rows() {
        let mut raw = RawScores {
            p_y: vec![vec![0.5, 0.5]],
            p_agree: vec![0.5],
            ..Default::default()
        };
        raw.density_ratio = Some(vec![2.0]);
        let t = ScoreTable::new(raw, marg(0.5)).unwrap();
        let e = ood_embedding(&t).unwrap();
        assert_eq!(e.mean_dot(&[SimplexVector::one_hot(3, 2)]), 0.0);
        assert_eq!(e.mean_dot(&[SimplexVector::one_hot(3, 1)]), 2.0);
    }

    #[test]
    fn longtail_single_group_is_shifted_accuracy() {
        let t = table(vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![0.5, 0.5]);
        let (obj, rows) = longtail_embeddings(&t, &[vec![0, 1]], &[1.0]).unwrap();
        for i in 0..2 {
            for c in 0..2 {
                assert!((obj.row(i)[c] - (t.p_y(i)[c] - 1.0)).abs() < 1e-12);
            }
        }
        // Pr(Y in G) = 1, so the row is [1, 1, 0] − 1
        assert_eq!(rows[0].row(0), &[0.0, 0.0, -1.0]);
    }

    #[test]
    fn longtail_substitution() {
        let t = table(vec![vec![0.5, 0.5]], vec![0.5]);
        let (_, rows) = longtail_embeddings(&t, &[vec![0], vec![1]], &[1.0, 1.0]).unwrap();
        // Pr(G|x)/Pr(G) = 1
        assert_eq!(rows[0].row(0), &[0.5, 0.5, -0.5]);
    }

    #[test]
    fn missing_column_for_requested_constraint() {
        let raw = RawScores {
            p_y: vec![vec![0.5, 0.5]],
            p_agree: vec![0.5],
            ..Default::default()
        };
        let t = ScoreTable::new(raw, marg(0.5)).unwrap();
        match build_embeddings(&t, &[0], &[ConstraintSpec::Dp { delta: 0.1 }]) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "p_m1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typek_zero_marginal_rejected() {
        let mut t = table(vec![vec![0.5, 0.5]], vec![0.5]);
        t.marginals.p_label = vec![1.0, 0.0];
        t.p_mneq_y.insert(1, vec![0.1]);
        assert!(typek_embedding(&t, 1).is_err());
    }

    #[test]
    fn spec_parses_from_toml() {
        #[derive(Deserialize)]
        struct Wrap {
            constraint: Vec<ConstraintSpec>,
        }
        let w: Wrap = toml::from_str(
            "[[constraint]]\nkind = \"dp\"\ndelta = 0.05\n[[constraint]]\nkind = \"typek\"\ndelta = 0.2\nk = 1\n",
        )
        .unwrap();
        assert_eq!(w.constraint[1], ConstraintSpec::Typek { delta: 0.2, k: 1 });
    }
}

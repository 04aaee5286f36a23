//! Per-instance probability scores feeding the embedding functions, either
//! fitted with logistic models on the train split or ingested from CSV.
//!
//! Score CSV columns: `p_y_0..p_y_{L-1}`, `p_agree`, and optionally `p_m1`,
//! `p_m1_y1`, `p_m0_y0`, `p_mneq_y_<k>`, `density_ratio`. Group and label
//! marginals travel in a sidecar `key = value` file (`p_group_<a>`,
//! `p_label_<y>`, `p_label_<y>_group_<a>`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::logistic::{with_intercept, BinaryLogistic, Design, FitInfo, GdConfig, SoftmaxLogistic};

/// Probabilities are clipped to `[EPS_P, 1 − EPS_P]`.
pub const EPS_P: f64 = 1e-6;
const RANGE_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-6;

pub fn clip(p: f64) -> f64 {
    p.clamp(EPS_P, 1.0 - EPS_P)
}

/// Population marginals `Pr(A=a)`, `Pr(Y=y)` and `Pr(Y=y, A=a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub p_group: Vec<f64>,
    pub p_label: Vec<f64>,
    /// Indexed `[y][a]`.
    pub p_label_group: Vec<Vec<f64>>,
}

impl Marginals {
    /// Plug-in frequencies on a dataset.
    pub fn empirical(ds: &LabeledDataset) -> Self {
        let n = ds.len().max(1) as f64;
        let (l, g) = (ds.num_classes(), ds.num_groups());
        let mut p_group = vec![0.0; g];
        let mut p_label = vec![0.0; l];
        let mut p_label_group = vec![vec![0.0; g]; l];
        for r in ds.records() {
            p_group[r.group] += 1.0 / n;
            p_label[r.label] += 1.0 / n;
            p_label_group[r.label][r.group] += 1.0 / n;
        }
        Self {
            p_group,
            p_label,
            p_label_group,
        }
    }

    /// Errors naming the first empty `(y, a)` cell among binary labels and groups 0/1.
    pub fn require_joint_cells(&self) -> Result<()> {
        for (y, row) in self.p_label_group.iter().enumerate() {
            for (a, &p) in row.iter().enumerate() {
                if p <= 0.0 {
                    return Err(Error::EmptyCell(format!("Y={y}, A={a}")));
                }
            }
        }
        Ok(())
    }

    pub fn require_groups(&self) -> Result<()> {
        for (a, &p) in self.p_group.iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::EmptyCell(format!("A={a}")));
            }
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (a, p) in self.p_group.iter().enumerate() {
            out.push_str(&format!("p_group_{a} = {p:?}\n"));
        }
        for (y, p) in self.p_label.iter().enumerate() {
            out.push_str(&format!("p_label_{y} = {p:?}\n"));
        }
        for (y, row) in self.p_label_group.iter().enumerate() {
            for (a, p) in row.iter().enumerate() {
                out.push_str(&format!("p_label_{y}_group_{a} = {p:?}\n"));
            }
        }
        out
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let table: BTreeMap<String, f64> =
            toml::from_str(text).map_err(|e| Error::Serde(format!("marginals sidecar: {e}")))?;
        let get = |key: &str| table.get(key).copied().ok_or_else(|| Error::MissingColumn(key.to_string()));
        let count = |prefix: &str| {
            (0..)
                .take_while(|i| table.contains_key(&format!("{prefix}{i}")))
                .count()
        };
        let g = count("p_group_");
        let l = count("p_label_");
        if g == 0 || l == 0 {
            return Err(Error::MissingColumn(if g == 0 { "p_group_0" } else { "p_label_0" }.into()));
        }
        let p_group = (0..g).map(|a| get(&format!("p_group_{a}"))).collect::<Result<_>>()?;
        let p_label = (0..l).map(|y| get(&format!("p_label_{y}"))).collect::<Result<_>>()?;
        let p_label_group = (0..l)
            .map(|y| (0..g).map(|a| get(&format!("p_label_{y}_group_{a}"))).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Ok(Self {
            p_group,
            p_label,
            p_label_group,
        })
    }
}

/// Column-oriented per-instance scores; all probability columns are clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    num_classes: usize,
    /// Row-major `n × L` estimates of `Pr(Y=y | x)`.
    p_y: Vec<f64>,
    pub p_agree: Vec<f64>,
    pub p_m1: Option<Vec<f64>>,
    pub p_m1_y1: Option<Vec<f64>>,
    pub p_m0_y0: Option<Vec<f64>>,
    /// `Pr(M≠k, Y=k | x)` keyed by `k`.
    pub p_mneq_y: BTreeMap<usize, Vec<f64>>,
    /// `f_out(x) / f_in(x)`; not a probability and never clipped.
    pub density_ratio: Option<Vec<f64>>,
    pub marginals: Marginals,
}

/// Unvalidated columns, as produced by a model or a file.
#[derive(Debug, Clone, Default)]
pub struct RawScores {
    pub p_y: Vec<Vec<f64>>,
    pub p_agree: Vec<f64>,
    pub p_m1: Option<Vec<f64>>,
    pub p_m1_y1: Option<Vec<f64>>,
    pub p_m0_y0: Option<Vec<f64>>,
    pub p_mneq_y: BTreeMap<usize, Vec<f64>>,
    pub density_ratio: Option<Vec<f64>>,
}

fn check_range(column: &str, values: &[f64]) -> Result<()> {
    for (row, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
            return Err(Error::ProbabilityRange {
                column: column.to_string(),
                row,
                value: v,
            });
        }
    }
    Ok(())
}

impl ScoreTable {
    /// Validates ranges and normalization, then clips every probability column.
    pub fn new(raw: RawScores, marginals: Marginals) -> Result<Self> {
        let n = raw.p_y.len();
        let l = raw.p_y.first().map_or(0, Vec::len);
        if l == 0 {
            return Err(Error::Invalid("score table needs at least one class column".into()));
        }
        let same_len = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != n {
                return Err(Error::Structure(format!("column `{name}` has {} rows, expected {n}", v.len())));
            }
            Ok(())
        };
        let mut p_y = Vec::with_capacity(n * l);
        for (row, probs) in raw.p_y.iter().enumerate() {
            if probs.len() != l {
                return Err(Error::Structure(format!("row {row} has {} class scores", probs.len())));
            }
            for (y, &p) in probs.iter().enumerate() {
                check_range(&format!("p_y_{y}"), std::slice::from_ref(&p)).map_err(|_| Error::ProbabilityRange {
                    column: format!("p_y_{y}"),
                    row,
                    value: p,
                })?;
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::Invalid(format!("row {row}: class scores sum to {total}")));
            }
            p_y.extend(probs.iter().map(|&p| clip(p)));
        }
        let clip_col = |name: &str, v: Vec<f64>| -> Result<Vec<f64>> {
            same_len(name, &v)?;
            check_range(name, &v)?;
            Ok(v.into_iter().map(clip).collect())
        };
        let p_agree = clip_col("p_agree", raw.p_agree)?;
        let p_m1 = raw.p_m1.map(|v| clip_col("p_m1", v)).transpose()?;
        let p_m1_y1 = raw.p_m1_y1.map(|v| clip_col("p_m1_y1", v)).transpose()?;
        let p_m0_y0 = raw.p_m0_y0.map(|v| clip_col("p_m0_y0", v)).transpose()?;
        let mut p_mneq_y = BTreeMap::new();
        for (k, v) in raw.p_mneq_y {
            if k >= l {
                return Err(Error::Invalid(format!("p_mneq_y_{k} refers to a class outside [0, {}]", l - 1)));
            }
            p_mneq_y.insert(k, clip_col(&format!("p_mneq_y_{k}"), v)?);
        }
        if let Some(r) = &raw.density_ratio {
            same_len("density_ratio", r)?;
            if let Some((row, &v)) = r.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
                return Err(Error::Invalid(format!("density_ratio row {row} is {v}")));
            }
        }
        if marginals.p_label.len() != l {
            return Err(Error::Structure(format!(
                "marginals cover {} labels, scores cover {l}",
                marginals.p_label.len()
            )));
        }
        Ok(Self {
            num_classes: l,
            p_y,
            p_agree,
            p_m1,
            p_m1_y1,
            p_m0_y0,
            p_mneq_y,
            density_ratio: raw.density_ratio,
            marginals,
        })
    }

    pub fn len(&self) -> usize {
        self.p_agree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_agree.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn p_y(&self, i: usize) -> &[f64] {
        &self.p_y[i * self.num_classes..(i + 1) * self.num_classes]
    }

    /// Marginals estimated on these rows: group frequencies, and label masses
    /// `mean 1{a_i = a} Pr(Y = y | x_i)` in place of label counts.
    pub fn plug_in_marginals(&self, groups: &[usize]) -> Result<Marginals> {
        if groups.len() != self.len() {
            return Err(Error::Invalid(format!("{} groups for {} score rows", groups.len(), self.len())));
        }
        let n = self.len().max(1) as f64;
        let l = self.num_classes;
        let g = groups.iter().map(|&a| a + 1).max().unwrap_or(0).max(self.marginals.p_group.len());
        let mut m = Marginals {
            p_group: vec![0.0; g],
            p_label: vec![0.0; l],
            p_label_group: vec![vec![0.0; g]; l],
        };
        for (i, &a) in groups.iter().enumerate() {
            m.p_group[a] += 1.0 / n;
            for (y, p) in self.p_y(i).iter().enumerate() {
                m.p_label[y] += p / n;
                m.p_label_group[y][a] += p / n;
            }
        }
        Ok(m)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let col = match name {
            "p_agree" => Some(&self.p_agree),
            "p_m1" => self.p_m1.as_ref(),
            "p_m1_y1" => self.p_m1_y1.as_ref(),
            "p_m0_y0" => self.p_m0_y0.as_ref(),
            "density_ratio" => self.density_ratio.as_ref(),
            other => other
                .strip_prefix("p_mneq_y_")
                .and_then(|k| k.parse::<usize>().ok())
                .and_then(|k| self.p_mneq_y.get(&k)),
        };
        col.map(Vec::as_slice).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Rows at `indices`, sharing marginals.
    pub fn subset(&self, indices: &[usize]) -> ScoreTable {
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let l = self.num_classes;
        ScoreTable {
            num_classes: l,
            p_y: indices.iter().flat_map(|&i| self.p_y[i * l..(i + 1) * l].iter().copied()).collect(),
            p_agree: pick(&self.p_agree),
            p_m1: self.p_m1.as_ref().map(pick),
            p_m1_y1: self.p_m1_y1.as_ref().map(pick),
            p_m0_y0: self.p_m0_y0.as_ref().map(pick),
            p_mneq_y: self.p_mneq_y.iter().map(|(k, v)| (*k, pick(v))).collect(),
            density_ratio: self.density_ratio.as_ref().map(pick),
            marginals: self.marginals.clone(),
        }
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.num_classes).map(|y| format!("p_y_{y}")).collect();
        h.push("p_agree".into());
        for (name, col) in [("p_m1", &self.p_m1), ("p_m1_y1", &self.p_m1_y1), ("p_m0_y0", &self.p_m0_y0)] {
            if col.is_some() {
                h.push(name.into());
            }
        }
        h.extend(self.p_mneq_y.keys().map(|k| format!("p_mneq_y_{k}")));
        if self.density_ratio.is_some() {
            h.push("density_ratio".into());
        }
        h
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header = self.header();
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.p_y(i).iter().map(|v| format!("{v:?}")).collect();
            for name in header.iter().skip(self.num_classes) {
                row.push(format!("{:?}", self.column(name)?[i]));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes the score CSV and its marginals sidecar.
    pub fn write(&self, csv_path: impl AsRef<Path>, marginals_path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(csv_path)?)?;
        std::fs::write(marginals_path, self.marginals.to_kv_string())?;
        Ok(())
    }

    /// Reads the score CSV; `expected_rows` enforces the join with a dataset.
    pub fn from_csv_reader<R: Read>(reader: R, marginals: Marginals, expected_rows: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns: BTreeMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (h, v) in headers.iter().zip(rec.iter()) {
                let x = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("row {row}: `{h}` is not numeric: `{v}`")))?;
                columns.get_mut(h).expect("header column").push(x);
            }
        }
        let l = (0..).take_while(|y| columns.contains_key(&format!("p_y_{y}"))).count();
        if l == 0 {
            return Err(Error::MissingColumn("p_y_0".into()));
        }
        let n = columns[&"p_y_0".to_string()].len();
        if let Some(expected) = expected_rows {
            if n != expected {
                return Err(Error::Structure(format!("score file has {n} rows, dataset has {expected}")));
            }
        }
        let p_y = (0..n)
            .map(|i| (0..l).map(|y| columns[&format!("p_y_{y}")][i]).collect())
            .collect();
        let p_agree = columns
            .remove("p_agree")
            .ok_or_else(|| Error::MissingColumn("p_agree".into()))?;
        let p_mneq_y = columns
            .iter()
            .filter_map(|(h, v)| {
                h.strip_prefix("p_mneq_y_")
                    .and_then(|k| k.parse::<usize>().ok())
                    .map(|k| (k, v.clone()))
            })
            .collect();
        let raw = RawScores {
            p_y,
            p_agree,
            p_m1: columns.remove("p_m1"),
            p_m1_y1: columns.remove("p_m1_y1"),
            p_m0_y0: columns.remove("p_m0_y0"),
            p_mneq_y,
            density_ratio: columns.remove("density_ratio"),
        };
        ScoreTable::new(raw, marginals)
    }

    pub fn read(csv_path: impl AsRef<Path>, marginals_path: impl AsRef<Path>, expected_rows: Option<usize>) -> Result<Self> {
        let marginals = Marginals::from_kv_str(&std::fs::read_to_string(marginals_path)?)?;
        Self::from_csv_reader(std::fs::File::open(csv_path)?, marginals, expected_rows)
    }
}

/// How expert-derived scores are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertModel {
    /// One logistic model per expert-derived event.
    #[default]
    Joint,
    /// One logistic model of `Pr(M = k | Y = k, x)` per class, fitted on the
    /// records with `y = k` and combined with the label model.
    Conditional,
}

/// Options for [`fit_scores`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub gd: GdConfig,
    pub expert_model: ExpertModel,
    /// Add `feature × group` interaction columns so each group gets its own slope.
    pub group_interactions: bool,
    /// Classes `k` for which `Pr(M≠k, Y=k | x)` is fitted. Empty means all.
    pub mneq_classes: Vec<usize>,
    /// Require every `(y, a)` cell to be populated (fairness constraints need it).
    pub require_joint_cells: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gd: GdConfig::default(),
            expert_model: ExpertModel::Joint,
            group_interactions: true,
            mneq_classes: Vec::new(),
            require_joint_cells: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

/// Fitted estimators mapping records to score rows. Immutable after fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreModel {
    num_classes: usize,
    num_groups: usize,
    group_interactions: bool,
    standardizer: Standardizer,
    label_model: SoftmaxLogistic,
    agree_model: Option<BinaryLogistic>,
    /// `Pr(M = k | Y = k, x)` per class; empty for the joint expert model.
    #[serde(default)]
    expert_given_label: Vec<BinaryLogistic>,
    /// Classes scored for `Pr(M≠k, Y=k | x)` under the conditional expert model.
    #[serde(default)]
    mneq_classes: Vec<usize>,
    m1_model: Option<BinaryLogistic>,
    m1_y1_model: Option<BinaryLogistic>,
    m0_y0_model: Option<BinaryLogistic>,
    mneq_models: BTreeMap<usize, BinaryLogistic>,
    pub marginals: Marginals,
    /// Optimizer diagnostics per target; non-convergence is recorded here, not raised.
    pub fit_info: BTreeMap<String, FitInfo>,
    pub warnings: Vec<String>,
}

impl ScoreModel {
    fn expand(&self, features: &[f64], group: usize) -> Vec<f64> {
        expand_row(
            features,
            group,
            &self.standardizer,
            self.num_groups,
            self.group_interactions,
        )
    }

    /// Scores every record of `ds`.
    pub fn score(&self, ds: &LabeledDataset) -> Result<ScoreTable> {
        let mut raw = RawScores::default();
        let l = self.num_classes;
        let mut m1 = Vec::new();
        let mut m1y1 = Vec::new();
        let mut m0y0 = Vec::new();
        let conditional = !self.expert_given_label.is_empty();
        let mneq_keys: Vec<usize> = if conditional {
            self.mneq_classes.clone()
        } else {
            self.mneq_models.keys().copied().collect()
        };
        let mut mneq: BTreeMap<usize, Vec<f64>> = mneq_keys.iter().map(|&k| (k, Vec::new())).collect();
        for r in ds.records() {
            if r.group >= self.num_groups {
                return Err(Error::Invalid(format!("group {} unseen during fitting", r.group)));
            }
            let x = with_intercept(&self.expand(&r.features, r.group));
            let probs = self.label_model.predict(&x);
            debug_assert_eq!(probs.len(), l);
            raw.p_y.push(probs);
            if !self.expert_given_label.is_empty() {
                let py = raw.p_y.last().expect("just pushed");
                let c: Vec<f64> = self.expert_given_label.iter().map(|m| m.predict(&x)).collect();
                raw.p_agree.push(py.iter().zip(&c).map(|(p, c)| p * c).sum());
                if l == 2 {
                    m1y1.push(py[1] * c[1]);
                    m0y0.push(py[0] * c[0]);
                    m1.push(py[1] * c[1] + py[0] * (1.0 - c[0]));
                }
                for &k in &self.mneq_classes {
                    mneq.get_mut(&k).expect("key").push(py[k] * (1.0 - c[k]));
                }
                continue;
            }
            raw.p_agree.push(self.agree_model.as_ref().expect("joint expert model").predict(&x));
            if let Some(m) = &self.m1_model {
                m1.push(m.predict(&x));
            }
            if let Some(m) = &self.m1_y1_model {
                m1y1.push(m.predict(&x));
            }
            if let Some(m) = &self.m0_y0_model {
                m0y0.push(m.predict(&x));
            }
            for (k, m) in &self.mneq_models {
                mneq.get_mut(k).expect("key").push(m.predict(&x));
            }
        }
        let binary = l == 2 && conditional;
        raw.p_m1 = (binary || self.m1_model.is_some()).then_some(m1);
        raw.p_m1_y1 = (binary || self.m1_y1_model.is_some()).then_some(m1y1);
        raw.p_m0_y0 = (binary || self.m0_y0_model.is_some()).then_some(m0y0);
        raw.p_mneq_y = mneq;
        ScoreTable::new(raw, self.marginals.clone())
    }
}

fn expand_row(features: &[f64], group: usize, st: &Standardizer, num_groups: usize, interactions: bool) -> Vec<f64> {
    let z: Vec<f64> = features
        .iter()
        .zip(st.mean.iter().zip(&st.scale))
        .map(|(x, (m, s))| (x - m) / s)
        .collect();
    let mut out = z.clone();
    for a in 1..num_groups {
        let ind = f64::from(u8::from(group == a));
        out.push(ind);
        if interactions {
            out.extend(z.iter().map(|v| v * ind));
        }
    }
    out
}

/// Fits `Pr(Y | x)` with a softmax model and each expert-derived target
/// (`1{m=y}`, `1{m=1}`, `1{m=1 ∧ y=1}`, `1{m=0 ∧ y=0}`, `1{m≠k ∧ y=k}`) with its
/// own binary logistic model; marginals are plug-in frequencies.
pub fn fit_scores(train: &LabeledDataset, cfg: &FitConfig) -> Result<ScoreModel> {
    if train.is_empty() {
        return Err(Error::Invalid("cannot fit scores on an empty train split".into()));
    }
    let marginals = Marginals::empirical(train);
    if cfg.require_joint_cells {
        marginals.require_joint_cells()?;
    }
    let l = train.num_classes();
    let g = train.num_groups();
    let p = train.num_features();
    let mut mean = vec![0.0; p];
    let mut sq = vec![0.0; p];
    let n = train.len() as f64;
    for r in train.records() {
        for (j, x) in r.features.iter().enumerate() {
            mean[j] += x / n;
            sq[j] += x * x / n;
        }
    }
    let scale = mean
        .iter()
        .zip(&sq)
        .map(|(m, s)| {
            let var = (s - m * m).max(0.0);
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let standardizer = Standardizer { mean, scale };
    let rows: Vec<Vec<f64>> = train
        .records()
        .iter()
        .map(|r| expand_row(&r.features, r.group, &standardizer, g, cfg.group_interactions))
        .collect();
    let design = Design::new(&rows);

    let mut fit_info = BTreeMap::new();
    let labels: Vec<usize> = train.labels().collect();
    let (label_model, info) = SoftmaxLogistic::fit(&design, &labels, l, &cfg.gd);
    fit_info.insert("p_y".to_string(), info);

    let mut binary = |name: &str, target: &dyn Fn(usize, usize) -> bool| {
        let t: Vec<f64> = train
            .records()
            .iter()
            .map(|r| f64::from(u8::from(target(r.expert, r.label))))
            .collect();
        let (m, info) = BinaryLogistic::fit(&design, &t, &cfg.gd);
        fit_info.insert(name.to_string(), info);
        m
    };
    let classes: Vec<usize> = if cfg.mneq_classes.is_empty() {
        (0..l).collect()
    } else {
        cfg.mneq_classes.clone()
    };
    if let Some(&k) = classes.iter().find(|&&k| k >= l) {
        return Err(Error::Invalid(format!("type-k class {k} outside [0, {}]", l - 1)));
    }
    let mut agree_model = None;
    let mut expert_given_label = Vec::new();
    let (mut m1_model, mut m1_y1_model, mut m0_y0_model) = (None, None, None);
    let mut mneq_models = BTreeMap::new();
    match cfg.expert_model {
        ExpertModel::Joint => {
            agree_model = Some(binary("p_agree", &|m, y| m == y));
            if l == 2 {
                m1_model = Some(binary("p_m1", &|m, _| m == 1));
                m1_y1_model = Some(binary("p_m1_y1", &|m, y| m == 1 && y == 1));
                m0_y0_model = Some(binary("p_m0_y0", &|m, y| m == 0 && y == 0));
            }
            for &k in &classes {
                mneq_models.insert(k, binary(&format!("p_mneq_y_{k}"), &|m, y| m != k && y == k));
            }
        }
        ExpertModel::Conditional => {
            for k in 0..l {
                let (sub, t): (Vec<Vec<f64>>, Vec<f64>) = train
                    .records()
                    .iter()
                    .zip(&rows)
                    .filter(|(r, _)| r.label == k)
                    .map(|(r, x)| (x.clone(), f64::from(u8::from(r.expert == k))))
                    .unzip();
                if sub.is_empty() {
                    return Err(Error::Invalid(format!("no train records with label {k} for the conditional expert model")));
                }
                let (m, info) = BinaryLogistic::fit(&Design::new(&sub), &t, &cfg.gd);
                fit_info.insert(format!("p_m_eq_y_given_y_{k}"), info);
                expert_given_label.push(m);
            }
        }
    }

    let warnings = fit_info
        .iter()
        .filter(|(_, i)| !i.converged)
        .map(|(name, i)| {
            format!(
                "{name}: no convergence after {} iterations (max |grad| = {:.2e})",
                i.iterations, i.grad_max
            )
        })
        .collect();

    Ok(ScoreModel {
        num_classes: l,
        num_groups: g,
        group_interactions: cfg.group_interactions,
        standardizer,
        label_model,
        agree_model,
        expert_given_label,
        mneq_classes: classes,
        m1_model,
        m1_y1_model,
        m0_y0_model,
        mneq_models,
        marginals,
        fit_info,
        warnings,
    })
}

//! Labeled records `(x, a, m, y)` with train/val/test split tags, plus the CSV
//! format used on disk.
//!
//! CSV layout: a header row with `feature_0..feature_p`, `group`, `expert`,
//! `label` and an optional `split` column (`train` | `val` | `test`). When the
//! split column is absent, records are assigned 60/20/20 by a seeded shuffle.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub group: usize,
    pub expert: usize,
    pub label: usize,
    pub split: Split,
}

/// An immutable collection of records sharing one class count and feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    records: Vec<Record>,
    num_classes: usize,
    num_groups: usize,
    num_features: usize,
}

impl LabeledDataset {
    /// Validates class and group indices. The group count is inferred as
    /// `max(group) + 1`.
    pub fn new(records: Vec<Record>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Invalid("num_classes must be positive".into()));
        }
        let num_features = records.first().map_or(0, |r| r.features.len());
        let mut num_groups = 1;
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != num_features {
                return Err(Error::Structure(format!(
                    "record {i} has {} features, expected {num_features}",
                    r.features.len()
                )));
            }
            if r.label >= num_classes || r.expert >= num_classes {
                return Err(Error::Invalid(format!(
                    "record {i}: class index out of range [0, {}]",
                    num_classes - 1
                )));
            }
            if let Some(bad) = r.features.iter().find(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("record {i}: non-finite feature {bad}")));
            }
            num_groups = num_groups.max(r.group + 1);
        }
        Ok(Self {
            records,
            num_classes,
            num_groups,
            num_features,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Indices of records tagged with `split`.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// The sub-dataset of one split. Errors if that split is empty.
    pub fn split(&self, split: Split) -> Result<LabeledDataset> {
        let idx = self.split_indices(split);
        if idx.is_empty() {
            return Err(Error::Invalid(format!("split `{}` is empty", split.as_str())));
        }
        Ok(self.subset(&idx))
    }

    /// Records at `indices` (repetitions allowed), keeping the class and group counts.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            num_classes: self.num_classes,
            num_groups: self.num_groups,
            num_features: self.num_features,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.label)
    }

    pub fn read_csv(path: impl AsRef<Path>, num_classes: Option<usize>, seed: u64) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, num_classes, seed)
    }

    /// Parses the CSV layout. `num_classes` defaults to `max(label, expert) + 1`
    /// (at least 2).
    pub fn from_csv_reader<R: Read>(reader: R, num_classes: Option<usize>, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let group_col = col("group")?;
        let expert_col = col("expert")?;
        let label_col = col("label")?;
        let split_col = headers.iter().position(|h| h.trim() == "split");

        let mut feature_cols: Vec<(usize, usize)> = headers
            .iter()
            .enumerate()
            .filter_map(|(c, h)| {
                h.trim()
                    .strip_prefix("feature_")
                    .and_then(|s| s.parse::<usize>().ok())
                    .map(|k| (k, c))
            })
            .collect();
        feature_cols.sort_unstable();
        for (expected, (k, _)) in feature_cols.iter().enumerate() {
            if *k != expected {
                return Err(Error::MissingColumn(format!("feature_{expected}")));
            }
        }

        let parse_usize = |s: &str, row: usize, name: &str| -> Result<usize> {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("row {row}: column `{name}` is not a non-negative integer: `{s}`")))
        };

        let mut records = Vec::new();
        let mut has_split = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let features = feature_cols
                .iter()
                .map(|&(k, c)| {
                    rec.get(c)
                        .unwrap_or("")
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("row {row}: feature_{k} is not numeric")))
                })
                .collect::<Result<Vec<_>>>()?;
            let group = parse_usize(rec.get(group_col).unwrap_or(""), row, "group")?;
            let expert = parse_usize(rec.get(expert_col).unwrap_or(""), row, "expert")?;
            let label = parse_usize(rec.get(label_col).unwrap_or(""), row, "label")?;
            let split = match split_col.and_then(|c| rec.get(c)).map(str::trim) {
                Some(s) if !s.is_empty() => {
                    has_split.push(true);
                    s.parse()?
                }
                _ => {
                    has_split.push(false);
                    Split::Train
                }
            };
            records.push(Record {
                features,
                group,
                expert,
                label,
                split,
            });
        }

        if has_split.iter().any(|s| !s) {
            assign_splits(&mut records, seed);
        }

        let inferred = records
            .iter()
            .map(|r| r.label.max(r.expert) + 1)
            .max()
            .unwrap_or(2)
            .max(2);
        Self::new(records, num_classes.unwrap_or(inferred))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.to_csv_writer(file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_features).map(|k| format!("feature_{k}")).collect();
        header.extend(["group", "expert", "label", "split"].map(String::from));
        wtr.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.features.iter().map(|v| format!("{v}")).collect();
            row.push(r.group.to_string());
            row.push(r.expert.to_string());
            row.push(r.label.to_string());
            row.push(r.split.as_str().to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Deterministic 60/20/20 train/val/test assignment by seeded shuffle.
pub fn assign_splits(records: &mut [Record], seed: u64) {
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n * 3) / 5;
    let n_val = n / 5;
    for (pos, &i) in order.iter().enumerate() {
        records[i].split = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
}

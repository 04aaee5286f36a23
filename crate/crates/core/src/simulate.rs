//! Synthetic two-group populations with closed-form conditional
//! probabilities, for separating estimation error from optimization error.
//!
//! Generative model: `a ~ Bern(π)`, `u ~ U(0, 1)`,
//! `y ~ Bern(σ(w·u + b_a))`, and the expert reports `y` with probability
//! `acc_a`, the flipped label otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Record, Split};
use crate::error::{Error, Result};
use crate::logistic::sigmoid;
use crate::scores::{Marginals, RawScores, ScoreTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// `Pr(A = 1)`.
    pub group1_share: f64,
    /// Slope `w` of the label logit in the latent score.
    pub informativeness: f64,
    /// Intercepts `b_0`, `b_1` of the label logit per group.
    pub label_bias: [f64; 2],
    /// Expert accuracy per group.
    pub expert_accuracy: [f64; 2],
    /// Standard-normal columns appended after the latent score.
    pub noise_features: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_train: 10_000,
            n_val: 10_000,
            n_test: 10_000,
            group1_share: 0.5,
            informativeness: 6.0,
            label_bias: [-3.0, -2.0],
            expert_accuracy: [0.85, 0.60],
            noise_features: 2,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} = {v} is not a probability")))
            }
        };
        prob("group1_share", self.group1_share)?;
        prob("expert_accuracy[0]", self.expert_accuracy[0])?;
        prob("expert_accuracy[1]", self.expert_accuracy[1])?;
        if self.n_train + self.n_val + self.n_test == 0 {
            return Err(Error::Invalid("scenario needs at least one record".into()));
        }
        if !self.informativeness.is_finite() || self.label_bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Invalid("label model parameters must be finite".into()));
        }
        Ok(())
    }

    /// `Pr(Y = 1 | A = a) = ∫₀¹ σ(w·u + b_a) du`.
    pub fn base_rate(&self, a: usize) -> f64 {
        let (w, b) = (self.informativeness, self.label_bias[a]);
        if w.abs() < 1e-12 {
            return sigmoid(b);
        }
        (softplus(w + b) - softplus(b)) / w
    }

    /// Population marginals of the generative model.
    pub fn marginals(&self) -> Marginals {
        let pa = [1.0 - self.group1_share, self.group1_share];
        let r = [self.base_rate(0), self.base_rate(1)];
        let p_label_group = vec![vec![pa[0] * (1.0 - r[0]), pa[1] * (1.0 - r[1])], vec![pa[0] * r[0], pa[1] * r[1]]];
        Marginals {
            p_group: pa.to_vec(),
            p_label: p_label_group.iter().map(|row| row.iter().sum()).collect(),
            p_label_group,
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A sampled population and its exact conditional probabilities.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: LabeledDataset,
    pub truth: ScoreTable,
}

/// Draws train, validation and test records (in that order) from `config`.
pub fn generate(config: &ScenarioConfig) -> Result<Simulation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    let mut raw = RawScores::default();
    let (mut m1, mut m1y1, mut m0y0, mut neq0, mut neq1) = (vec![], vec![], vec![], vec![], vec![]);
    let splits = [
        (Split::Train, config.n_train),
        (Split::Val, config.n_val),
        (Split::Test, config.n_test),
    ];
    for (split, n) in splits {
        for _ in 0..n {
            let a = usize::from(rng.gen::<f64>() < config.group1_share);
            let u: f64 = rng.gen();
            let p1 = sigmoid(config.informativeness * u + config.label_bias[a]);
            let y = usize::from(rng.gen::<f64>() < p1);
            let acc = config.expert_accuracy[a];
            let m = if rng.gen::<f64>() < acc { y } else { 1 - y };
            let mut features = vec![u];
            features.extend((0..config.noise_features).map(|_| rng.sample::<f64, _>(StandardNormal)));
            records.push(Record {
                features,
                group: a,
                expert: m,
                label: y,
                split,
            });
            raw.p_y.push(vec![1.0 - p1, p1]);
            raw.p_agree.push(acc);
            m1.push(acc * p1 + (1.0 - acc) * (1.0 - p1));
            m1y1.push(acc * p1);
            m0y0.push(acc * (1.0 - p1));
            neq0.push((1.0 - acc) * (1.0 - p1));
            neq1.push((1.0 - acc) * p1);
        }
    }
    raw.p_m1 = Some(m1);
    raw.p_m1_y1 = Some(m1y1);
    raw.p_m0_y0 = Some(m0y0);
    raw.p_mneq_y.insert(0, neq0);
    raw.p_mneq_y.insert(1, neq1);
    let truth = ScoreTable::new(raw, config.marginals())?;
    Ok(Simulation {
        dataset: LabeledDataset::new(records, 2)?,
        truth,
    })
}

//! Nonparametric bootstrap over records.
//!
//! Each iteration draws its own stream from a ChaCha generator keyed by the
//! caller's seed, so iterations are independent and reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 10;

/// Spread of one metric across resamples: extremes plus 5th/95th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub p05: f64,
    pub p95: f64,
}

impl Interval {
    fn from_samples(mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        Self {
            low: xs[0],
            high: xs[xs.len() - 1],
            p05: percentile(&xs, 0.05),
            p95: percentile(&xs, 0.95),
        }
    }
}

/// Linear-interpolated percentile of sorted samples.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Resamples `n` record indices with replacement `iterations` times and
/// evaluates `metrics` on each resample. Returns one interval per metric.
pub fn bootstrap<F>(n: usize, iterations: usize, seed: u64, metrics: F) -> Result<Vec<Interval>>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    if n == 0 {
        return Err(Error::Invalid("bootstrap over an empty dataset".into()));
    }
    if iterations == 0 {
        return Err(Error::Invalid("bootstrap needs at least one iteration".into()));
    }
    let runs: Vec<Vec<f64>> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(it as u64 + 1);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            metrics(&idx)
        })
        .collect::<Result<_>>()?;
    let m = runs[0].len();
    if runs.iter().any(|r| r.len() != m) {
        return Err(Error::Structure("metric evaluator returned varying lengths".into()));
    }
    Ok((0..m)
        .map(|j| Interval::from_samples(runs.iter().map(|r| r[j]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_has_degenerate_interval() {
        let iv = bootstrap(50, 10, 3, |_| Ok(vec![0.7])).unwrap();
        assert_eq!(iv[0].low, 0.7);
        assert_eq!(iv[0].high, 0.7);
        assert_eq!(iv[0].p05, 0.7);
    }

    #[test]
    fn same_seed_same_interval() {
        let xs: Vec<f64> = (0..40).map(|i| (i * 7 % 13) as f64).collect();
        let mean = |idx: &[usize]| Ok(vec![idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64]);
        let a = bootstrap(xs.len(), 10, 42, mean).unwrap();
        let b = bootstrap(xs.len(), 10, 42, mean).unwrap();
        assert_eq!(a, b);
        assert!(a[0].low <= a[0].p05 && a[0].p05 <= a[0].p95 && a[0].p95 <= a[0].high);
    }

    #[test]
    fn single_record_resamples_identically() {
        let iv = bootstrap(1, 25, 9, |idx| Ok(vec![idx.iter().sum::<usize>() as f64])).unwrap();
        assert_eq!(iv[0].low, iv[0].high);
    }

    #[test]
    fn empty_dataset_errors() {
        assert!(bootstrap(0, 10, 1, |_| Ok(vec![])).is_err());
    }
}

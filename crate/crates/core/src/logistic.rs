//! Binary and multinomial logistic regression fitted by full-batch gradient
//! descent with Nesterov momentum and gradient-based restarts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub max_iter: usize,
    /// Stop once the largest absolute gradient entry falls below this.
    pub tol: f64,
    pub l2: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            tol: 1e-6,
            l2: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub iterations: usize,
    pub converged: bool,
    pub grad_max: f64,
}

/// Dense row-major design matrix with a trailing intercept column.
#[derive(Debug, Clone)]
pub struct Design {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Design {
    pub fn new(features: &[Vec<f64>]) -> Self {
        let p = features.first().map_or(0, Vec::len);
        let cols = p + 1;
        let mut data = Vec::with_capacity(features.len() * cols);
        for row in features {
            data.extend_from_slice(row);
            data.push(1.0);
        }
        Self {
            data,
            rows: features.len(),
            cols,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest eigenvalue of `XᵀX / n` by power iteration.
    fn gram_spectral_bound(&self) -> f64 {
        let mut v = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut lambda = 0.0;
        for _ in 0..50 {
            let mut out = vec![0.0; self.cols];
            for i in 0..self.rows {
                let r = self.row(i);
                let s = dot(r, &v);
                for (o, x) in out.iter_mut().zip(r) {
                    *o += s * x;
                }
            }
            let n = self.rows.max(1) as f64;
            out.iter_mut().for_each(|o| *o /= n);
            let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            v = out.iter().map(|x| x / norm).collect();
            lambda = norm;
        }
        // power iteration underestimates slightly before convergence
        lambda * 1.05 + 1e-12
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Accelerated gradient descent on a smooth convex objective with Lipschitz
/// constant `lipschitz`.
fn accelerated_descent<G>(dim: usize, lipschitz: f64, cfg: &GdConfig, mut grad: G) -> (Vec<f64>, FitInfo)
where
    G: FnMut(&[f64], &mut [f64]),
{
    let step = 1.0 / (lipschitz + cfg.l2);
    let mut w = vec![0.0; dim];
    let mut prev = w.clone();
    let mut look = w.clone();
    let mut g = vec![0.0; dim];
    let mut t = 1.0f64;
    let mut grad_max = f64::INFINITY;
    for it in 0..cfg.max_iter {
        grad(&look, &mut g);
        for (gi, li) in g.iter_mut().zip(&look) {
            *gi += cfg.l2 * li;
        }
        grad_max = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if grad_max < cfg.tol {
            return (
                look,
                FitInfo {
                    iterations: it,
                    converged: true,
                    grad_max,
                },
            );
        }
        prev.copy_from_slice(&w);
        for ((wi, li), gi) in w.iter_mut().zip(&look).zip(&g) {
            *wi = li - step * gi;
        }
        // restart momentum when the step points uphill
        let uphill: f64 = g.iter().zip(w.iter().zip(&prev)).map(|(gi, (a, b))| gi * (a - b)).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for ((li, wi), pi) in look.iter_mut().zip(&w).zip(&prev) {
            *li = wi + beta * (wi - pi);
        }
        t = t_next;
    }
    (
        w,
        FitInfo {
            iterations: cfg.max_iter,
            converged: false,
            grad_max,
        },
    )
}

/// Binary logistic model on a fixed feature expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryLogistic {
    pub weights: Vec<f64>,
}

impl BinaryLogistic {
    /// Fits `P(t = 1 | x)` to soft or hard targets in `[0, 1]`.
    pub fn fit(design: &Design, targets: &[f64], cfg: &GdConfig) -> (Self, FitInfo) {
        let n = design.rows as f64;
        let lipschitz = 0.25 * design.gram_spectral_bound();
        let (weights, info) = accelerated_descent(design.cols, lipschitz, cfg, |w, g| {
            g.iter_mut().for_each(|x| *x = 0.0);
            for (i, t) in targets.iter().enumerate() {
                let r = design.row(i);
                let err = sigmoid(dot(r, w)) - t;
                for (gj, xj) in g.iter_mut().zip(r) {
                    *gj += err * xj / n;
                }
            }
        });
        (Self { weights }, info)
    }

    pub fn predict(&self, row_with_intercept: &[f64]) -> f64 {
        sigmoid(dot(row_with_intercept, &self.weights))
    }
}

/// Multinomial (softmax) logistic model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftmaxLogistic {
    /// `classes × cols` weights, row-major.
    pub weights: Vec<f64>,
    pub classes: usize,
    pub cols: usize,
}

impl SoftmaxLogistic {
    pub fn fit(design: &Design, labels: &[usize], classes: usize, cfg: &GdConfig) -> (Self, FitInfo) {
        let n = design.rows as f64;
        let cols = design.cols;
        let lipschitz = 0.5 * design.gram_spectral_bound();
        let mut probs = vec![0.0; classes];
        let (weights, info) = accelerated_descent(classes * cols, lipschitz, cfg, |w, g| {
            g.iter_mut().for_each(|x| *x = 0.0);
            for (i, &y) in labels.iter().enumerate() {
                let r = design.row(i);
                softmax_into(w, r, classes, cols, &mut probs);
                for c in 0..classes {
                    let err = probs[c] - f64::from(u8::from(c == y));
                    let gc = &mut g[c * cols..(c + 1) * cols];
                    for (gj, xj) in gc.iter_mut().zip(r) {
                        *gj += err * xj / n;
                    }
                }
            }
        });
        (Self { weights, classes, cols }, info)
    }

    pub fn predict(&self, row_with_intercept: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        softmax_into(&self.weights, row_with_intercept, self.classes, self.cols, &mut out);
        out
    }
}

fn softmax_into(w: &[f64], r: &[f64], classes: usize, cols: usize, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for c in 0..classes {
        out[c] = dot(&w[c * cols..(c + 1) * cols], r);
        max = max.max(out[c]);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Appends the intercept to a raw feature row.
pub fn with_intercept(row: &[f64]) -> Vec<f64> {
    let mut v = row.to_vec();
    v.push(1.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_fit_matches_cell_frequencies() {
        // two cells with frequencies 0.2 and 0.7
        let mut x = Vec::new();
        let mut t = Vec::new();
        for i in 0..100 {
            x.push(vec![1.0, 0.0]);
            t.push(f64::from(u8::from(i < 20)));
            x.push(vec![0.0, 1.0]);
            t.push(f64::from(u8::from(i < 70)));
        }
        let d = Design::new(&x);
        let (m, info) = BinaryLogistic::fit(&d, &t, &GdConfig::default());
        assert!(info.converged, "{info:?}");
        assert!((m.predict(&[1.0, 0.0, 1.0]) - 0.2).abs() < 1e-3);
        assert!((m.predict(&[0.0, 1.0, 1.0]) - 0.7).abs() < 1e-3);
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 3) as f64]).collect();
        let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let d = Design::new(&x);
        let (m, _) = SoftmaxLogistic::fit(&d, &y, 3, &GdConfig::default());
        let p = m.predict(&[1.0, 1.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > p[0] && p[1] > p[2]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}

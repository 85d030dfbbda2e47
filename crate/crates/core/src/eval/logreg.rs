use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegSettings {
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm is at or below this.
    pub tol: f64,
}

impl Default for LogRegSettings {
    fn default() -> Self {
        LogRegSettings {
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

/// One class against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub class: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

impl BinaryModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub c: f64,
    pub n_features: usize,
    pub n_classes: usize,
    pub binaries: Vec<BinaryModel>,
}

impl LogRegModel {
    /// Class with the highest one-vs-rest score; ties go to the lower id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for b in &self.binaries {
            let s = b.score(x);
            if s > best.0 {
                best = (s, b.class);
            }
        }
        best.1
    }

    pub fn predict_rows(&self, rows: &[&[f64]]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Regularized binary logistic loss and its gradient.
///
/// `params` is `[w_0, .., w_{d-1}, b]`, `targets` are 0/1. The value is
/// `mean_i(log(1 + e^z_i) - t_i z_i) + |w|^2 / (2 C n)`; the bias is not
/// penalized.
pub fn logistic_objective(x: &[&[f64]], targets: &[f64], c: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let d = params.len() - 1;
    let n = x.len() as f64;
    let (w, b) = (&params[..d], params[d]);
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &t) in x.iter().zip(targets) {
        let z = dot(w, row) + b;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in grad[..d].iter_mut().zip(row.iter()) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let reg = 1.0 / (c * n);
    let mut value = loss / n;
    for (g, wj) in grad[..d].iter_mut().zip(w) {
        *g = *g / n + reg * wj;
        value += 0.5 * reg * wj * wj;
    }
    grad[d] /= n;
    (value, grad)
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

const HISTORY: usize = 10;

/// Limited-memory BFGS with Armijo backtracking. Full batch, no randomness.
fn minimize(x: &[&[f64]], targets: &[f64], c: f64, s: &LogRegSettings) -> (Vec<f64>, usize, f64) {
    let dim = x[0].len() + 1;
    let mut theta = vec![0.0; dim];
    let (mut f, mut g) = logistic_objective(x, targets, c, &theta);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut iter = 0;
    while iter < s.max_iter {
        let gn = norm2(&g);
        if gn <= s.tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (sv, yv, rho) in hist.iter().rev() {
            let a = rho * dot(sv, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((sv, yv, _)) = hist.back() {
            let gamma = dot(sv, yv) / dot(yv, yv);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((sv, yv, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(sv).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = if hist.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = logistic_objective(x, targets, c, &trial);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        iter += 1;
        let Some((next, fnext, gnext)) = accepted else {
            break;
        };
        let sv: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gnext.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > 1e-12 * norm2(&sv) * norm2(&yv) {
            if hist.len() == HISTORY {
                hist.pop_front();
            }
            hist.push_back((sv, yv, 1.0 / sy));
        }
        theta = next;
        f = fnext;
        g = gnext;
    }
    let gn = norm2(&g);
    (theta, iter, gn)
}

/// One-vs-rest L2 logistic regression over the classes present in `y`.
///
/// `n_classes` fixes the label space; classes absent from `y` get no
/// binary model and are never predicted.
pub fn train_logreg(
    x: &[&[f64]],
    y: &[usize],
    n_classes: usize,
    c: f64,
    settings: &LogRegSettings,
) -> Result<LogRegModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Parameter("training needs matching, non-empty rows and labels".into()));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    if !(0.001..=30.0).contains(&c) {
        log::warn!("C = {c} lies outside the usual [0.001, 30] range");
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Parameter("training rows must be finite and equally wide".into()));
    }
    let classes: BTreeSet<usize> = y.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training data has {} class(es), need at least 2",
            classes.len()
        )));
    }
    if let Some(&bad) = classes.iter().find(|&&k| k >= n_classes) {
        return Err(Error::Index {
            index: bad,
            len: n_classes,
        });
    }
    let binaries = classes
        .into_iter()
        .map(|k| {
            let targets: Vec<f64> = y.iter().map(|&v| if v == k { 1.0 } else { 0.0 }).collect();
            let (theta, iterations, grad_norm) = minimize(x, &targets, c, settings);
            BinaryModel {
                class: k,
                bias: theta[d],
                weights: theta[..d].to_vec(),
                iterations,
                grad_norm,
                converged: grad_norm <= settings.tol,
            }
        })
        .collect();
    Ok(LogRegModel {
        c,
        n_features: d,
        n_classes,
        binaries,
    })
}

//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random symmetric binary matrix with a unit diagonal.
pub fn random_symmetric(size: usize, density: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = vec![vec![false; size]; size];
    for i in 0..size {
        r[i][i] = true;
        for j in i + 1..size {
            let v = rng.gen_bool(density);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

/// Line lengths found by walking from every start cell, with no use of symmetry.
pub struct OracleLines {
    pub diagonal: BTreeMap<usize, u64>,
    pub vertical: BTreeMap<usize, u64>,
    pub white: BTreeMap<usize, u64>,
}

pub fn oracle_lines(r: &[Vec<bool>], exclude_loi: bool) -> OracleLines {
    let n = r.len();
    let mut diagonal = BTreeMap::new();
    let mut vertical = BTreeMap::new();
    let mut white = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            // a diagonal line starts where its up-left neighbour is absent
            let starts = r[i][j] && (i == 0 || j == 0 || !r[i - 1][j - 1]);
            if starts && !(exclude_loi && i == j) {
                let mut l = 0;
                while i + l < n && j + l < n && r[i + l][j + l] {
                    l += 1;
                }
                *diagonal.entry(l).or_insert(0) += 1;
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            for (want, map) in [(true, &mut vertical), (false, &mut white)] {
                if r[i][j] == want && (i == 0 || r[i - 1][j] != want) {
                    let mut l = 0;
                    while i + l < n && r[i + l][j] == want {
                        l += 1;
                    }
                    *map.entry(l).or_insert(0) += 1;
                }
            }
        }
    }
    OracleLines {
        diagonal,
        vertical,
        white,
    }
}

fn share(h: &BTreeMap<usize, u64>, min: usize) -> f64 {
    let all: u64 = h.iter().map(|(l, c)| *l as u64 * c).sum();
    let long: u64 = h.iter().filter(|(l, _)| **l >= min).map(|(l, c)| *l as u64 * c).sum();
    if all == 0 {
        0.0
    } else {
        long as f64 / all as f64
    }
}

fn longest(h: &BTreeMap<usize, u64>, min: usize) -> f64 {
    h.keys().filter(|l| **l >= min).max().copied().unwrap_or(0) as f64
}

fn mean(h: &BTreeMap<usize, u64>, min: usize) -> f64 {
    let lines: u64 = h.iter().filter(|(l, _)| **l >= min).map(|(_, c)| c).sum();
    let points: u64 = h.iter().filter(|(l, _)| **l >= min).map(|(l, c)| *l as u64 * c).sum();
    if lines == 0 {
        0.0
    } else {
        points as f64 / lines as f64
    }
}

fn entropy(h: &BTreeMap<usize, u64>, min: usize) -> f64 {
    let lines: u64 = h.iter().filter(|(l, _)| **l >= min).map(|(_, c)| c).sum();
    if lines == 0 {
        return 0.0;
    }
    h.iter()
        .filter(|(l, c)| **l >= min && **c > 0)
        .map(|(_, &c)| {
            let p = c as f64 / lines as f64;
            -p * p.ln()
        })
        .sum()
}

/// The twelve measures in canonical order, straight from their definitions.
pub fn oracle_measures(r: &[Vec<bool>], exclude_loi: bool) -> [f64; 12] {
    let n = r.len();
    let ones = r.iter().flatten().filter(|&&b| b).count();
    let lines = oracle_lines(r, exclude_loi);
    let (d, v, w) = (&lines.diagonal, &lines.vertical, &lines.white);
    [
        ones as f64 / (n * n) as f64,
        share(d, 2),
        longest(d, 2),
        mean(d, 2),
        entropy(d, 2),
        share(v, 2),
        longest(v, 2),
        mean(v, 2),
        entropy(v, 2),
        longest(w, 1),
        mean(w, 1),
        entropy(w, 1),
    ]
}

/// Linear-interpolation percentile on a sorted copy, `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Naive histogram mutual information between `x[t]` and `x[t + lag]`.
pub fn naive_ami(x: &[f64], lag: usize, bins: usize) -> f64 {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bin = |v: f64| (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1);
    let pairs: Vec<(usize, usize)> = (0..x.len() - lag).map(|t| (bin(x[t]), bin(x[t + lag]))).collect();
    let n = pairs.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    for &(a, b) in &pairs {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pa.entry(a).or_default() += 1.0 / n;
        *pb.entry(b).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(a, b), &p)| p * (p / (pa[&a] * pb[&b])).ln()).sum()
}

/// Naive false-nearest-neighbour fraction for dimension `m` from explicit vectors.
pub fn naive_fnn_fraction(s: &[f64], tau: usize, m: usize, r_tol: f64, a_tol: f64) -> f64 {
    let n = s.len();
    let count = n - m * tau;
    let point = |i: usize| -> Vec<f64> { (0..m).map(|k| s[i + k * tau]).collect() };
    let mean = s.iter().sum::<f64>() / n as f64;
    let sigma = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut false_nn = 0;
    for i in 0..count {
        let pi = point(i);
        let mut best = (f64::INFINITY, 0);
        for j in 0..count {
            if j == i {
                continue;
            }
            let d2: f64 = pi.iter().zip(point(j)).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 < best.0 {
                best = (d2, j);
            }
        }
        let r = best.0.sqrt();
        let delta = (s[i + m * tau] - s[best.1 + m * tau]).abs();
        if (delta > r_tol * r && delta > 1e-9 * sigma) || (r * r + delta * delta).sqrt() > a_tol * sigma {
            false_nn += 1;
        }
    }
    false_nn as f64 / count as f64
}

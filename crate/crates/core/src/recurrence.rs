//! Pairwise distances, threshold selection and recurrence plots.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Trajectory;
use crate::error::{Error, Result};

/// Distance norm between trajectory points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// q = 1
    Manhattan,
    /// q = 2
    Euclidean,
    /// q = infinity
    Supremum,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::Manhattan => diffs.sum(),
            Norm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Supremum => diffs.fold(0.0, f64::max),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "l1" | "manhattan" => Ok(Norm::Manhattan),
            "2" | "l2" | "euclidean" => Ok(Norm::Euclidean),
            "inf" | "linf" | "max" | "supremum" => Ok(Norm::Supremum),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::Manhattan => "manhattan",
            Norm::Euclidean => "euclidean",
            Norm::Supremum => "supremum",
        })
    }
}

/// Dense symmetric matrix of point-to-point distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    size: usize,
    norm: Norm,
    source_std: f64,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    /// Standard deviation of the scalar samples behind the trajectory.
    pub fn source_std(&self) -> f64 {
        self.source_std
    }

    fn upper(&self) -> Vec<f64> {
        let n = self.size;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }
}

/// Strictly-upper-triangle distances in row order.
///
/// Works one coordinate at a time over whole rows so the inner loop
/// vectorizes; the per-pair accumulation order matches `Norm::distance`.
fn upper_distances(traj: &Trajectory, norm: Norm) -> Vec<f64> {
    let n = traj.len();
    let cols: Vec<Vec<f64>> = (0..traj.dim())
        .map(|k| traj.points().map(|p| p[k]).collect())
        .collect();
    let mut out = vec![0.0; n * n.saturating_sub(1) / 2];
    let mut start = 0;
    for i in 0..n {
        let row = &mut out[start..start + (n - i - 1)];
        start += n - i - 1;
        for c in &cols {
            let ci = c[i];
            let rest = &c[i + 1..];
            match norm {
                Norm::Manhattan => row.iter_mut().zip(rest).for_each(|(o, &cj)| *o += (ci - cj).abs()),
                Norm::Euclidean => row.iter_mut().zip(rest).for_each(|(o, &cj)| {
                    let d = (ci - cj).abs();
                    *o += d * d
                }),
                Norm::Supremum => row.iter_mut().zip(rest).for_each(|(o, &cj)| *o = o.max((ci - cj).abs())),
            }
        }
    }
    if norm == Norm::Euclidean {
        out.iter_mut().for_each(|v| *v = v.sqrt());
    }
    out
}

pub fn pairwise_distances(traj: &Trajectory, norm: Norm) -> Result<DistanceMatrix> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::Parameter("need at least 2 trajectory points".into()));
    }
    let upper = upper_distances(traj, norm);
    let mut values = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            values[i * n + j] = upper[k];
            values[j * n + i] = upper[k];
            k += 1;
        }
    }
    Ok(DistanceMatrix {
        values,
        size: n,
        norm,
        source_std: traj.source_std(),
    })
}

/// How the recurrence threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EpsilonCriterion {
    /// Use this threshold directly.
    FixedValue(f64),
    /// Pick the threshold that yields this recurrence rate.
    FixedRr(f64),
    /// A multiple of the source signal's standard deviation.
    SigmaRatio(f64),
}

impl EpsilonCriterion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonCriterion::FixedValue(e) if !(e > 0.0 && e.is_finite()) => {
                Err(Error::Parameter(format!("fixed epsilon must be positive, got {e}")))
            }
            EpsilonCriterion::FixedRr(p) if !(p > 0.0 && p < 1.0) => Err(Error::Parameter(
                format!("target recurrence rate must lie in (0, 1), got {p}"),
            )),
            EpsilonCriterion::SigmaRatio(k) if !(k > 0.0 && k.is_finite()) => {
                Err(Error::Parameter(format!("sigma ratio must be positive, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

/// Threshold from the strictly-upper distances of an `n x n` matrix.
fn select_from_upper(
    mut upper: Vec<f64>,
    n: usize,
    source_std: f64,
    crit: EpsilonCriterion,
) -> Result<f64> {
    crit.validate()?;
    match crit {
        EpsilonCriterion::FixedValue(e) => Ok(e),
        EpsilonCriterion::SigmaRatio(k) => Ok(k * source_std),
        EpsilonCriterion::FixedRr(p) => {
            if upper.iter().all(|&d| d == 0.0) {
                return Err(Error::DegenerateDistances);
            }
            // ceil(p * n^2)-th smallest of all n^2 entries; the n diagonal
            // zeros come first and every off-diagonal value appears twice
            let total = (n * n) as f64;
            let k = ((p * total) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            if k <= n {
                return Ok(0.0);
            }
            let idx = (k - n).div_ceil(2) - 1;
            let (_, kth, _) = upper.select_nth_unstable_by(idx, f64::total_cmp);
            Ok(*kth)
        }
    }
}

pub fn select_epsilon(dist: &DistanceMatrix, crit: EpsilonCriterion) -> Result<f64> {
    select_from_upper(dist.upper(), dist.size, dist.source_std, crit)
}

/// Square bit matrix, one row of `u64` words per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    size: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(size: usize) -> Self {
        let words_per_row = size.div_ceil(64);
        BitMatrix {
            size,
            words_per_row,
            words: vec![0; words_per_row * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.words[i * self.words_per_row + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = &mut self.words[i * self.words_per_row + j / 64];
        if v {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub(crate) fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }
}

/// Binary recurrence matrix plus the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrencePlot {
    bits: BitMatrix,
    epsilon: f64,
    criterion: Option<EpsilonCriterion>,
    norm: Option<Norm>,
}

impl RecurrencePlot {
    /// Builds a plot from explicit rows; must be square, symmetric, unit diagonal.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter("recurrence matrix must be square and non-empty".into()));
        }
        let mut bits = BitMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if !row[i] {
                return Err(Error::Parameter(format!("diagonal entry {i} is not recurrent")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(Error::Parameter(format!("matrix is not symmetric at ({i}, {j})")));
                }
                bits.set(i, j, v);
            }
        }
        Ok(RecurrencePlot {
            bits,
            epsilon: f64::NAN,
            criterion: None,
            norm: None,
        })
    }

    /// The plot of a constant trajectory: every pair recurs.
    pub fn all_ones(size: usize) -> Self {
        let mut bits = BitMatrix::zeros(size);
        for i in 0..size {
            for j in 0..size {
                bits.set(i, j, true);
            }
        }
        RecurrencePlot {
            bits,
            epsilon: 0.0,
            criterion: None,
            norm: None,
        }
    }

    pub fn size(&self) -> usize {
        self.bits.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits.get(i, j)
    }

    pub fn bits(&self) -> &BitMatrix {
        &self.bits
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn criterion(&self) -> Option<EpsilonCriterion> {
        self.criterion
    }

    pub fn norm(&self) -> Option<Norm> {
        self.norm
    }

    pub fn recurrence_count(&self) -> u64 {
        self.bits.count_ones()
    }

    pub fn recurrence_rate(&self) -> f64 {
        let n = self.size() as f64;
        self.recurrence_count() as f64 / (n * n)
    }

    /// Transposed copy; equal to `self` for any valid plot.
    pub fn transpose(&self) -> Self {
        let n = self.size();
        let mut bits = BitMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                bits.set(j, i, self.bits.get(i, j));
            }
        }
        RecurrencePlot { bits, ..self.clone() }
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Plain PGM (P2): 255 marks a recurrence, 0 its absence, row 0 first.
    pub fn to_pgm(&self) -> String {
        let n = self.size();
        let mut out = format!("P2\n{n} {n}\n255\n");
        for i in 0..n {
            let row: Vec<&str> = (0..n)
                .map(|j| if self.get(i, j) { "255" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// `R[i][j] = 1` iff `d[i][j] <= eps`.
pub fn recurrence_plot(dist: &DistanceMatrix, eps: f64) -> Result<RecurrencePlot> {
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("threshold must be >= 0, got {eps}")));
    }
    let n = dist.size;
    let mut bits = BitMatrix::zeros(n);
    for i in 0..n {
        for (j, &d) in dist.row(i).iter().enumerate() {
            if d <= eps {
                bits.set(i, j, true);
            }
        }
    }
    Ok(RecurrencePlot {
        bits,
        epsilon: eps,
        criterion: None,
        norm: Some(dist.norm),
    })
}

/// Trajectory to recurrence plot without keeping the dense distance matrix.
/// Produces the same plot as `pairwise_distances` + `select_epsilon` +
/// `recurrence_plot`.
pub fn recurrence_plot_for(
    traj: &Trajectory,
    norm: Norm,
    crit: EpsilonCriterion,
) -> Result<RecurrencePlot> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::Parameter("need at least 2 trajectory points".into()));
    }
    let upper = upper_distances(traj, norm);
    let eps = select_from_upper(upper.clone(), n, traj.source_std(), crit)?;
    let mut bits = BitMatrix::zeros(n);
    let mut k = 0;
    for i in 0..n {
        bits.set(i, i, true);
        for j in (i + 1)..n {
            if upper[k] <= eps {
                bits.set(i, j, true);
                bits.set(j, i, true);
            }
            k += 1;
        }
    }
    Ok(RecurrencePlot {
        bits,
        epsilon: eps,
        criterion: Some(crit),
        norm: Some(norm),
    })
}

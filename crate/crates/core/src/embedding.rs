//! Per-frame delay-embedding parameter estimation and phase-space reconstruction.
//!
//! The lag comes from the first minimum of the average mutual information
//! between the frame and its lagged copy; the dimension from the false
//! nearest neighbour fraction. Both run on a single frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Frame;

/// Fewest trajectory points an embedding may produce.
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmiSettings {
    /// Largest lag tried; `None` means a quarter of the frame length.
    pub max_lag: Option<usize>,
    pub bins: usize,
    /// A minimum at lag `l` must not exceed any of the next `window` values.
    /// `1` is the plain three-point test.
    pub window: usize,
}

impl Default for AmiSettings {
    fn default() -> Self {
        AmiSettings {
            max_lag: None,
            bins: 16,
            window: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FnnSettings {
    pub max_m: usize,
    pub r_tol: f64,
    pub a_tol: f64,
    pub fnn_threshold: f64,
}

impl Default for FnnSettings {
    fn default() -> Self {
        FnnSettings {
            max_m: 10,
            r_tol: 10.0,
            a_tol: 2.0,
            fnn_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingSettings {
    pub ami: AmiSettings,
    pub fnn: FnnSettings,
}

impl EmbeddingSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.ami.bins < 2 {
            return bad("embedding.bins must be at least 2");
        }
        if self.ami.window == 0 {
            return bad("embedding.ami_window must be at least 1");
        }
        if self.ami.max_lag == Some(0) {
            return bad("embedding.max_lag must be at least 1");
        }
        if self.fnn.max_m == 0 {
            return bad("embedding.max_m must be at least 1");
        }
        if !(self.fnn.r_tol > 0.0) || !(self.fnn.a_tol > 0.0) {
            return bad("embedding.r_tol and embedding.a_tol must be positive");
        }
        if !(self.fnn.fnn_threshold > 0.0 && self.fnn.fnn_threshold <= 1.0) {
            return bad("embedding.fnn_threshold must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Estimator output kept alongside the chosen parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingDiagnostics {
    /// AMI in nats; index 0 is the binned entropy (lag 0).
    pub ami_curve: Vec<f64>,
    /// False-neighbour fraction for m = 1, 2, ... as far as the search went.
    pub fnn_fractions: Vec<f64>,
    /// Set when the frame had zero amplitude range.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub tau: usize,
    pub m: usize,
    pub diagnostics: EmbeddingDiagnostics,
}

impl EmbeddingParams {
    pub fn new(tau: usize, m: usize) -> Self {
        EmbeddingParams {
            tau,
            m,
            diagnostics: EmbeddingDiagnostics::default(),
        }
    }

    /// Number of points the embedding yields for a frame of `n` samples.
    pub fn points_for(&self, n: usize) -> Option<usize> {
        let span = (self.m.checked_sub(1)?).checked_mul(self.tau)?;
        n.checked_sub(span)
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.tau == 0 || self.m == 0 {
            return Err(Error::Parameter("tau and m must be at least 1".into()));
        }
        match self.points_for(n) {
            Some(p) if p >= MIN_POINTS => Ok(()),
            _ => Err(Error::Parameter(format!(
                "m={} tau={} leaves fewer than {MIN_POINTS} points in {n} samples",
                self.m, self.tau
            ))),
        }
    }
}

/// Delay-embedded points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    coords: Vec<f64>,
    dim: usize,
    len: usize,
    tau: usize,
    source_std: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Population standard deviation of the scalar samples the trajectory came from.
    pub fn source_std(&self) -> f64 {
        self.source_std
    }

    /// Builds a trajectory from explicit points; `source_std` is taken as given.
    pub fn from_points(points: &[Vec<f64>], source_std: f64) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Parameter(
                "points must be non-empty and share one dimension".into(),
            ));
        }
        Ok(Trajectory {
            coords: points.concat(),
            dim,
            len: points.len(),
            tau: 1,
            source_std,
        })
    }
}

pub(crate) fn population_std(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt()
}

/// `x(i) = [s(i), s(i+tau), ..., s(i+(m-1)tau)]` for every `i` that fits.
pub fn delay_embed(samples: &[f64], tau: usize, m: usize) -> Result<Trajectory> {
    let params = EmbeddingParams::new(tau, m);
    if tau == 0 || m == 0 {
        return Err(Error::Parameter("tau and m must be at least 1".into()));
    }
    let len = match params.points_for(samples.len()) {
        Some(p) if p > 0 => p,
        _ => {
            return Err(Error::Parameter(format!(
                "{} samples cannot hold an m={m} tau={tau} embedding",
                samples.len()
            )))
        }
    };
    let mut coords = Vec::with_capacity(len * m);
    for i in 0..len {
        coords.extend((0..m).map(|k| samples[i + k * tau]));
    }
    Ok(Trajectory {
        coords,
        dim: m,
        len,
        tau,
        source_std: population_std(samples),
    })
}

/// Embeds a frame, enforcing the minimum point count.
pub fn embed(frame: &Frame, params: &EmbeddingParams) -> Result<Trajectory> {
    params.validate_for(frame.len())?;
    delay_embed(frame.samples(), params.tau, params.m)
}

fn bin_indices(samples: &[f64], bins: usize) -> Result<Vec<usize>> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateFrame("frame has zero amplitude range".into()));
    }
    Ok(samples
        .iter()
        .map(|&s| (((s - lo) / range * bins as f64) as usize).min(bins - 1))
        .collect())
}

/// Histogram mutual information (nats) between the frame and its lag-`l`
/// copy for `l = 0..=max_lag`. Lag 0 gives the binned entropy.
pub fn ami_curve(samples: &[f64], max_lag: usize, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::Parameter("need at least 2 bins".into()));
    }
    if max_lag == 0 || max_lag + 1 >= samples.len() {
        return Err(Error::Parameter(format!(
            "max_lag {max_lag} does not fit {} samples",
            samples.len()
        )));
    }
    let idx = bin_indices(samples, bins)?;
    let mut joint = vec![0u32; bins * bins];
    let mut left = vec![0u32; bins];
    let mut right = vec![0u32; bins];
    let mut curve = Vec::with_capacity(max_lag + 1);
    // ln k for every count that can occur
    let ln: Vec<f64> = (0..=samples.len()).map(|k| (k as f64).ln()).collect();
    for lag in 0..=max_lag {
        joint.iter_mut().for_each(|c| *c = 0);
        left.iter_mut().for_each(|c| *c = 0);
        right.iter_mut().for_each(|c| *c = 0);
        let pairs = idx.len() - lag;
        for (&a, &b) in idx[..pairs].iter().zip(&idx[lag..]) {
            joint[a * bins + b] += 1;
            left[a] += 1;
            right[b] += 1;
        }
        let n = pairs as f64;
        let mut mi = 0.0;
        for a in 0..bins {
            if left[a] == 0 {
                continue;
            }
            for b in 0..bins {
                let c = joint[a * bins + b] as usize;
                if c > 0 {
                    mi += c as f64 * (ln[c] - ln[left[a] as usize] - ln[right[b] as usize]);
                }
            }
        }
        curve.push(mi / n + ln[pairs]);
    }
    Ok(curve)
}

/// Picks the lag from an AMI curve (index = lag, index 0 is lag 0).
///
/// First `l >= 1` with `ami[l] < ami[l-1]` and `ami[l] <= ami[j]` for the next
/// `window` lags; else the first lag at or below `ami[1] / e`; else the last lag.
pub fn first_ami_minimum(curve: &[f64], window: usize) -> usize {
    let max_lag = curve.len() - 1;
    for l in 1..max_lag {
        let ahead_end = (l + window.max(1)).min(max_lag);
        if curve[l] < curve[l - 1] && curve[l + 1..=ahead_end].iter().all(|&v| curve[l] <= v) {
            return l;
        }
    }
    let cutoff = curve[1] / std::f64::consts::E;
    (1..=max_lag)
        .find(|&l| curve[l] <= cutoff)
        .unwrap_or(max_lag)
}

fn effective_max_lag(n: usize, settings: &AmiSettings) -> usize {
    settings.max_lag.unwrap_or(n / 4).min(n.saturating_sub(2)).max(1)
}

/// Lag from the first minimum of the AMI curve, with its curve.
pub fn estimate_tau_ami_with_curve(frame: &Frame, settings: &AmiSettings) -> Result<(usize, Vec<f64>)> {
    let max_lag = effective_max_lag(frame.len(), settings);
    let curve = ami_curve(frame.samples(), max_lag, settings.bins)?;
    Ok((first_ami_minimum(&curve, settings.window), curve))
}

pub fn estimate_tau_ami(frame: &Frame, settings: &AmiSettings) -> Result<usize> {
    estimate_tau_ami_with_curve(frame, settings).map(|(tau, _)| tau)
}

/// False-nearest-neighbour fractions for `m = 1..` and the chosen dimension.
///
/// Stops at the first dimension whose fraction drops below the threshold;
/// otherwise returns the dimension with the smallest fraction.
pub fn estimate_m_fnn_with_fractions(
    frame: &Frame,
    tau: usize,
    settings: &FnnSettings,
) -> Result<(usize, Vec<f64>)> {
    let s = frame.samples();
    let n = s.len();
    if tau == 0 {
        return Err(Error::Parameter("tau must be at least 1".into()));
    }
    if n < tau + MIN_POINTS {
        return Err(Error::DegenerateFrame(format!(
            "tau={tau} leaves fewer than {MIN_POINTS} points in {n} samples"
        )));
    }
    // testing dimension m needs coordinate m+1, so N - m*tau points
    let max_m = settings.max_m.min((n - MIN_POINTS) / tau).max(1);
    let sigma = population_std(s);
    if s.iter().all(|&v| v == s[0]) || !(sigma > 0.0) {
        return Err(Error::DegenerateFrame("frame has zero variance".into()));
    }
    let floor = 1e-9 * sigma;

    let width = n - tau;
    let mut dist2 = vec![0.0f64; width * width];
    for i in 0..width {
        dist2[i * width + i] = f64::INFINITY;
    }
    let mut fractions = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        let count = n - m * tau;
        let shift = (m - 1) * tau;
        let grow = m * tau;
        let mut false_count = 0usize;
        // full rows rather than symmetric writes: each row is one straight
        // sweep that also yields the nearest neighbour
        for i in 0..count {
            let si = s[i + shift];
            let row = &mut dist2[i * width..i * width + count];
            let col = &s[shift..shift + count];
            // four independent minima keep the loop vectorizable
            let mut lanes = [f64::INFINITY; 4];
            let mut at = [usize::MAX; 4];
            let mut rows = row.chunks_exact_mut(4);
            let mut cols = col.chunks_exact(4);
            for (c, (rd, cs)) in (&mut rows).zip(&mut cols).enumerate() {
                for k in 0..4 {
                    let diff = si - cs[k];
                    let v = rd[k] + diff * diff;
                    rd[k] = v;
                    if v < lanes[k] {
                        lanes[k] = v;
                        at[k] = 4 * c + k;
                    }
                }
            }
            let tail = count - count % 4;
            for (t, (d, &sj)) in rows.into_remainder().iter_mut().zip(cols.remainder()).enumerate() {
                let diff = si - sj;
                *d += diff * diff;
                if *d < lanes[0] {
                    lanes[0] = *d;
                    at[0] = tail + t;
                }
            }
            // smallest distance, lowest index on ties; the diagonal holds +inf
            let (best_d, best) = (0..4).fold((f64::INFINITY, usize::MAX), |(bd, bj), k| {
                if lanes[k] < bd || (lanes[k] == bd && at[k] < bj) {
                    (lanes[k], at[k])
                } else {
                    (bd, bj)
                }
            });
            let r = best_d.sqrt();
            let delta = (s[i + grow] - s[best + grow]).abs();
            let ratio_test = delta > settings.r_tol * r && delta > floor;
            let size_test = (best_d + delta * delta).sqrt() > settings.a_tol * sigma;
            if ratio_test || size_test {
                false_count += 1;
            }
        }
        let frac = false_count as f64 / count as f64;
        fractions.push(frac);
        if frac < settings.fnn_threshold {
            return Ok((m, fractions));
        }
    }
    let (best, _) = fractions
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    Ok((best + 1, fractions))
}

pub fn estimate_m_fnn(frame: &Frame, tau: usize, settings: &FnnSettings) -> Result<usize> {
    estimate_m_fnn_with_fractions(frame, tau, settings).map(|(m, _)| m)
}

/// Estimates `(tau, m)` for one frame. The FNN dimension is capped so the
/// resulting embedding keeps at least [`MIN_POINTS`] points.
pub fn estimate_embedding(frame: &Frame, settings: &EmbeddingSettings) -> Result<EmbeddingParams> {
    let (tau, ami) = estimate_tau_ami_with_curve(frame, &settings.ami)?;
    let (m, fractions) = estimate_m_fnn_with_fractions(frame, tau, &settings.fnn)?;
    let params = EmbeddingParams {
        tau,
        m,
        diagnostics: EmbeddingDiagnostics {
            ami_curve: ami,
            fnn_fractions: fractions,
            degenerate: false,
        },
    };
    params.validate_for(frame.len())?;
    Ok(params)
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Which rows the z-normalization statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormScheme {
    /// Each speaker's rows, over the whole dataset.
    #[serde(rename = "ps_n")]
    PerSpeaker,
    /// The fold's training rows only, applied to every row.
    #[serde(rename = "pf_n")]
    PerFold,
    /// All rows.
    #[serde(rename = "g_n")]
    Global,
}

impl std::str::FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ps_n" | "per_speaker" => Ok(NormScheme::PerSpeaker),
            "pf_n" | "per_fold" => Ok(NormScheme::PerFold),
            "g_n" | "global" => Ok(NormScheme::Global),
            other => Err(Error::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

impl std::fmt::Display for NormScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormScheme::PerSpeaker => "PS-N",
            NormScheme::PerFold => "PF-N",
            NormScheme::Global => "G-N",
        })
    }
}

/// Column means and population standard deviations over `rows`.
/// Zero-variance columns report a standard deviation of 1.
pub(crate) fn column_stats(x: &[Vec<f64>], rows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Grouping("statistics group has no rows".into()));
    }
    let d = x[rows[0]].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(&x[r]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &r in rows {
        for ((s, v), m) in var.iter_mut().zip(&x[r]).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok((mean, std))
}

fn apply(x: &mut [Vec<f64>], rows: &[usize], mean: &[f64], std: &[f64]) {
    for &r in rows {
        for ((v, m), s) in x[r].iter_mut().zip(mean).zip(std) {
            *v = (*v - m) / s;
        }
    }
}

/// Z-normalizes every column. `PerFold` needs the fold's training rows.
pub fn znormalize(ds: &Dataset, scheme: NormScheme, train_rows: Option<&[usize]>) -> Result<Dataset> {
    let mut x = ds.x.clone();
    let all: Vec<usize> = (0..ds.len()).collect();
    match scheme {
        NormScheme::Global => {
            let (m, s) = column_stats(&ds.x, &all)?;
            apply(&mut x, &all, &m, &s);
        }
        NormScheme::PerFold => {
            let train = train_rows
                .ok_or_else(|| Error::Grouping("per-fold normalization needs training rows".into()))?;
            let (m, s) = column_stats(&ds.x, train)?;
            apply(&mut x, &all, &m, &s);
        }
        NormScheme::PerSpeaker => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, meta) in ds.meta.iter().enumerate() {
                groups.entry(meta.speaker_id.as_str()).or_default().push(i);
            }
            for rows in groups.values() {
                let (m, s) = column_stats(&ds.x, rows)?;
                apply(&mut x, rows, &m, &s);
            }
        }
    }
    Ok(ds.with_x(x))
}

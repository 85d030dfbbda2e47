use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, make_folds, train_logreg, znormalize, Dataset, Fold, FoldPlanKind, LogRegSettings,
    NormScheme,
};
use crate::error::{Error, Result};

fn rows<'a>(ds: &'a Dataset, idx: &[usize]) -> (Vec<&'a [f64]>, Vec<usize>) {
    (
        idx.iter().map(|&i| ds.x[i].as_slice()).collect(),
        idx.iter().map(|&i| ds.y[i]).collect(),
    )
}

/// Picks C by UA on the fold's tune rows; ties go to the smaller C.
///
/// A fold without tune rows is tuned on its training rows. Returns the
/// chosen C and its tune UA.
pub fn grid_search_c(
    ds: &Dataset,
    fold: &Fold,
    grid: &[f64],
    settings: &LogRegSettings,
) -> Result<(f64, f64)> {
    if grid.is_empty() {
        return Err(Error::Parameter("C grid is empty".into()));
    }
    let (xt, yt) = rows(ds, &fold.train);
    let tune_idx = if fold.tune.is_empty() {
        &fold.train
    } else {
        &fold.tune
    };
    let (xv, yv) = rows(ds, tune_idx);
    let scores: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&c| {
            let model = train_logreg(&xt, &yt, ds.labels.len(), c, settings)?;
            Ok((c, evaluate(&model, &xv, &yv).ua))
        })
        .collect::<Result<_>>()?;
    let mut best = scores[0];
    for &(c, ua) in &scores[1..] {
        if ua > best.1 || (ua == best.1 && c < best.0) {
            best = (c, ua);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub n_train: usize,
    pub n_tune: usize,
    pub n_test: usize,
    pub best_c: f64,
    pub tune_ua: f64,
    pub wa: f64,
    pub ua: f64,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub protocol: FoldPlanKind,
    pub norm: NormScheme,
    pub labels: Vec<String>,
    pub n_rows: usize,
    pub n_features: usize,
    pub grid: Vec<f64>,
    pub folds: Vec<FoldReport>,
    pub mean_wa: f64,
    pub mean_ua: f64,
}

impl Report {
    /// Fixed-width summary for terminals.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<40} {:>7} {:>7} {:>8} {:>8}\n",
            "fold", "n_test", "C", "WA", "UA"
        );
        for f in &self.folds {
            s += &format!(
                "{:<40} {:>7} {:>7} {:>8.4} {:>8.4}\n",
                f.name, f.n_test, f.best_c, f.wa, f.ua
            );
        }
        s += &format!(
            "{:<40} {:>7} {:>7} {:>8.4} {:>8.4}\n",
            "mean", "", "", self.mean_wa, self.mean_ua
        );
        s
    }
}

/// Folds, normalization, C selection, final training on the train rows,
/// and scoring on the test rows. Folds run in parallel; order is kept.
pub fn run_protocol(
    ds: &Dataset,
    kind: FoldPlanKind,
    norm: NormScheme,
    grid: &[f64],
    settings: &LogRegSettings,
) -> Result<Report> {
    if ds.labels.len() < 2 {
        return Err(Error::DegenerateLabels("dataset has a single class".into()));
    }
    let plan = make_folds(ds, kind)?;
    // PS-N and G-N do not depend on the fold
    let shared = match norm {
        NormScheme::PerFold => None,
        other => Some(znormalize(ds, other, None)?),
    };
    let folds: Vec<FoldReport> = plan
        .folds
        .par_iter()
        .map(|fold| {
            if fold.train.is_empty() || fold.test.is_empty() {
                return Err(Error::Protocol(format!("fold {} has an empty split", fold.name)));
            }
            let local;
            let z = match &shared {
                Some(z) => z,
                None => {
                    local = znormalize(ds, NormScheme::PerFold, Some(&fold.train))?;
                    &local
                }
            };
            let (best_c, tune_ua) = grid_search_c(z, fold, grid, settings)?;
            let (xt, yt) = rows(z, &fold.train);
            let model = train_logreg(&xt, &yt, z.labels.len(), best_c, settings)?;
            let (xs, ys) = rows(z, &fold.test);
            let m = evaluate(&model, &xs, &ys);
            Ok(FoldReport {
                name: fold.name.clone(),
                n_train: fold.train.len(),
                n_tune: fold.tune.len(),
                n_test: fold.test.len(),
                best_c,
                tune_ua,
                wa: m.wa,
                ua: m.ua,
                confusion: m.confusion,
            })
        })
        .collect::<Result<_>>()?;
    let k = folds.len() as f64;
    Ok(Report {
        protocol: kind,
        norm,
        labels: ds.labels.clone(),
        n_rows: ds.len(),
        n_features: ds.width(),
        grid: grid.to_vec(),
        mean_wa: folds.iter().map(|f| f.wa).sum::<f64>() / k,
        mean_ua: folds.iter().map(|f| f.ua).sum::<f64>() / k,
        folds,
    })
}

//! Desk-scale classification harness: normalization, fold plans, one-vs-rest
//! logistic regression, weighted/unweighted accuracy, and C selection.

mod folds;
mod logreg;
mod metrics;
mod normalize;
mod protocol;

pub use folds::{make_folds, Fold, FoldPlan, FoldPlanKind};
pub use logreg::{logistic_objective, train_logreg, BinaryModel, LogRegModel, LogRegSettings};
pub use metrics::{evaluate, metrics_from_predictions, Metrics};
pub use normalize::{znormalize, NormScheme};
pub use protocol::{grid_search_c, run_protocol, FoldReport, Report};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::features::{FeatureMeta, FeatureTable};

/// Log-spaced cost grid spanning the usual [0.001, 30] range.
pub const DEFAULT_C_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 30.0];

/// Feature rows with metadata and integer class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub meta: Vec<FeatureMeta>,
    /// Sorted label names; `y[i]` indexes into this.
    pub labels: Vec<String>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, meta: Vec<FeatureMeta>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        if x.len() != meta.len() {
            return Err(Error::Parameter("row and metadata counts differ".into()));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::Parameter("rows have inconsistent widths".into()));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("dataset has non-finite values".into()));
        }
        let labels: Vec<String> = meta
            .iter()
            .map(|m| m.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let y = meta.iter().map(|m| index[m.label.as_str()]).collect();
        Ok(Dataset { x, meta, labels, y })
    }

    pub fn from_table(table: &FeatureTable) -> Result<Self> {
        Dataset::new(
            table.rows.iter().map(|r| r.values.clone()).collect(),
            table.rows.iter().map(|r| r.meta.clone()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x[0].len()
    }

    pub fn with_x(&self, x: Vec<Vec<f64>>) -> Self {
        Dataset { x, ..self.clone() }
    }
}

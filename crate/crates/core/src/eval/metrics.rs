use serde::{Deserialize, Serialize};

use super::LogRegModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of correct decisions.
    pub wa: f64,
    /// Mean recall over the classes present in the true labels.
    pub ua: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn metrics_from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Metrics {
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|k| confusion[k][k]).sum();
    let wa = if truth.is_empty() {
        0.0
    } else {
        correct as f64 / truth.len() as f64
    };
    let recalls: Vec<f64> = confusion
        .iter()
        .enumerate()
        .filter_map(|(k, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[k] as f64 / total as f64)
        })
        .collect();
    let ua = if recalls.is_empty() {
        0.0
    } else {
        recalls.iter().sum::<f64>() / recalls.len() as f64
    };
    Metrics { wa, ua, confusion }
}

pub fn evaluate(model: &LogRegModel, x: &[&[f64]], y: &[usize]) -> Metrics {
    let pred = model.predict_rows(x);
    metrics_from_predictions(y, &pred, model.n_classes)
}

//! Accuracy tables, per-class error and rank statistics across datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy of each method on each dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// Number of classes of each dataset.
    pub class_counts: Vec<usize>,
    /// `accuracy[method][dataset]` in `[0, 1]`.
    pub accuracy: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Mean over datasets of error rate divided by class count.
    pub mpce: f64,
    pub mean_rank: f64,
    pub geometric_mean_rank: f64,
    /// Datasets on which the method has the best accuracy, ties included.
    pub wins: usize,
}

impl ResultTable {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.datasets.is_empty() {
            return Err(Error::Config("result table needs methods and datasets".into()));
        }
        if self.class_counts.len() != self.datasets.len() || self.accuracy.len() != self.methods.len() {
            return Err(Error::Config("result table dimensions disagree".into()));
        }
        for row in &self.accuracy {
            if row.len() != self.datasets.len() {
                return Err(Error::Config("result table row has the wrong length".into()));
            }
            if row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::Config("accuracy outside [0, 1]".into()));
            }
        }
        if self.class_counts.contains(&0) {
            return Err(Error::Config("dataset with zero classes".into()));
        }
        Ok(())
    }

    /// `PCE[method][dataset] = (1 - accuracy) / classes`.
    pub fn per_class_errors(&self) -> Vec<Vec<f64>> {
        self.accuracy
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.class_counts)
                    .map(|(a, &c)| per_class_error(*a, c))
                    .collect()
            })
            .collect()
    }

    /// `ranks[method][dataset]`, 1 for the best accuracy, average rank on ties.
    pub fn ranks(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.datasets.len()]; self.methods.len()];
        for d in 0..self.datasets.len() {
            let column: Vec<f64> = self.accuracy.iter().map(|row| row[d]).collect();
            for (m, r) in average_ranks(&column).into_iter().enumerate() {
                out[m][d] = r;
            }
        }
        out
    }

    pub fn summarize(&self) -> Result<Vec<MethodSummary>> {
        self.validate()?;
        let pce = self.per_class_errors();
        let ranks = self.ranks();
        let datasets = self.datasets.len() as f64;
        Ok(self
            .methods
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let wins = (0..self.datasets.len())
                    .filter(|&d| {
                        let best = self.accuracy.iter().map(|row| row[d]).fold(f64::MIN, f64::max);
                        self.accuracy[m][d] == best
                    })
                    .count();
                MethodSummary {
                    method: name.clone(),
                    mpce: pce[m].iter().sum::<f64>() / datasets,
                    mean_rank: ranks[m].iter().sum::<f64>() / datasets,
                    geometric_mean_rank: (ranks[m].iter().map(|r| r.ln()).sum::<f64>() / datasets).exp(),
                    wins,
                }
            })
            .collect())
    }
}

pub fn per_class_error(accuracy: f64, classes: usize) -> f64 {
    (1.0 - accuracy) / classes as f64
}

/// Descending ranks of `scores` starting at 1; exact ties share the mean of
/// the ranks they span.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

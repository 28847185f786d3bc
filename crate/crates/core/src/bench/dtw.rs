//! Band-constrained dynamic time warping and the 1-nearest-neighbor baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{LabeledDataset, Signal};

/// Sakoe-Chiba band: cells with `|i - j| <= window` are admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub window: usize,
}

/// Window sizes tried during tuning, as fractions of the series length.
pub const WINDOW_FRACTIONS: [f64; 12] = [0.0, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0];

/// Square root of the minimal sum of squared pointwise differences over
/// monotone alignments inside the band.
pub fn dtw_distance(a: &Signal, b: &Signal, cfg: &DtwConfig) -> Result<f64> {
    dtw_slices(a.samples(), b.samples(), cfg)
}

pub fn dtw_slices(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: b.len(),
        });
    }
    if cfg.window >= n {
        return Err(Error::Config(format!(
            "DTW window {} must be smaller than the series length {n}",
            cfg.window
        )));
    }
    let r = cfg.window;
    let mut prev = vec![f64::INFINITY; n + 1];
    let mut curr = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = i.saturating_sub(r).max(1);
        let hi = (i + r).min(n);
        for j in lo..=hi {
            let d = a[i - 1] - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = d * d + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[n].sqrt())
}

/// Class index of the nearest training signal, lowest index on ties.
pub fn knn_dtw_classify(train: &LabeledDataset, s: &Signal, cfg: &DtwConfig) -> Result<usize> {
    let mut best = (f64::INFINITY, 0usize);
    for (i, t) in train.signals().iter().enumerate() {
        let d = dtw_distance(t, s, cfg)?;
        if d < best.0 || i == 0 {
            best = (d, i);
        }
    }
    Ok(train.labels()[best.1])
}

/// Candidate windows for series of length `n`, ascending and deduplicated.
pub fn window_candidates(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = WINDOW_FRACTIONS
        .iter()
        .map(|f| ((f * n as f64).round() as usize).min(n - 1))
        .collect();
    out.dedup();
    out
}

/// Window with the best 1NN accuracy of `val` against `fit`; ties go to the
/// smaller window.
pub fn tune_window(fit: &LabeledDataset, val: &LabeledDataset, candidates: &[usize]) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::Config("no DTW window candidates".into()));
    }
    let scores = candidates
        .par_iter()
        .map(|&window| {
            let cfg = DtwConfig { window };
            let mut correct = 0usize;
            for (s, label) in val.iter() {
                if knn_dtw_classify(fit, s, &cfg)? == label {
                    correct += 1;
                }
            }
            Ok(correct)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &c) in scores.iter().enumerate() {
        if c > scores[best] {
            best = i;
        }
    }
    Ok((candidates[best], scores[best] as f64 / val.len() as f64))
}

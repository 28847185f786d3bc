//! Nearest local subspace classification in SCDT space.
//!
//! Training stores, for every training sample, the flattened SCDT feature and
//! an orthonormal basis of its enriched span. Prediction runs in two steps:
//! the `k` training samples of each class whose per-sample subspaces lie
//! closest to the test feature are selected, then the test feature is
//! projected onto the enriched span of those `k` samples and the class with
//! the smallest residual wins.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{stratified_split, Grid, LabeledDataset, Signal};
use crate::subspace::{enriched_basis, EnrichmentConfig, LocalSubspaceBasis};
use crate::transform::{scdt, TransformConfig};

pub const DEFAULT_VARIANCE_CUTOFF: f64 = 0.99;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;
pub const DEFAULT_K_MAX: usize = 16;
pub const DEFAULT_N_MAX: usize = 4;

/// Training data and per-sample bases of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: f64,
    pub features: Vec<Vec<f64>>,
    pub bases: Vec<LocalSubspaceBasis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    transform: TransformConfig,
    enrichment: EnrichmentConfig,
    k: usize,
    variance_cutoff: f64,
    grid: Grid,
    classes: Vec<ClassModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    /// Squared residual of the test feature against each class's local subspace.
    pub per_class_residuals: Vec<f64>,
    /// Training-sample indices (within each class) spanning the local subspace.
    pub chosen_member_indices: Vec<Vec<usize>>,
}

/// Flattened SCDT features of every signal in `ds`, in dataset order.
pub fn compute_features(ds: &LabeledDataset, cfg: &TransformConfig) -> Result<Vec<Vec<f64>>> {
    ds.signals()
        .par_iter()
        .map(|s| scdt(s, cfg).map(|f| f.flatten()))
        .collect()
}

/// Index of the smallest value, lowest index on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if v.total_cmp(&values[best]).is_lt() {
            best = i;
        }
    }
    best
}

fn validate_cutoff(variance_cutoff: f64) -> Result<()> {
    if !(variance_cutoff > 0.0 && variance_cutoff <= 1.0) {
        return Err(Error::Config(format!(
            "variance cutoff {variance_cutoff} not in (0, 1]"
        )));
    }
    Ok(())
}

/// Trains on `ds`. `k` must not exceed the smallest class size.
pub fn train(
    ds: &LabeledDataset,
    cfg: &TransformConfig,
    enrichment: &EnrichmentConfig,
    k: usize,
    variance_cutoff: f64,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let features = compute_features(ds, cfg)?;
    train_on_features(ds, features, cfg, enrichment, k, variance_cutoff)
}

fn train_on_features(
    ds: &LabeledDataset,
    features: Vec<Vec<f64>>,
    cfg: &TransformConfig,
    enrichment: &EnrichmentConfig,
    k: usize,
    variance_cutoff: f64,
) -> Result<TrainedModel> {
    enrichment.validate()?;
    validate_cutoff(variance_cutoff)?;
    let min_size = ds.class_sizes().into_iter().min().unwrap_or(0);
    if k == 0 || k > min_size {
        return Err(Error::Config(format!(
            "k = {k} must lie in 1..={min_size} (smallest class size)"
        )));
    }

    for (i, f) in features.iter().enumerate() {
        if f.iter().all(|&v| v == 0.0) {
            warn!("training sample {i} has zero mass; keeping a zero feature");
        }
    }

    let bases: Vec<LocalSubspaceBasis> = features
        .par_iter()
        .map(|f| {
            enriched_basis(std::slice::from_ref(f), enrichment, variance_cutoff)
        })
        .collect::<Result<_>>()?;

    let mut classes: Vec<ClassModel> = ds
        .class_labels()
        .iter()
        .map(|&label| ClassModel {
            label,
            features: Vec::new(),
            bases: Vec::new(),
        })
        .collect();
    for ((feature, basis), &label) in features.into_iter().zip(bases).zip(ds.labels()) {
        classes[label].features.push(feature);
        classes[label].bases.push(basis);
    }

    Ok(TrainedModel {
        transform: *cfg,
        enrichment: *enrichment,
        k,
        variance_cutoff,
        grid: ds.grid(),
        classes,
    })
}

impl TrainedModel {
    /// Assembles a model from stored parts, checking the per-class invariants.
    pub fn from_parts(
        transform: TransformConfig,
        enrichment: EnrichmentConfig,
        k: usize,
        variance_cutoff: f64,
        grid: Grid,
        classes: Vec<ClassModel>,
    ) -> Result<Self> {
        transform.validate()?;
        enrichment.validate()?;
        validate_cutoff(variance_cutoff)?;
        let dim = transform.feature_dim();
        for (c, class) in classes.iter().enumerate() {
            if class.features.len() != class.bases.len() {
                return Err(Error::Integrity(format!(
                    "class {c}: {} features but {} bases",
                    class.features.len(),
                    class.bases.len()
                )));
            }
            if class.features.is_empty() {
                return Err(Error::Integrity(format!("class {c} has no training samples")));
            }
            if let Some(f) = class.features.iter().find(|f| f.len() != dim) {
                return Err(Error::Integrity(format!(
                    "class {c}: feature of length {} (expected {dim})",
                    f.len()
                )));
            }
            if let Some(b) = class.bases.iter().find(|b| b.dim() != dim) {
                return Err(Error::Integrity(format!(
                    "class {c}: basis of dimension {} (expected {dim})",
                    b.dim()
                )));
            }
        }
        let min_size = classes.iter().map(|c| c.features.len()).min();
        if k == 0 || min_size.is_some_and(|m| k > m) {
            return Err(Error::Config(format!("k = {k} exceeds the smallest class")));
        }
        Ok(TrainedModel {
            transform,
            enrichment,
            k,
            variance_cutoff,
            grid,
            classes,
        })
    }

    pub fn transform(&self) -> &TransformConfig {
        &self.transform
    }

    pub fn enrichment(&self) -> &EnrichmentConfig {
        &self.enrichment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variance_cutoff(&self) -> f64 {
        self.variance_cutoff
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_labels(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.label).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.transform.feature_dim()
    }

    /// Flattened SCDT of `s`, which must lie on the training grid.
    pub fn feature(&self, s: &Signal) -> Result<Vec<f64>> {
        if !s.grid().matches(&self.grid) {
            return Err(Error::Dimension {
                expected: self.grid.len,
                actual: s.len(),
            });
        }
        Ok(scdt(s, &self.transform)?.flatten())
    }

    pub fn predict(&self, s: &Signal) -> Result<Prediction> {
        let x = self.feature(s)?;
        self.predict_feature(&x)
    }

    pub fn predict_many(&self, signals: &[Signal]) -> Result<Vec<Prediction>> {
        signals.par_iter().map(|s| self.predict(s)).collect()
    }

    pub fn predict_feature(&self, x: &[f64]) -> Result<Prediction> {
        self.predict_feature_with_k(x, self.k)
    }

    /// Step 1: training samples of `class` ordered by the squared distance from
    /// `x` to their per-sample subspaces, ties broken by lower index.
    pub fn rank_members(&self, x: &[f64], class: usize) -> Result<Vec<(usize, f64)>> {
        let class = &self.classes[class];
        let mut ranked = class
            .bases
            .iter()
            .enumerate()
            .map(|(l, b)| b.residual(x).map(|r| (l, r)))
            .collect::<Result<Vec<_>>>()?;
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    /// Step 2: squared residual of `x` against the enriched span of `members`
    /// of `class`.
    pub fn local_residual(&self, x: &[f64], class: usize, members: &[usize]) -> Result<f64> {
        let class = &self.classes[class];
        let chosen: Vec<Vec<f64>> = members.iter().map(|&l| class.features[l].clone()).collect();
        enriched_basis(&chosen, &self.enrichment, self.variance_cutoff)?.residual(x)
    }

    fn check_feature(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim() {
            return Err(Error::Dimension {
                expected: self.feature_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn predict_feature_with_k(&self, x: &[f64], k: usize) -> Result<Prediction> {
        self.check_feature(x)?;
        let mut residuals = Vec::with_capacity(self.classes.len());
        let mut chosen = Vec::with_capacity(self.classes.len());
        for c in 0..self.classes.len() {
            let members: Vec<usize> = self.rank_members(x, c)?.into_iter().take(k).map(|(l, _)| l).collect();
            residuals.push(self.local_residual(x, c, &members)?);
            chosen.push(members);
        }
        Ok(Prediction {
            class_index: argmin(&residuals),
            per_class_residuals: residuals,
            chosen_member_indices: chosen,
        })
    }

    /// Predicted class for every `k` in `ks`, reusing the Step 1 ordering.
    fn predict_feature_for_ks(&self, x: &[f64], ks: &[usize]) -> Result<Vec<usize>> {
        self.check_feature(x)?;
        let orders = (0..self.classes.len())
            .map(|c| self.rank_members(x, c))
            .collect::<Result<Vec<_>>>()?;
        ks.iter()
            .map(|&k| {
                let residuals = orders
                    .iter()
                    .enumerate()
                    .map(|(c, order)| {
                        let members: Vec<usize> = order.iter().take(k).map(|(l, _)| *l).collect();
                        self.local_residual(x, c, &members)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(argmin(&residuals))
            })
            .collect()
    }

    /// Fraction of `ds` classified correctly.
    pub fn accuracy(&self, ds: &LabeledDataset) -> Result<f64> {
        let predictions = self.predict_many(ds.signals())?;
        let correct = predictions
            .iter()
            .zip(ds.labels())
            .filter(|(p, &l)| p.class_index == l)
            .count();
        Ok(correct as f64 / ds.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub k_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub val_fraction: f64,
    pub seed: u64,
    pub use_translation: bool,
    pub variance_cutoff: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            k_grid: (1..=DEFAULT_K_MAX).collect(),
            n_grid: (0..=DEFAULT_N_MAX).collect(),
            val_fraction: DEFAULT_VALIDATION_FRACTION,
            seed: 0,
            use_translation: true,
            variance_cutoff: DEFAULT_VARIANCE_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneCell {
    pub k: usize,
    #[serde(rename = "N")]
    pub harmonic_order: usize,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub k: usize,
    #[serde(rename = "N")]
    pub harmonic_order: usize,
    pub validation_accuracy: f64,
    /// Every evaluated pair, ordered by `N` then `k`.
    pub cells: Vec<TuneCell>,
}

/// Grid search over `(k, N)` on a stratified validation split.
///
/// Values of `k` larger than the smallest class of the fitting part are
/// skipped. Ties on validation accuracy go to the smaller `N`, then the
/// smaller `k`.
pub fn tune(train_ds: &LabeledDataset, cfg: &TransformConfig, opts: &TuneOptions) -> Result<TuneResult> {
    cfg.validate()?;
    if opts.k_grid.is_empty() || opts.n_grid.is_empty() {
        return Err(Error::Config("tuning grids must be nonempty".into()));
    }
    let (fit, val) = stratified_split(train_ds, opts.val_fraction, opts.seed)?;
    let min_size = fit.class_sizes().into_iter().min().unwrap_or(0);
    let mut ks: Vec<usize> = opts.k_grid.iter().copied().filter(|&k| k >= 1 && k <= min_size).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Config(format!(
            "no k in {:?} fits the smallest class ({min_size} samples after the split)",
            opts.k_grid
        )));
    }
    let mut ns = opts.n_grid.clone();
    ns.sort_unstable();
    ns.dedup();

    let fit_features = compute_features(&fit, cfg)?;
    let val_features = compute_features(&val, cfg)?;
    let k_ref = ks[0];

    // correct counts per (N, k), computed independently per N
    let per_n: Vec<Vec<usize>> = ns
        .par_iter()
        .map(|&n| {
            let enrichment = EnrichmentConfig::new(opts.use_translation, n)?;
            let model = train_on_features(&fit, fit_features.clone(), cfg, &enrichment, k_ref, opts.variance_cutoff)?;
            let predictions = val_features
                .par_iter()
                .map(|x| model.predict_feature_for_ks(x, &ks))
                .collect::<Result<Vec<_>>>()?;
            Ok((0..ks.len())
                .map(|ki| {
                    predictions
                        .iter()
                        .zip(val.labels())
                        .filter(|(p, &l)| p[ki] == l)
                        .count()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let total = val.len() as f64;
    let mut cells = Vec::with_capacity(ns.len() * ks.len());
    let mut best: Option<(usize, usize, usize)> = None;
    for (ni, &n) in ns.iter().enumerate() {
        for (ki, &k) in ks.iter().enumerate() {
            let correct = per_n[ni][ki];
            cells.push(TuneCell {
                k,
                harmonic_order: n,
                validation_accuracy: correct as f64 / total,
            });
            // iteration runs through N then k ascending, so strict > keeps the tie-break
            if best.is_none_or(|(c, _, _)| correct > c) {
                best = Some((correct, k, n));
            }
        }
    }
    let (correct, k, n) = best.expect("grids are nonempty");
    Ok(TuneResult {
        k,
        harmonic_order: n,
        validation_accuracy: correct as f64 / total,
        cells,
    })
}

/// Tunes `(k, N)` and retrains on the full training set with the winner.
pub fn tune_and_train(
    train_ds: &LabeledDataset,
    cfg: &TransformConfig,
    opts: &TuneOptions,
) -> Result<(TrainedModel, TuneResult)> {
    let tuned = tune(train_ds, cfg, opts)?;
    let enrichment = EnrichmentConfig::new(opts.use_translation, tuned.harmonic_order)?;
    let model = train(train_ds, cfg, &enrichment, tuned.k, opts.variance_cutoff)?;
    Ok((model, tuned))
}

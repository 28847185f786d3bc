//! Experiment runners: accuracy tables, data-efficiency sweeps and the
//! out-of-distribution protocol.

use std::io::Write;
use std::time::Instant;

use log::info;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::dtw::{knn_dtw_classify, tune_window, window_candidates, DtwConfig};
use super::metrics::{per_class_error, MethodSummary, ResultTable};
use crate::error::{Error, Result};
use crate::nls::{
    train, tune_and_train, TuneOptions, DEFAULT_K_MAX, DEFAULT_N_MAX, DEFAULT_VALIDATION_FRACTION,
    DEFAULT_VARIANCE_CUTOFF,
};
use crate::signal::{stratified_split, LabeledDataset};
use crate::subspace::EnrichmentConfig;
use crate::synth::{generate, prototype_templates, sample_rng, Regime, SynthConfig};
use crate::transform::TransformConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlsSettings {
    /// `None` uses the series length.
    pub quantiles: Option<usize>,
    pub k_max: usize,
    pub n_max: usize,
    pub use_translation: bool,
    pub variance_cutoff: f64,
    pub val_fraction: f64,
}

impl Default for NlsSettings {
    fn default() -> Self {
        NlsSettings {
            quantiles: None,
            k_max: DEFAULT_K_MAX,
            n_max: DEFAULT_N_MAX,
            use_translation: true,
            variance_cutoff: DEFAULT_VARIANCE_CUTOFF,
            val_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwSettings {
    pub val_fraction: f64,
}

impl Default for DtwSettings {
    fn default() -> Self {
        DtwSettings {
            val_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Nls(NlsSettings),
    Dtw(DtwSettings),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nls(_) => "NLS",
            Method::Dtw(_) => "1NN-DTW",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',')
            .map(|m| match m.trim().to_ascii_lowercase().as_str() {
                "nls" => Ok(Method::Nls(NlsSettings::default())),
                "dtw" | "1nn-dtw" => Ok(Method::Dtw(DtwSettings::default())),
                other => Err(Error::Config(format!("unknown method {other:?}"))),
            })
            .collect()
    }
}

/// Outcome of fitting one method and scoring it on a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    pub train_seconds: f64,
    /// Mean wall-clock seconds per test sample.
    pub predict_seconds: f64,
    /// Tuned hyperparameters, for the record.
    pub params: String,
}

fn can_split(ds: &LabeledDataset, fraction: f64) -> bool {
    ds.class_sizes()
        .iter()
        .all(|&n| n >= 2 && (((fraction * n as f64) - 1e-9).ceil() as usize) < n)
}

/// Trains `method` on `train` (tuning on a validation split drawn with
/// `seed`) and measures accuracy on `test`.
pub fn fit_and_score(method: &Method, train_ds: &LabeledDataset, test: &LabeledDataset, seed: u64) -> Result<Score> {
    match method {
        Method::Nls(s) => {
            let quantiles = s.quantiles.unwrap_or(train_ds.grid().len);
            let cfg = TransformConfig::new(quantiles)?;
            let start = Instant::now();
            let (model, params) = if can_split(train_ds, s.val_fraction) {
                let opts = TuneOptions {
                    k_grid: (1..=s.k_max).collect(),
                    n_grid: (0..=s.n_max).collect(),
                    val_fraction: s.val_fraction,
                    seed,
                    use_translation: s.use_translation,
                    variance_cutoff: s.variance_cutoff,
                };
                let (model, tuned) = tune_and_train(train_ds, &cfg, &opts)?;
                (model, format!("k={} N={}", tuned.k, tuned.harmonic_order))
            } else {
                info!("too few samples to tune NLS; using k=1, N=0");
                let enrichment = EnrichmentConfig::new(s.use_translation, 0)?;
                (train(train_ds, &cfg, &enrichment, 1, s.variance_cutoff)?, "k=1 N=0".to_string())
            };
            let train_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let predictions = model.predict_many(test.signals())?;
            let predict_seconds = start.elapsed().as_secs_f64() / test.len() as f64;
            let correct = predictions
                .iter()
                .zip(test.labels())
                .filter(|(p, &l)| p.class_index == l)
                .count();
            Ok(Score {
                accuracy: correct as f64 / test.len() as f64,
                train_seconds,
                predict_seconds,
                params,
            })
        }
        Method::Dtw(s) => {
            let n = train_ds.grid().len;
            let start = Instant::now();
            let window = if can_split(train_ds, s.val_fraction) {
                let (fit, val) = stratified_split(train_ds, s.val_fraction, seed)?;
                tune_window(&fit, &val, &window_candidates(n))?.0
            } else {
                info!("too few samples to tune the DTW window; using 10% of the length");
                ((0.1 * n as f64).round() as usize).min(n - 1)
            };
            let train_seconds = start.elapsed().as_secs_f64();
            let cfg = DtwConfig { window };
            let start = Instant::now();
            use rayon::prelude::*;
            let predictions = test
                .signals()
                .par_iter()
                .map(|s| knn_dtw_classify(train_ds, s, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let predict_seconds = start.elapsed().as_secs_f64() / test.len() as f64;
            let correct = predictions.iter().zip(test.labels()).filter(|(p, l)| p == l).count();
            Ok(Score {
                accuracy: correct as f64 / test.len() as f64,
                train_seconds,
                predict_seconds,
                params: format!("r={window}"),
            })
        }
    }
}

/// One (method, dataset) entry of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub method: String,
    pub dataset: String,
    pub class_count: usize,
    pub accuracy: f64,
    pub error: f64,
    pub pce: f64,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub params: String,
}

impl CellMetrics {
    pub fn new(method: &str, dataset: &str, class_count: usize, score: &Score) -> Self {
        CellMetrics {
            method: method.to_string(),
            dataset: dataset.to_string(),
            class_count,
            accuracy: score.accuracy,
            error: 1.0 - score.accuracy,
            pce: per_class_error(score.accuracy, class_count),
            train_seconds: score.train_seconds,
            predict_seconds: score.predict_seconds,
            params: score.params.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub version: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<CellMetrics>,
    pub methods: Vec<MethodSummary>,
    pub environment: Environment,
}

impl MetricsReport {
    /// Builds the summary rows; every method needs exactly one cell per dataset.
    pub fn from_cells(cells: Vec<CellMetrics>) -> Result<Self> {
        let table = table_from_cells(&cells)?;
        Ok(MetricsReport {
            methods: table.summarize()?,
            cells,
            environment: Environment::current(),
        })
    }

    pub fn table(&self) -> Result<ResultTable> {
        table_from_cells(&self.cells)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Test accuracy in percent per dataset, followed by the win count,
    /// arithmetic and geometric mean rank, and MPCE of each method.
    pub fn render_table(&self) -> Result<String> {
        let table = self.table()?;
        let summary = table.summarize()?;
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Dataset".to_string()];
        header.extend(table.methods.iter().cloned());
        rows.push(header);
        for (d, name) in table.datasets.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(table.accuracy.iter().map(|acc| format!("{:.2}", 100.0 * acc[d])));
            rows.push(row);
        }
        let mut stat = |label: &str, f: &dyn Fn(&MethodSummary) -> String| {
            let mut row = vec![label.to_string()];
            row.extend(summary.iter().map(f));
            rows.push(row);
        };
        stat("Win", &|m| m.wins.to_string());
        stat("AVG arithmetic ranking", &|m| format!("{:.2}", m.mean_rank));
        stat("AVG geometric ranking", &|m| format!("{:.2}", m.geometric_mean_rank));
        stat("MPCE", &|m| format!("{:.3}", m.mpce));

        let columns = rows[0].len();
        let widths: Vec<usize> = (0..columns)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        Ok(out)
    }
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

fn table_from_cells(cells: &[CellMetrics]) -> Result<ResultTable> {
    let methods = first_seen(cells.iter().map(|c| c.method.as_str()));
    let datasets = first_seen(cells.iter().map(|c| c.dataset.as_str()));
    let mut accuracy = vec![vec![f64::NAN; datasets.len()]; methods.len()];
    let mut class_counts = vec![0; datasets.len()];
    for c in cells {
        let m = methods.iter().position(|x| *x == c.method).expect("seen");
        let d = datasets.iter().position(|x| *x == c.dataset).expect("seen");
        if !accuracy[m][d].is_nan() {
            return Err(Error::Config(format!("duplicate cell {} / {}", c.method, c.dataset)));
        }
        accuracy[m][d] = c.accuracy;
        class_counts[d] = c.class_count;
    }
    if accuracy.iter().flatten().any(|a| a.is_nan()) {
        return Err(Error::Config("every method needs a result on every dataset".into()));
    }
    Ok(ResultTable {
        methods,
        datasets,
        class_counts,
        accuracy,
    })
}

/// Fits every method on `train` and scores on `test`.
pub fn run_accuracy(
    methods: &[Method],
    dataset: &str,
    train_ds: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<MetricsReport> {
    check_compatible(train_ds, test)?;
    let cells = methods
        .iter()
        .map(|m| {
            let score = fit_and_score(m, train_ds, test, seed)?;
            info!("{} on {dataset}: accuracy {:.4} ({})", m.name(), score.accuracy, score.params);
            Ok(CellMetrics::new(m.name(), dataset, train_ds.class_count(), &score))
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_cells(cells)
}

fn check_compatible(train_ds: &LabeledDataset, test: &LabeledDataset) -> Result<()> {
    if !train_ds.grid().matches(&test.grid()) {
        return Err(Error::Dimension {
            expected: train_ds.grid().len,
            actual: test.grid().len,
        });
    }
    if train_ds.class_labels() != test.class_labels() {
        return Err(Error::InvalidDataset(
            "train and test sets have different class labels".into(),
        ));
    }
    Ok(())
}

/// One CSV row: a single (method, dataset, size, repeat) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub method: String,
    pub dataset: String,
    pub size: usize,
    pub repeat: usize,
    pub accuracy: f64,
    pub train_s: f64,
    pub predict_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over repeats (0 for a single repeat).
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub method: String,
    pub dataset: String,
    pub points: Vec<CurvePoint>,
    pub rows: Vec<RunRow>,
}

/// Up to `size` samples per class, drawn without replacement and kept in
/// dataset order. Classes with at most `size` samples are kept whole.
pub fn subsample_per_class(ds: &LabeledDataset, size: usize, rng: &mut impl rand::Rng) -> Result<LabeledDataset> {
    if size == 0 {
        return Err(Error::Config("training size must be at least 1".into()));
    }
    let mut chosen = Vec::new();
    for members in ds.class_indices() {
        if members.len() <= size {
            chosen.extend(members);
        } else {
            chosen.extend(sample(rng, members.len(), size).into_iter().map(|i| members[i]));
        }
    }
    chosen.sort_unstable();
    ds.subset(&chosen)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Accuracy against training-set size (samples per class), each size
/// repeated on fresh random subsets.
pub fn run_data_efficiency(
    method: &Method,
    dataset: &str,
    train_ds: &LabeledDataset,
    test: &LabeledDataset,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<EfficiencyCurve> {
    check_compatible(train_ds, test)?;
    if repeats == 0 || sizes.is_empty() {
        return Err(Error::Config("need at least one size and one repeat".into()));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &size in sizes {
        let mut accs = Vec::with_capacity(repeats);
        for repeat in 0..repeats {
            let mut rng = sample_rng(seed, ((size as u64) << 32) | repeat as u64);
            let subset = subsample_per_class(train_ds, size, &mut rng)?;
            let score = fit_and_score(method, &subset, test, seed)?;
            info!(
                "{} on {dataset}, size {size}, repeat {repeat}: {:.4} ({})",
                method.name(),
                score.accuracy,
                score.params
            );
            accs.push(score.accuracy);
            rows.push(RunRow {
                method: method.name().to_string(),
                dataset: dataset.to_string(),
                size,
                repeat,
                accuracy: score.accuracy,
                train_s: score.train_seconds,
                predict_s: score.predict_seconds,
            });
        }
        let (mean_accuracy, std_accuracy) = mean_std(&accs);
        points.push(CurvePoint {
            size,
            mean_accuracy,
            std_accuracy,
        });
    }
    Ok(EfficiencyCurve {
        method: method.name().to_string(),
        dataset: dataset.to_string(),
        points,
        rows,
    })
}

pub fn write_rows_csv(rows: &[RunRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutDistOptions {
    pub seed: u64,
    /// Training sizes (samples per class).
    pub sizes: Vec<usize>,
    pub test_per_class: usize,
    pub length: usize,
    pub repeats: usize,
}

impl Default for OutDistOptions {
    fn default() -> Self {
        OutDistOptions {
            seed: 0,
            sizes: vec![1, 2, 4, 8, 16, 32],
            test_per_class: 300,
            length: 256,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutDistReport {
    pub curves: Vec<EfficiencyCurve>,
    /// Mean accuracy per method with one pseudo-dataset per training size.
    pub report: MetricsReport,
}

/// Seed offset separating the test corpus from the training pool.
const TEST_SEED_OFFSET: u64 = 0x5EED_7E57;

/// In-distribution training pool and out-of-distribution test set built
/// from the three prototype templates.
pub fn out_distribution_corpora(opts: &OutDistOptions) -> Result<(LabeledDataset, LabeledDataset)> {
    let templates = prototype_templates(opts.length)?;
    let pool_size = opts.sizes.iter().copied().max().unwrap_or(1);
    let train_cfg = SynthConfig::new(Regime::InDistribution, pool_size, opts.seed);
    let test_cfg = SynthConfig::new(
        Regime::OutDistribution,
        opts.test_per_class,
        opts.seed.wrapping_add(TEST_SEED_OFFSET),
    );
    Ok((generate(&templates, &train_cfg)?, generate(&templates, &test_cfg)?))
}

pub fn run_out_distribution(methods: &[Method], opts: &OutDistOptions) -> Result<OutDistReport> {
    let (pool, test) = out_distribution_corpora(opts)?;
    let curves = methods
        .iter()
        .map(|m| run_data_efficiency(m, "outdist", &pool, &test, &opts.sizes, opts.repeats, opts.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for curve in &curves {
        for p in &curve.points {
            let rows: Vec<&RunRow> = curve.rows.iter().filter(|r| r.size == p.size).collect();
            let count = rows.len() as f64;
            let score = Score {
                accuracy: p.mean_accuracy,
                train_seconds: rows.iter().map(|r| r.train_s).sum::<f64>() / count,
                predict_seconds: rows.iter().map(|r| r.predict_s).sum::<f64>() / count,
                params: String::new(),
            };
            cells.push(CellMetrics::new(&curve.method, &format!("outdist-{}", p.size), 3, &score));
        }
    }
    Ok(OutDistReport {
        curves,
        report: MetricsReport::from_cells(cells)?,
    })
}

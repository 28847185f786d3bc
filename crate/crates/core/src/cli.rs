//! The `scdt-nls` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::bench::harness::{
    run_accuracy, run_data_efficiency, run_out_distribution, write_rows_csv, DtwSettings, EfficiencyCurve, Method,
    MetricsReport, NlsSettings, OutDistOptions, RunRow,
};
use crate::error::{Error, Result};
use crate::model::{load_model, save_model};
use crate::nls::{train, tune_and_train, TuneOptions, DEFAULT_VALIDATION_FRACTION, DEFAULT_VARIANCE_CUTOFF};
use crate::signal::{format_label, format_ucr, read_ucr_tsv, LabeledDataset};
use crate::subspace::EnrichmentConfig;
use crate::synth::{class_pair_templates, generate, prototype_templates, Regime, SynthConfig};
use crate::transform::{scdt, TransformConfig};

#[derive(Debug, Parser)]
#[command(name = "scdt-nls", version, about = "SCDT features and nearest local subspace classification")]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "SCDT_NLS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute SCDT features of every series in a UCR file
    Transform(TransformArgs),
    /// Generate a synthetic warped dataset
    Synth(SynthArgs),
    /// Train an NLS model with fixed hyperparameters
    Train(TrainArgs),
    /// Classify a UCR file with a saved model
    Predict(PredictArgs),
    /// Select k and N on a validation split, optionally saving the retrained model
    Tune(TuneArgs),
    /// Accuracy or data-efficiency benchmark on a UCR pair or synthetic corpus
    Benchmark(BenchmarkArgs),
    /// Out-of-distribution experiment on the three prototype templates
    Outdist(OutdistArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
    /// Plain-text accuracy table with win, rank and MPCE rows
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthCorpus {
    /// Two templates per class, three classes
    Fig5,
    /// Gabor, apodized sawtooth and apodized square
    Prototypes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    In,
    Out,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::In => Regime::InDistribution,
            RegimeArg::Out => Regime::OutDistribution,
        }
    }
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Quantile count (default: series length)
    #[arg(long)]
    pub quantiles: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "fig5")]
    pub corpus: SynthCorpus,
    #[arg(long, value_enum, default_value = "in")]
    pub regime: RegimeArg,
    /// Samples per template
    #[arg(long, default_value_t = 16)]
    pub per_template: usize,
    #[arg(long, default_value_t = 256)]
    pub length: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub quantiles: Option<usize>,
    /// Fraction of variance kept by each local basis
    #[arg(long, default_value_t = DEFAULT_VARIANCE_CUTOFF)]
    pub variance: f64,
    #[arg(long)]
    pub no_translation: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long = "enrich-n", default_value_t = 0)]
    pub enrich_n: usize,
    #[command(flatten)]
    pub common: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::nls::DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = crate::nls::DEFAULT_N_MAX)]
    pub n_max: usize,
    #[arg(long, default_value_t = DEFAULT_VALIDATION_FRACTION)]
    pub val_fraction: f64,
    #[command(flatten)]
    pub common: ModelArgs,
    /// Save the model retrained on all of `--data` here
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated list of nls, dtw
    #[arg(long, default_value = "nls,dtw")]
    pub methods: String,
    #[arg(long, default_value_t = crate::nls::DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = crate::nls::DEFAULT_N_MAX)]
    pub n_max: usize,
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, conflicts_with_all = ["train", "test"])]
    pub synthetic: Option<SynthCorpus>,
    /// UCR training file; repeat together with --test for several datasets
    #[arg(long, requires = "test")]
    pub train: Vec<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Vec<PathBuf>,
    /// Dataset names, one per --train (default: training file stem)
    #[arg(long)]
    pub name: Vec<String>,
    /// Training sizes per class; runs a data-efficiency sweep
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Test samples per template for synthetic corpora
    #[arg(long, default_value_t = 100)]
    pub test_per_template: usize,
    #[arg(long, default_value_t = 256)]
    pub length: usize,
    #[command(flatten)]
    pub run: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct OutdistArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 256)]
    pub length: usize,
    #[command(flatten)]
    pub run: ExperimentArgs,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success, 1 on a runtime error, 2 on a usage error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    if let Err(msg) = validate(&cli) {
        eprintln!("error: {msg}");
        return 2;
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn check_common(c: &ModelArgs) -> std::result::Result<(), String> {
    if let Some(q) = c.quantiles {
        TransformConfig::new(q).map_err(|e| e.to_string())?;
    }
    if !(c.variance > 0.0 && c.variance <= 1.0) {
        return Err(format!("--variance {} not in (0, 1]", c.variance));
    }
    Ok(())
}

fn check_experiment(r: &ExperimentArgs) -> std::result::Result<(), String> {
    check_common(&r.common)?;
    Method::parse_list(&r.methods).map_err(|e| e.to_string())?;
    if r.k_max == 0 {
        return Err("--k-max must be at least 1".into());
    }
    if r.repeats == 0 {
        return Err("--repeats must be at least 1".into());
    }
    Ok(())
}

/// Flag checks that clap cannot express, done before any work starts.
fn validate(cli: &Cli) -> std::result::Result<(), String> {
    if cli.threads == Some(0) {
        return Err("--threads must be at least 1".into());
    }
    match &cli.command {
        Command::Transform(a) => {
            if let Some(q) = a.quantiles {
                TransformConfig::new(q).map_err(|e| e.to_string())?;
            }
        }
        Command::Synth(a) => {
            if a.per_template == 0 {
                return Err("--per-template must be at least 1".into());
            }
            if a.length < 64 {
                return Err("--length must be at least 64".into());
            }
        }
        Command::Train(a) => {
            check_common(&a.common)?;
            if a.k == 0 {
                return Err("--k must be at least 1".into());
            }
            EnrichmentConfig::new(!a.common.no_translation, a.enrich_n).map_err(|e| e.to_string())?;
        }
        Command::Predict(_) => {}
        Command::Tune(a) => {
            check_common(&a.common)?;
            if a.k_max == 0 {
                return Err("--k-max must be at least 1".into());
            }
            if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
                return Err("--val-fraction must be in (0, 1)".into());
            }
        }
        Command::Benchmark(a) => {
            check_experiment(&a.run)?;
            if a.synthetic.is_none() && a.train.is_empty() {
                return Err("benchmark needs --synthetic or --train/--test".into());
            }
            if a.train.len() != a.test.len() {
                return Err(format!("{} --train files but {} --test files", a.train.len(), a.test.len()));
            }
            if !a.name.is_empty() && a.name.len() != a.train.len() {
                return Err("give one --name per --train file or none".into());
            }
            if a.run.format == ReportFormat::Table && !a.sizes.is_empty() {
                return Err("--format table is not available with --sizes".into());
            }
            if a.sizes.contains(&0) {
                return Err("--sizes entries must be at least 1".into());
            }
            if a.synthetic.is_some() && (a.length < 64 || a.test_per_template == 0) {
                return Err("synthetic corpora need --length >= 64 and --test-per-template >= 1".into());
            }
        }
        Command::Outdist(a) => {
            check_experiment(&a.run)?;
            if a.run.format == ReportFormat::Table {
                return Err("--format table is only available for benchmark".into());
            }
            if a.sizes.is_empty() || a.sizes.contains(&0) {
                return Err("--sizes entries must be at least 1".into());
            }
            if a.length < 64 || a.test_per_class == 0 {
                return Err("need --length >= 64 and --test-per-class >= 1".into());
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // Fails only if a pool was already built, e.g. by an earlier call in-process.
        if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
            info!("thread pool already initialized; --threads ignored");
        }
    }
    match cli.command {
        Command::Transform(a) => cmd_transform(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Outdist(a) => cmd_outdist(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn json_string(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn transform_config(quantiles: Option<usize>, ds: &LabeledDataset) -> Result<TransformConfig> {
    TransformConfig::new(quantiles.unwrap_or(ds.grid().len))
}

fn cmd_transform(a: TransformArgs) -> Result<()> {
    let ds = read_ucr_tsv(&a.data)?;
    let cfg = transform_config(a.quantiles, &ds)?;
    let features = ds
        .signals()
        .iter()
        .map(|s| scdt(s, &cfg).map(|f| f.flatten()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<f64> = ds.labels().iter().map(|&l| ds.class_labels()[l]).collect();
    let text = match a.format {
        Format::Csv => {
            let mut s = String::new();
            for (label, f) in labels.iter().zip(&features) {
                s.push_str(&format_label(*label));
                for v in f {
                    s.push(',');
                    s.push_str(&v.to_string());
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                label: f64,
                feature: &'a [f64],
            }
            let rows: Vec<Row> = labels
                .iter()
                .zip(&features)
                .map(|(&label, f)| Row { label, feature: f })
                .collect();
            json_string(&rows)?
        }
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let templates = match a.corpus {
        SynthCorpus::Fig5 => class_pair_templates(a.length)?,
        SynthCorpus::Prototypes => prototype_templates(a.length)?,
    };
    let cfg = SynthConfig::new(a.regime.into(), a.per_template, a.seed);
    let ds = generate(&templates, &cfg)?;
    info!("generated {} series of length {}", ds.len(), a.length);
    emit(a.out.as_deref(), &format_ucr(&ds))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = read_ucr_tsv(&a.data)?;
    let cfg = transform_config(a.common.quantiles, &ds)?;
    let enrichment = EnrichmentConfig::new(!a.common.no_translation, a.enrich_n)?;
    let model = train(&ds, &cfg, &enrichment, a.k, a.common.variance)?;
    save_model(&model, &a.model)?;
    info!("trained on {} series, {} classes", ds.len(), ds.class_count());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = read_ucr_tsv(&a.data)?;
    let predictions = model.predict_many(ds.signals())?;
    let model_labels = model.class_labels();
    let predicted: Vec<f64> = predictions.iter().map(|p| model_labels[p.class_index]).collect();
    let truth: Vec<f64> = ds.labels().iter().map(|&l| ds.class_labels()[l]).collect();
    let correct = predicted.iter().zip(&truth).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / ds.len() as f64;
    eprintln!("accuracy: {accuracy}");
    let text = match a.format {
        Format::Csv => {
            let mut s = String::from("index,true,predicted\n");
            for (i, (t, p)) in truth.iter().zip(&predicted).enumerate() {
                s.push_str(&format!("{i},{},{}\n", format_label(*t), format_label(*p)));
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                accuracy: f64,
                predicted: &'a [f64],
                truth: &'a [f64],
            }
            json_string(&Out {
                accuracy,
                predicted: &predicted,
                truth: &truth,
            })?
        }
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let ds = read_ucr_tsv(&a.data)?;
    let cfg = transform_config(a.common.quantiles, &ds)?;
    let opts = TuneOptions {
        k_grid: (1..=a.k_max).collect(),
        n_grid: (0..=a.n_max).collect(),
        val_fraction: a.val_fraction,
        seed: a.seed,
        use_translation: !a.common.no_translation,
        variance_cutoff: a.common.variance,
    };
    let (model, result) = tune_and_train(&ds, &cfg, &opts)?;
    info!(
        "selected k={} N={} (validation accuracy {})",
        result.k, result.harmonic_order, result.validation_accuracy
    );
    if let Some(path) = &a.model {
        save_model(&model, path)?;
    }
    emit(a.out.as_deref(), &json_string(&result)?)
}

fn methods_of(r: &ExperimentArgs, quantiles: Option<usize>) -> Result<Vec<Method>> {
    Ok(Method::parse_list(&r.methods)?
        .into_iter()
        .map(|m| match m {
            Method::Nls(_) => Method::Nls(NlsSettings {
                quantiles,
                k_max: r.k_max,
                n_max: r.n_max,
                use_translation: !r.common.no_translation,
                variance_cutoff: r.common.variance,
                val_fraction: DEFAULT_VALIDATION_FRACTION,
            }),
            Method::Dtw(_) => Method::Dtw(DtwSettings::default()),
        })
        .collect())
}

fn emit_curves(r: &ExperimentArgs, curves: &[EfficiencyCurve]) -> Result<()> {
    match r.format {
        ReportFormat::Csv => {
            let rows: Vec<RunRow> = curves.iter().flat_map(|c| c.rows.iter().cloned()).collect();
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf)?;
            emit(r.out.as_deref(), &String::from_utf8_lossy(&buf))
        }
        ReportFormat::Json => emit(r.out.as_deref(), &json_string(&curves)?),
        ReportFormat::Table => Err(Error::Config("curves have no table format".into())),
    }
}

fn synthetic_pair(a: &BenchmarkArgs, corpus: SynthCorpus) -> Result<(String, LabeledDataset, LabeledDataset)> {
    let templates = match corpus {
        SynthCorpus::Fig5 => class_pair_templates(a.length)?,
        SynthCorpus::Prototypes => prototype_templates(a.length)?,
    };
    let pool = a.sizes.iter().copied().max().unwrap_or(16);
    let per_template = pool.div_ceil(templates.len() / 3).max(1);
    let train_cfg = SynthConfig::new(Regime::InDistribution, per_template, a.run.seed);
    let test_cfg = SynthConfig::new(Regime::InDistribution, a.test_per_template, a.run.seed.wrapping_add(1));
    let name = match corpus {
        SynthCorpus::Fig5 => "fig5",
        SynthCorpus::Prototypes => "prototypes",
    };
    Ok((name.to_string(), generate(&templates, &train_cfg)?, generate(&templates, &test_cfg)?))
}

fn dataset_name(train_path: &Path) -> String {
    train_path
        .file_stem()
        .map(|s| s.to_string_lossy().trim_end_matches("_TRAIN").to_string())
        .unwrap_or_else(|| "dataset".into())
}

fn cmd_benchmark(a: BenchmarkArgs) -> Result<()> {
    let pairs = match a.synthetic {
        Some(corpus) => vec![synthetic_pair(&a, corpus)?],
        None => a
            .train
            .iter()
            .zip(&a.test)
            .enumerate()
            .map(|(i, (train_path, test_path))| {
                let name = a.name.get(i).cloned().unwrap_or_else(|| dataset_name(train_path));
                Ok((name, read_ucr_tsv(train_path)?, read_ucr_tsv(test_path)?))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let methods = methods_of(&a.run, a.run.common.quantiles)?;
    if !a.sizes.is_empty() {
        let mut curves = Vec::new();
        for (name, train_ds, test) in &pairs {
            for m in &methods {
                curves.push(run_data_efficiency(m, name, train_ds, test, &a.sizes, a.run.repeats, a.run.seed)?);
            }
        }
        return emit_curves(&a.run, &curves);
    }

    let mut cells = Vec::new();
    let mut rows = Vec::new();
    for (name, train_ds, test) in &pairs {
        let report = run_accuracy(&methods, name, train_ds, test, a.run.seed)?;
        let size = train_ds.class_sizes().into_iter().max().unwrap_or(0);
        rows.extend(report.cells.iter().map(|c| RunRow {
            method: c.method.clone(),
            dataset: c.dataset.clone(),
            size,
            repeat: 0,
            accuracy: c.accuracy,
            train_s: c.train_seconds,
            predict_s: c.predict_seconds,
        }));
        cells.extend(report.cells);
    }
    let report = MetricsReport::from_cells(cells)?;
    match a.run.format {
        ReportFormat::Json => emit(a.run.out.as_deref(), &json_string(&report)?),
        ReportFormat::Table => emit(a.run.out.as_deref(), &report.render_table()?),
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_rows_csv(&rows, &mut buf)?;
            emit(a.run.out.as_deref(), &String::from_utf8_lossy(&buf))
        }
    }
}

fn cmd_outdist(a: OutdistArgs) -> Result<()> {
    let methods = methods_of(&a.run, a.run.common.quantiles)?;
    let opts = OutDistOptions {
        seed: a.run.seed,
        sizes: a.sizes.clone(),
        test_per_class: a.test_per_class,
        length: a.length,
        repeats: a.run.repeats,
    };
    let report = run_out_distribution(&methods, &opts)?;
    match a.run.format {
        ReportFormat::Json => emit(a.run.out.as_deref(), &json_string(&report)?),
        _ => emit_curves(&a.run, &report.curves),
    }
}

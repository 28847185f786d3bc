//! Uniformly sampled signals, labeled datasets and the UCR-style TSV format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance, in samples, within which interpolation returns the node value.
const NODE_SNAP: f64 = 1e-9;

/// Sampling grid `t_i = t0 + i * dt`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(t0: f64, dt: f64, len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !t0.is_finite() {
            return Err(Error::InvalidSignal(format!(
                "grid needs finite t0 and dt > 0 (t0={t0}, dt={dt})"
            )));
        }
        if len < 2 {
            return Err(Error::InvalidSignal(format!(
                "grid needs at least 2 samples, got {len}"
            )));
        }
        Ok(Grid { t0, dt, len })
    }

    /// The grid spanning `[0, 1]` with `len` samples.
    pub fn unit(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidSignal(format!(
                "grid needs at least 2 samples, got {len}"
            )));
        }
        Grid::new(0.0, 1.0 / (len - 1) as f64, len)
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.time(i))
    }

    /// Same sample count and spacing, with a relative tolerance for the
    /// floating point parameters.
    pub fn matches(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        self.len == other.len && close(self.t0, other.t0) && close(self.dt, other.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    grid: Grid,
}

impl Signal {
    pub fn new(samples: Vec<f64>, t0: f64, dt: f64) -> Result<Self> {
        let grid = Grid::new(t0, dt, samples.len())?;
        Signal::on_grid(samples, grid)
    }

    /// A signal on the unit interval `[0, 1]`.
    pub fn unit(samples: Vec<f64>) -> Result<Self> {
        let grid = Grid::unit(samples.len())?;
        Signal::on_grid(samples, grid)
    }

    pub fn on_grid(samples: Vec<f64>, grid: Grid) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(Error::Dimension {
                expected: grid.len,
                actual: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "sample {i} is not finite ({})",
                samples[i]
            )));
        }
        Ok(Signal { samples, grid })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = grid.times().map(f).collect();
        Signal::on_grid(samples, grid)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Linear interpolation between samples, zero outside the domain.
    ///
    /// Points within 1e-9 samples of a node take the node value, so grid
    /// times recomputed with rounding error do not leak a sliver of a
    /// neighboring sample.
    pub fn interpolate(&self, t: f64) -> f64 {
        let x = (t - self.grid.t0) / self.grid.dt;
        let last = (self.len() - 1) as f64;
        let node = x.round();
        if (x - node).abs() <= NODE_SNAP && node >= 0.0 && node <= last {
            return self.samples[node as usize];
        }
        if !(x >= 0.0 && x <= last) {
            return 0.0;
        }
        let i = (x.floor() as usize).min(self.len() - 2);
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Trapezoidal integral of the samples.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.samples, self.grid.dt)
    }

    /// Trapezoidal L1 norm.
    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.samples.iter().map(|v| v.abs()).collect();
        trapezoid(&abs, self.grid.dt)
    }

    /// Trapezoidal squared L2 norm.
    pub fn energy(&self) -> f64 {
        let sq: Vec<f64> = self.samples.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.grid.dt)
    }
}

pub(crate) fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Running trapezoidal integral, starting at 0.
pub(crate) fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Equal-length signals on a shared grid with contiguous class indices.
///
/// `class_labels[c]` keeps the original label of class `c` for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    signals: Vec<Signal>,
    labels: Vec<usize>,
    class_labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(signals: Vec<Signal>, labels: Vec<usize>, class_labels: Vec<f64>) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if signals.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} signals but {} labels",
                signals.len(),
                labels.len()
            )));
        }
        let grid = signals[0].grid();
        if let Some(i) = signals.iter().position(|s| !s.grid().matches(&grid)) {
            return Err(Error::InvalidDataset(format!(
                "signal {i} is not on the grid of signal 0"
            )));
        }
        let class_count = class_labels.len();
        let mut counts = vec![0usize; class_count];
        for (i, &label) in labels.iter().enumerate() {
            if label >= class_count {
                return Err(Error::InvalidDataset(format!(
                    "label {label} of sample {i} exceeds class count {class_count}"
                )));
            }
            counts[label] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidDataset(format!("class {c} has no samples")));
        }
        Ok(LabeledDataset {
            signals,
            labels,
            class_labels,
        })
    }

    /// Builds a dataset whose original labels are the class indices.
    pub fn with_indices(signals: Vec<Signal>, labels: Vec<usize>) -> Result<Self> {
        let class_count = labels.iter().max().map_or(0, |m| m + 1);
        let names = (0..class_count).map(|c| c as f64).collect();
        LabeledDataset::new(signals, labels, names)
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_labels(&self) -> &[f64] {
        &self.class_labels
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn grid(&self) -> Grid {
        self.signals[0].grid()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Signal, usize)> {
        self.signals.iter().zip(self.labels.iter().copied())
    }

    /// Sample indices of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (i, &label) in self.labels.iter().enumerate() {
            out[label].push(i);
        }
        out
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.class_indices().iter().map(Vec::len).collect()
    }

    /// The samples at `indices`, keeping the class map. Every class must
    /// remain represented.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let signals = indices.iter().map(|&i| self.signals[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(signals, labels, self.class_labels.clone())
    }
}

/// Reads a UCR-style file: one record per line, the class label first and
/// the series after it, separated by tabs, spaces or commas.
pub fn read_ucr_tsv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ucr(&text)
}

pub fn parse_ucr(text: &str) -> Result<LabeledDataset> {
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut values = Vec::new();
        let tokens = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty());
        for (col, token) in tokens.enumerate() {
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                row,
                col: col + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: col + 1,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
        let label = values.remove(0);
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Format {
                    row,
                    reason: format!("expected {} values, found {}", first.len(), values.len()),
                });
            }
        } else if values.len() < 2 {
            return Err(Error::Format {
                row,
                reason: format!("series needs at least 2 values, found {}", values.len()),
            });
        }
        raw_labels.push(label);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut classes = raw_labels.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let labels = raw_labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label present"))
        .collect();
    let grid = Grid::unit(rows[0].len())?;
    let signals = rows
        .into_iter()
        .map(|r| Signal::on_grid(r, grid))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(signals, labels, classes)
}

pub fn format_label(label: f64) -> String {
    if label.fract() == 0.0 && label.abs() < 1e15 {
        format!("{}", label as i64)
    } else {
        format!("{label}")
    }
}

/// Serializes to the UCR layout. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn format_ucr(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    for (signal, label) in ds.iter() {
        out.push_str(&format_label(ds.class_labels[label]));
        for v in signal.samples() {
            write!(out, "\t{v}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn write_ucr_tsv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_ucr(ds)).map_err(|e| Error::io(path, e))
}

/// Splits every class so that the second part holds `ceil(fraction * L_c)`
/// of its samples. Deterministic for a given seed.
pub fn stratified_split(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction {fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (class, mut members) in ds.class_indices().into_iter().enumerate() {
        let size = members.len();
        if size < 2 {
            return Err(Error::Split(format!(
                "class {class} has {size} sample(s), need at least 2"
            )));
        }
        // 0.1 * 30 must give 3, not 4
        let held = ((fraction * size as f64) - 1e-9).ceil().max(1.0) as usize;
        if held >= size {
            return Err(Error::Split(format!(
                "fraction {fraction} leaves no samples of class {class} in the first part"
            )));
        }
        members.shuffle(&mut rng);
        second.extend_from_slice(&members[..held]);
        first.extend_from_slice(&members[held..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((ds.subset(&first)?, ds.subset(&second)?))
}

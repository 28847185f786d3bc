//! Synthetic warped corpora.
//!
//! Every sample is `g'(t) * phi(g(t))` for a template `phi` and a random
//! increasing warp `g(t) = omega * zeta(t) + tau`, where `zeta'` is a mixture
//! of Gaussian densities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{cumulative_trapezoid, Grid, LabeledDataset, Signal};
use crate::transform::{apply_warp, Warp, WarpSamples};

/// Consecutive rejected draws before giving up.
pub const MAX_REJECTIONS: usize = 1000;

/// Fine steps per grid step when integrating `zeta'`.
const REFINE: usize = 4;

/// Gaussian tails beyond this many widths are ignored when choosing the
/// lower integration limit.
const TAIL_WIDTHS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpComponent {
    /// Mixture weight `alpha_n > 0`.
    pub weight: f64,
    /// Center `mu_n`.
    pub center: f64,
    /// Width `w_n > 0`.
    pub width: f64,
}

impl WarpComponent {
    fn density(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.width;
        self.weight * (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.width)
    }
}

/// `g(t) = omega * zeta(t) + tau` with
/// `zeta'(t) = sum_n alpha_n N(t; mu_n, w_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    pub omega: f64,
    pub tau: f64,
    pub components: Vec<WarpComponent>,
}

impl WarpSpec {
    pub fn new(omega: f64, tau: f64, components: Vec<WarpComponent>) -> Result<Self> {
        let spec = WarpSpec {
            omega,
            tau,
            components,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) || !self.tau.is_finite() {
            return Err(Error::Config(format!(
                "warp needs omega > 0 and finite tau (omega={}, tau={})",
                self.omega, self.tau
            )));
        }
        if self.components.is_empty() {
            return Err(Error::Config("warp needs at least one component".into()));
        }
        for c in &self.components {
            if !(c.weight > 0.0 && c.width > 0.0 && c.center.is_finite() && c.width.is_finite()) {
                return Err(Error::Config(format!("invalid warp component {c:?}")));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("component weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// `zeta'(t)`.
    pub fn zeta_density(&self, t: f64) -> f64 {
        self.components.iter().map(|c| c.density(t)).sum()
    }

    /// `zeta` on `grid`, integrated with the trapezoid rule on a refined grid
    /// that starts where every component's density is negligible.
    pub fn zeta_on(&self, grid: &Grid) -> Vec<f64> {
        let lower = self
            .components
            .iter()
            .map(|c| c.center - TAIL_WIDTHS * c.width)
            .fold(grid.t0, f64::min);
        let h = grid.dt / REFINE as f64;
        let lead = ((grid.t0 - lower) / h).ceil() as usize;
        let start = grid.t0 - lead as f64 * h;
        let fine_len = lead + (grid.len - 1) * REFINE + 1;
        let density: Vec<f64> = (0..fine_len).map(|i| self.zeta_density(start + i as f64 * h)).collect();
        let zeta = cumulative_trapezoid(&density, h);
        (0..grid.len).map(|i| zeta[lead + i * REFINE]).collect()
    }

    /// Smallest `g'` over the grid.
    pub fn min_derivative(&self, grid: &Grid) -> f64 {
        grid.times()
            .map(|t| self.omega * self.zeta_density(t))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Warp for WarpSpec {
    fn tabulate(&self, grid: &Grid) -> WarpSamples {
        let values = self.zeta_on(grid).into_iter().map(|z| self.omega * z + self.tau).collect();
        let derivatives = grid.times().map(|t| self.omega * self.zeta_density(t)).collect();
        WarpSamples { values, derivatives }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: PartialOrd + Copy> Interval<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn ordered(&self) -> bool {
        self.lo <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    InDistribution,
    OutDistribution,
}

/// Ranges the warp parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpIntervals {
    /// Number of mixture components, drawn uniformly (inclusive).
    pub components: Interval<usize>,
    /// Mean and standard deviation of the normally distributed centers.
    pub center_mean: f64,
    pub center_std: f64,
    pub width: Interval<f64>,
    pub omega: Interval<f64>,
    pub tau: Interval<f64>,
}

impl WarpIntervals {
    pub const DEFAULT_WIDTH: Interval<f64> = Interval::new(0.05, 0.3);

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::InDistribution => WarpIntervals {
                components: Interval::new(2, 5),
                center_mean: 0.5,
                center_std: 0.2,
                width: Self::DEFAULT_WIDTH,
                omega: Interval::new(0.9, 1.1),
                tau: Interval::new(-0.05, 0.05),
            },
            Regime::OutDistribution => WarpIntervals {
                components: Interval::new(2, 10),
                center_mean: 0.5,
                center_std: 0.3,
                width: Self::DEFAULT_WIDTH,
                omega: Interval::new(0.75, 1.25),
                tau: Interval::new(-0.1, 0.1),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.components.ordered()
            && self.components.lo >= 1
            && self.width.ordered()
            && self.width.lo > 0.0
            && self.omega.ordered()
            && self.omega.lo > 0.0
            && self.tau.ordered()
            && self.center_std >= 0.0
            && self.center_mean.is_finite();
        if !ok {
            return Err(Error::Config(format!("invalid warp intervals {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regime: Regime,
    pub intervals: WarpIntervals,
    pub samples_per_template: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(regime: Regime, samples_per_template: usize, seed: u64) -> Self {
        SynthConfig {
            regime,
            intervals: WarpIntervals::for_regime(regime),
            samples_per_template,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intervals.validate()?;
        if self.samples_per_template == 0 {
            return Err(Error::Config("samples_per_template must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws a warp whose derivative is positive at every point of `grid`.
pub fn sample_warp(intervals: &WarpIntervals, grid: &Grid, rng: &mut impl Rng) -> Result<WarpSpec> {
    intervals.validate()?;
    let centers = Normal::new(intervals.center_mean, intervals.center_std)
        .map_err(|e| Error::Config(format!("center distribution: {e}")))?;
    for _ in 0..MAX_REJECTIONS {
        let count = rng.gen_range(intervals.components.lo..=intervals.components.hi);
        // flat Dirichlet weights
        let raw: Vec<f64> = (0..count).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = raw.iter().sum();
        let components = raw
            .iter()
            .map(|&r| WarpComponent {
                weight: r / total,
                center: centers.sample(rng),
                width: rng.gen_range(intervals.width.lo..=intervals.width.hi),
            })
            .collect();
        let omega = rng.gen_range(intervals.omega.lo..=intervals.omega.hi);
        let tau = rng.gen_range(intervals.tau.lo..=intervals.tau.hi);
        let spec = WarpSpec {
            omega,
            tau,
            components,
        };
        if spec.validate().is_ok() && spec.min_derivative(grid) > 0.0 {
            return Ok(spec);
        }
    }
    Err(Error::Generation(format!(
        "{MAX_REJECTIONS} consecutive draws had a non-increasing warp"
    )))
}

/// Smallest interval outside of which the linearly interpolated `s` vanishes.
fn support(s: &Signal) -> Option<(f64, f64)> {
    let first = s.samples().iter().position(|&v| v != 0.0)?;
    let last = s.samples().iter().rposition(|&v| v != 0.0)?;
    let grid = s.grid();
    Some((
        grid.time(first.saturating_sub(1)),
        grid.time((last + 1).min(grid.len - 1)),
    ))
}

/// Whether `g` maps the grid's span onto an interval containing the support
/// of `template`, so the warped sample keeps all of the template's mass.
pub fn covers_support(warp: &WarpSpec, template: &Signal) -> bool {
    let Some((lo, hi)) = support(template) else {
        return true;
    };
    let g = warp.tabulate(&template.grid()).values;
    g[0] <= lo && g[g.len() - 1] >= hi
}

/// Like [`sample_warp`], also redrawing warps that would push part of
/// `template` outside the observation window.
pub fn sample_covering_warp(intervals: &WarpIntervals, template: &Signal, rng: &mut impl Rng) -> Result<WarpSpec> {
    for _ in 0..MAX_REJECTIONS {
        let warp = sample_warp(intervals, &template.grid(), rng)?;
        if covers_support(&warp, template) {
            return Ok(warp);
        }
    }
    Err(Error::Generation(format!(
        "{MAX_REJECTIONS} consecutive warps left part of the template outside the grid"
    )))
}

/// Template waveforms on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateKind {
    Gabor,
    ApodizedSawtooth,
    ApodizedSquare,
    /// Member `member` (0 or 1) of class `class` (0, 1 or 2) of the
    /// two-templates-per-class corpus.
    ClassPair { class: usize, member: usize },
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateKind::Gabor => f.write_str("gabor"),
            TemplateKind::ApodizedSawtooth => f.write_str("apodized_sawtooth"),
            TemplateKind::ApodizedSquare => f.write_str("apodized_square"),
            TemplateKind::ClassPair { class, member } => write!(f, "class_pair({class},{member})"),
        }
    }
}

impl FromStr for TemplateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gabor" => Ok(TemplateKind::Gabor),
            "apodized_sawtooth" | "sawtooth" => Ok(TemplateKind::ApodizedSawtooth),
            "apodized_square" | "square" => Ok(TemplateKind::ApodizedSquare),
            _ => {
                let inner = s
                    .strip_prefix("class_pair(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Config(format!("unknown template kind {s:?}")))?;
                let (c, m) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("unknown template kind {s:?}")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("unknown template kind {s:?}")))
                };
                Ok(TemplateKind::ClassPair {
                    class: parse(c)?,
                    member: parse(m)?,
                })
            }
        }
    }
}

/// Raised-cosine window of half-width `half` centered at `center`.
fn hann(t: f64, center: f64, half: f64) -> f64 {
    let x = (t - center) / half;
    if x.abs() < 1.0 {
        (0.5 * PI * x).cos().powi(2)
    } else {
        0.0
    }
}

/// Zero-mean sawtooth with unit period, odd about 0.
fn sawtooth(x: f64) -> f64 {
    2.0 * (x - (x + 0.5).floor())
}

fn square(x: f64) -> f64 {
    let s = (2.0 * PI * x).sin();
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gaussian-windowed sine, tapered to zero beyond four widths so the
/// template has compact support.
fn gabor(t: f64, center: f64, sigma: f64, freq: f64) -> f64 {
    let x = t - center;
    hann(t, center, 4.0 * sigma) * (-0.5 * (x / sigma).powi(2)).exp() * (2.0 * PI * freq * x).sin()
}

/// Support half-width of the apodized templates.
const HALF_SUPPORT: f64 = 0.25;

fn apodized_sawtooth(t: f64, half: f64, teeth: f64) -> f64 {
    hann(t, 0.5, half) * sawtooth(teeth * (t - 0.5))
}

fn apodized_square(t: f64, half: f64, periods: f64) -> f64 {
    hann(t, 0.5, half) * square(periods * (t - 0.5))
}

fn template_fn(kind: TemplateKind) -> Result<Box<dyn Fn(f64) -> f64>> {
    let f: Box<dyn Fn(f64) -> f64> = match kind {
        TemplateKind::Gabor => Box::new(|t| gabor(t, 0.5, 0.08, 5.0)),
        TemplateKind::ApodizedSawtooth => Box::new(|t| apodized_sawtooth(t, HALF_SUPPORT, 4.0)),
        TemplateKind::ApodizedSquare => Box::new(|t| apodized_square(t, HALF_SUPPORT, 3.0)),
        TemplateKind::ClassPair { class, member } => match (class, member) {
            (0, 0) => Box::new(|t| gabor(t, 0.5, 0.08, 5.0)),
            (0, 1) => Box::new(|t| gabor(t, 0.5, 0.06, 6.0)),
            (1, 0) => Box::new(|t| apodized_sawtooth(t, HALF_SUPPORT, 4.0)),
            (1, 1) => Box::new(|t| -apodized_sawtooth(t, 0.2, 4.0)),
            (2, 0) => Box::new(|t| apodized_square(t, HALF_SUPPORT, 3.0)),
            (2, 1) => Box::new(|t| apodized_square(t, 0.2, 2.5)),
            _ => {
                return Err(Error::Config(format!(
                    "class_pair({class},{member}) out of range: classes 0..3, members 0..2"
                )))
            }
        },
    };
    Ok(f)
}

/// Unit-energy template sampled at `n` points on `[0, 1]`.
pub fn template(kind: TemplateKind, n: usize) -> Result<Signal> {
    if n < 64 {
        return Err(Error::Config(format!("templates need n >= 64, got {n}")));
    }
    let f = template_fn(kind)?;
    let raw = Signal::from_fn(Grid::unit(n)?, f)?;
    let norm = raw.energy().sqrt();
    let grid = raw.grid();
    Signal::on_grid(raw.into_samples().into_iter().map(|v| v / norm).collect(), grid)
}

/// The six templates of the two-per-class corpus, with their classes.
pub fn class_pair_templates(n: usize) -> Result<Vec<(Signal, usize)>> {
    let mut out = Vec::with_capacity(6);
    for class in 0..3 {
        for member in 0..2 {
            out.push((template(TemplateKind::ClassPair { class, member }, n)?, class));
        }
    }
    Ok(out)
}

/// Gabor, apodized sawtooth and apodized square, one class each.
pub fn prototype_templates(n: usize) -> Result<Vec<(Signal, usize)>> {
    Ok(vec![
        (template(TemplateKind::Gabor, n)?, 0),
        (template(TemplateKind::ApodizedSawtooth, n)?, 1),
        (template(TemplateKind::ApodizedSquare, n)?, 2),
    ])
}

/// RNG for sample `index`; each sample has its own stream.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Warps every template `samples_per_template` times. Samples are ordered
/// template by template.
pub fn generate(templates: &[(Signal, usize)], cfg: &SynthConfig) -> Result<LabeledDataset> {
    Ok(generate_with_warps(templates, cfg)?.0)
}

/// Like [`generate`], also returning the warp used for each sample.
pub fn generate_with_warps(
    templates: &[(Signal, usize)],
    cfg: &SynthConfig,
) -> Result<(LabeledDataset, Vec<WarpSpec>)> {
    cfg.validate()?;
    if templates.is_empty() {
        return Err(Error::Config("no templates given".into()));
    }
    let per = cfg.samples_per_template;
    let total = templates.len() * per;
    let produced = (0..total)
        .into_par_iter()
        .map(|i| {
            let (template, class) = &templates[i / per];
            let mut rng = sample_rng(cfg.seed, i as u64);
            let warp = sample_covering_warp(&cfg.intervals, template, &mut rng)?;
            Ok((apply_warp(template, &warp)?, *class, warp))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut signals = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut warps = Vec::with_capacity(total);
    for (s, c, w) in produced {
        signals.push(s);
        labels.push(c);
        warps.push(w);
    }
    Ok((LabeledDataset::with_indices(signals, labels)?, warps))
}

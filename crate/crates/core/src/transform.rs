//! Cumulative distribution transform (CDT) and its signed extension (SCDT)
//! with respect to the uniform reference density on `[0, 1]`.
//!
//! A nonnegative signal is mapped to its quantile function sampled at
//! `y_j = j / (Q - 1)`. Signed signals are split into positive and negative
//! parts, each transformed separately and paired with its L1 mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{cumulative_trapezoid, Grid, Signal};

/// Relative factor of the default zero-mass threshold.
pub const DEFAULT_MASS_EPSILON_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Number of reference grid points `Q` on `[0, 1]`.
    pub quantiles: usize,
    /// Absolute threshold at or below which a signed part counts as zero.
    /// `None` selects `1e-12 * domain length * max|s|` per signal.
    pub mass_epsilon: Option<f64>,
}

impl TransformConfig {
    pub fn new(quantiles: usize) -> Result<Self> {
        let cfg = TransformConfig {
            quantiles,
            mass_epsilon: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `Q` equal to the signal length.
    pub fn for_length(n: usize) -> Result<Self> {
        TransformConfig::new(n)
    }

    pub fn with_mass_epsilon(mut self, eps: f64) -> Result<Self> {
        self.mass_epsilon = Some(eps);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles < 8 {
            return Err(Error::Config(format!(
                "quantile count must be at least 8, got {}",
                self.quantiles
            )));
        }
        if let Some(eps) = self.mass_epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("mass epsilon {eps} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Length of a flattened feature vector, `2Q + 2`.
    pub fn feature_dim(&self) -> usize {
        2 * self.quantiles + 2
    }

    /// Reference grid `y_j = j / (Q - 1)`.
    pub fn reference_grid(&self) -> Vec<f64> {
        let last = (self.quantiles - 1) as f64;
        (0..self.quantiles).map(|j| j as f64 / last).collect()
    }

    fn threshold(&self, s: &Signal) -> f64 {
        self.mass_epsilon.unwrap_or_else(|| {
            let grid = s.grid();
            let peak = s.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            DEFAULT_MASS_EPSILON_FACTOR * (grid.end() - grid.t0) * peak
        })
    }
}

/// SCDT of a signal: quantile function and L1 mass of each signed part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportFeature {
    pub pos_quantiles: Vec<f64>,
    pub pos_mass: f64,
    pub neg_quantiles: Vec<f64>,
    pub neg_mass: f64,
}

impl TransportFeature {
    pub fn zero(quantiles: usize) -> Self {
        TransportFeature {
            pos_quantiles: vec![0.0; quantiles],
            pos_mass: 0.0,
            neg_quantiles: vec![0.0; quantiles],
            neg_mass: 0.0,
        }
    }

    pub fn quantile_count(&self) -> usize {
        self.pos_quantiles.len()
    }

    /// `[pos_quantiles | pos_mass | neg_quantiles | neg_mass]`
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.quantile_count() + 2);
        out.extend_from_slice(&self.pos_quantiles);
        out.push(self.pos_mass);
        out.extend_from_slice(&self.neg_quantiles);
        out.push(self.neg_mass);
        out
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        let q = quantile_count_of(v.len())?;
        Ok(TransportFeature {
            pos_quantiles: v[..q].to_vec(),
            pos_mass: v[q],
            neg_quantiles: v[q + 1..2 * q + 1].to_vec(),
            neg_mass: v[2 * q + 1],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.pos_quantiles.len() != self.neg_quantiles.len() {
            return Err(Error::InvalidFeature(format!(
                "part lengths differ: {} vs {}",
                self.pos_quantiles.len(),
                self.neg_quantiles.len()
            )));
        }
        for (name, q, mass) in [
            ("positive", &self.pos_quantiles, self.pos_mass),
            ("negative", &self.neg_quantiles, self.neg_mass),
        ] {
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(Error::InvalidFeature(format!("{name} mass {mass} is invalid")));
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidFeature(format!("{name} quantiles not finite")));
            }
            if let Some(j) = q.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::InvalidFeature(format!(
                    "{name} quantiles decrease at index {}",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Number of quantiles per part for a flattened vector of length `dim`.
pub fn quantile_count_of(dim: usize) -> Result<usize> {
    if dim < 4 || !dim.is_multiple_of(2) {
        return Err(Error::Dimension {
            expected: 2 * (dim.max(4) / 2) + 2,
            actual: dim,
        });
    }
    Ok((dim - 2) / 2)
}

/// CDT of a nonnegative signal.
pub fn cdt(s: &Signal, cfg: &TransformConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if let Some(i) = s.samples().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeInput(i));
    }
    let threshold = cfg.threshold(s);
    let (quantiles, _) = part_transform(s.samples(), s.grid(), cfg.quantiles, threshold)
        .ok_or_else(|| Error::ZeroMass {
            mass: s.integral(),
            threshold,
        })?;
    Ok(quantiles)
}

/// Quantiles and mass of a nonnegative part, or `None` when the mass does not
/// exceed `threshold`.
fn part_transform(
    part: &[f64],
    grid: Grid,
    quantiles: usize,
    threshold: f64,
) -> Option<(Vec<f64>, f64)> {
    let cumulative = cumulative_trapezoid(part, grid.dt);
    let mass = *cumulative.last().expect("grid has samples");
    if !(mass > threshold) || mass <= 0.0 {
        return None;
    }
    let cdf: Vec<f64> = cumulative.iter().map(|c| c / mass).collect();
    let last = (quantiles - 1) as f64;
    let q = (0..quantiles)
        .map(|j| invert_cdf(&cdf, grid, j as f64 / last))
        .collect();
    Some((q, mass))
}

/// Generalized inverse of a piecewise linear CDF given at the grid nodes.
///
/// For `y > 0` this is the leftmost `t` with `F(t) >= y`. At `y = 0` it is the
/// start of the support, the right end of the initial zero run.
fn invert_cdf(cdf: &[f64], grid: Grid, y: f64) -> f64 {
    if y <= 0.0 {
        let i = cdf.partition_point(|&f| f <= 0.0);
        return grid.time(i.saturating_sub(1));
    }
    let i = cdf.partition_point(|&f| f < y);
    if i >= cdf.len() {
        return grid.end();
    }
    // cdf[0] == 0 < y, so i >= 1 here
    let (lo, hi) = (cdf[i - 1], cdf[i]);
    let frac = if hi > lo { ((y - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
    grid.time(i - 1) + frac * grid.dt
}

/// SCDT via the Jordan decomposition `s = s+ - s-`.
pub fn scdt(s: &Signal, cfg: &TransformConfig) -> Result<TransportFeature> {
    cfg.validate()?;
    let threshold = cfg.threshold(s);
    let grid = s.grid();
    let pos: Vec<f64> = s.samples().iter().map(|&v| v.max(0.0)).collect();
    let neg: Vec<f64> = s.samples().iter().map(|&v| (-v).max(0.0)).collect();
    let zero = || (vec![0.0; cfg.quantiles], 0.0);
    let (pos_quantiles, pos_mass) =
        part_transform(&pos, grid, cfg.quantiles, threshold).unwrap_or_else(zero);
    let (neg_quantiles, neg_mass) =
        part_transform(&neg, grid, cfg.quantiles, threshold).unwrap_or_else(zero);
    Ok(TransportFeature {
        pos_quantiles,
        pos_mass,
        neg_quantiles,
        neg_mass,
    })
}

/// Reconstructs a signal on `grid` from its SCDT.
///
/// Each part's quantile array is inverted to a CDF by monotone linear
/// interpolation (left-continuous where the quantile function is flat), then
/// differenced over the cells `[t_i - dt/2, t_i + dt/2]` and scaled by the
/// part's mass.
///
/// A quantile step much longer than both of its neighbors is read as a gap
/// in the support (the other part's lobe). Its mass is then split evenly
/// between the two lobe edges, each half spread over one neighboring step,
/// instead of being smeared across the gap.
pub fn inverse_scdt(f: &TransportFeature, grid: Grid, cfg: &TransformConfig) -> Result<Signal> {
    cfg.validate()?;
    if f.quantile_count() != cfg.quantiles {
        return Err(Error::Dimension {
            expected: cfg.quantiles,
            actual: f.quantile_count(),
        });
    }
    f.validate()?;
    let y = cfg.reference_grid();
    let mut out = vec![0.0; grid.len];
    for (q, mass, sign) in [
        (&f.pos_quantiles, f.pos_mass, 1.0),
        (&f.neg_quantiles, f.neg_mass, -1.0),
    ] {
        if mass <= 0.0 {
            continue;
        }
        let (kt, ky) = cdf_knots(q, &y);
        let half = 0.5 * grid.dt;
        let mut prev = knot_cdf(&kt, &ky, grid.t0 - half);
        for (i, v) in out.iter_mut().enumerate() {
            let next = knot_cdf(&kt, &ky, grid.time(i) + half);
            *v += sign * mass * (next - prev) / grid.dt;
            prev = next;
        }
    }
    Signal::on_grid(out, grid)
}

/// A step this many times longer than each neighboring step is a gap.
const GAP_RATIO: f64 = 4.0;

/// Knots `(t, y)` of the piecewise linear CDF behind quantiles `q` at levels `y`.
fn cdf_knots(q: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = q.len();
    let mut kt = Vec::with_capacity(m + 8);
    let mut ky = Vec::with_capacity(m + 8);
    for j in 0..m {
        kt.push(q[j]);
        ky.push(y[j]);
        if j + 1 == m {
            break;
        }
        let step = q[j + 1] - q[j];
        let left = if j > 0 { q[j] - q[j - 1] } else { 0.0 };
        let right = if j + 2 < m { q[j + 2] - q[j + 1] } else { 0.0 };
        if left <= 0.0 || right <= 0.0 || step <= GAP_RATIO * left.max(right) {
            continue;
        }
        let mid = 0.5 * (y[j] + y[j + 1]);
        kt.push(q[j] + left);
        ky.push(mid);
        kt.push(q[j + 1] - right);
        ky.push(mid);
    }
    (kt, ky)
}

/// `sup { y : t_k(y) < t }` for nondecreasing knots.
fn knot_cdf(kt: &[f64], ky: &[f64], t: f64) -> f64 {
    let i = kt.partition_point(|&v| v < t);
    if i == 0 {
        return 0.0;
    }
    if i == kt.len() {
        return 1.0;
    }
    let (lo, hi) = (kt[i - 1], kt[i]);
    ky[i - 1] + (t - lo) / (hi - lo) * (ky[i] - ky[i - 1])
}

/// Tabulated warp `g` and its derivative on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpSamples {
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

/// An increasing time deformation `g`.
pub trait Warp {
    fn tabulate(&self, grid: &Grid) -> WarpSamples;
}

/// `g(t) = scale * t + shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineWarp {
    pub scale: f64,
    pub shift: f64,
}

impl AffineWarp {
    pub const IDENTITY: AffineWarp = AffineWarp {
        scale: 1.0,
        shift: 0.0,
    };

    /// `g(t) = t - mu`, which moves the signal right by `mu`.
    pub fn translation(mu: f64) -> Self {
        AffineWarp {
            scale: 1.0,
            shift: -mu,
        }
    }

    /// `g(t) = alpha * t`.
    pub fn dilation(alpha: f64) -> Self {
        AffineWarp {
            scale: alpha,
            shift: 0.0,
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

impl Warp for AffineWarp {
    fn tabulate(&self, grid: &Grid) -> WarpSamples {
        WarpSamples {
            values: grid.times().map(|t| self.scale * t + self.shift).collect(),
            derivatives: vec![self.scale; grid.len],
        }
    }
}

/// `g'(t) * s(g(t))` on the grid of `s`, with `s` linearly interpolated and
/// zero outside its domain.
pub fn apply_warp(s: &Signal, g: &impl Warp) -> Result<Signal> {
    let grid = s.grid();
    let table = g.tabulate(&grid);
    if let Some(i) = table.derivatives.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonIncreasingWarp {
            t: grid.time(i),
            derivative: table.derivatives[i],
        });
    }
    let samples = table
        .values
        .iter()
        .zip(&table.derivatives)
        .map(|(&x, &d)| d * s.interpolate(x))
        .collect();
    Signal::on_grid(samples, grid)
}

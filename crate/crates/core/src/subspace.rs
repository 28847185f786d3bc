//! Orthonormal bases in transform space, projection residuals and the
//! analytic enrichment vectors for translation and general warps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::quantile_count_of;

/// Singular values below this fraction of the largest are always dropped.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-10;

/// Largest supported harmonic order.
pub const MAX_HARMONIC_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentConfig {
    /// Add the constant vector on the quantile coordinates.
    pub use_translation: bool,
    /// `N`: add `zeta_n(v)` for `n` in `-N..=-1, 1..=N`. Zero disables.
    #[serde(rename = "N")]
    pub harmonic_order: usize,
}

impl EnrichmentConfig {
    pub const NONE: EnrichmentConfig = EnrichmentConfig {
        use_translation: false,
        harmonic_order: 0,
    };

    pub fn new(use_translation: bool, harmonic_order: usize) -> Result<Self> {
        let cfg = EnrichmentConfig {
            use_translation,
            harmonic_order,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.harmonic_order > MAX_HARMONIC_ORDER {
            return Err(Error::Config(format!(
                "harmonic order {} exceeds {MAX_HARMONIC_ORDER}",
                self.harmonic_order
            )));
        }
        Ok(())
    }

    /// Harmonic indices `-N..=-1, 1..=N`.
    pub fn orders(&self) -> impl Iterator<Item = i32> {
        let n = self.harmonic_order as i32;
        (-n..=n).filter(|&k| k != 0)
    }

    /// Number of vectors added for `members` member vectors.
    pub fn extra_count(&self, members: usize) -> usize {
        usize::from(self.use_translation) + 2 * self.harmonic_order * members
    }
}

/// `x - sin(n pi x) / (|n| pi)` on the quantile coordinates; the two mass
/// coordinates pass through.
pub fn zeta(n: i32, v: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidOrder);
    }
    let q = quantile_count_of(v.len())?;
    let scale = (n.unsigned_abs() as f64) * PI;
    let freq = n as f64 * PI;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if is_mass_coordinate(i, q) {
                x
            } else {
                x - (freq * x).sin() / scale
            }
        })
        .collect())
}

#[inline]
fn is_mass_coordinate(i: usize, q: usize) -> bool {
    i == q || i == 2 * q + 1
}

/// Ones on the quantile coordinates, zeros on the masses.
pub fn translation_vector(dim: usize) -> Result<Vec<f64>> {
    let q = quantile_count_of(dim)?;
    Ok((0..dim)
        .map(|i| if is_mass_coordinate(i, q) { 0.0 } else { 1.0 })
        .collect())
}

/// The translation vector (if enabled) followed by `zeta_n(m)` for each member
/// `m` and each `n` in `-N..=-1, 1..=N`.
pub fn enrichment_vectors(members: &[Vec<f64>], cfg: &EnrichmentConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let dim = members
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Config("enrichment needs at least one member".into()))?;
    if let Some(m) = members.iter().find(|m| m.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: m.len(),
        });
    }
    let mut out = Vec::with_capacity(cfg.extra_count(members.len()));
    if cfg.use_translation {
        out.push(translation_vector(dim)?);
    }
    for m in members {
        for n in cfg.orders() {
            out.push(zeta(n, m)?);
        }
    }
    Ok(out)
}

/// Members followed by their enrichment vectors.
pub fn enriched_span(members: &[Vec<f64>], cfg: &EnrichmentConfig) -> Result<Vec<Vec<f64>>> {
    let mut all = members.to_vec();
    all.extend(enrichment_vectors(members, cfg)?);
    Ok(all)
}

/// Orthonormal basis (columns) of a subspace of transform space.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSubspaceBasis {
    basis: DMatrix<f64>,
    source_count: usize,
    variance_captured: f64,
}

impl LocalSubspaceBasis {
    /// The zero subspace. Only produced for degenerate inputs.
    pub fn zero(dim: usize, source_count: usize) -> Self {
        LocalSubspaceBasis {
            basis: DMatrix::zeros(dim, 0),
            source_count,
            variance_captured: 0.0,
        }
    }

    /// Wraps `basis` after checking its columns are orthonormal to `1e-8`.
    pub fn from_matrix(basis: DMatrix<f64>, source_count: usize, variance_captured: f64) -> Result<Self> {
        let b = LocalSubspaceBasis {
            basis,
            source_count,
            variance_captured,
        };
        let err = b.orthonormality_error();
        if !(err <= 1e-8) {
            return Err(Error::Integrity(format!(
                "basis columns not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(b)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn variance_captured(&self) -> f64 {
        self.variance_captured
    }

    /// `max |B^T B - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.basis.transpose() * &self.basis;
        let r = gram.nrows();
        (gram - DMatrix::<f64>::identity(r, r)).amax()
    }

    /// `B B^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `B B^T x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let x = DVector::from_column_slice(x);
        let coeffs = self.basis.tr_mul(&x);
        Ok((&self.basis * coeffs).iter().copied().collect())
    }

    /// Squared distance `||x - B B^T x||^2`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let xv = DVector::from_column_slice(x);
        let coeffs = self.basis.tr_mul(&xv);
        let projected = &self.basis * coeffs;
        Ok((xv - projected).norm_squared())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Free-function form of [`LocalSubspaceBasis::residual`].
pub fn residual(x: &[f64], basis: &LocalSubspaceBasis) -> Result<f64> {
    basis.residual(x)
}

/// Left singular vectors of the stacked `vectors`, truncated to the fewest
/// that capture `variance_cutoff` of the total squared singular mass.
pub fn orthonormalize(vectors: &[Vec<f64>], variance_cutoff: f64) -> Result<LocalSubspaceBasis> {
    if !(variance_cutoff > 0.0 && variance_cutoff <= 1.0) {
        return Err(Error::Config(format!(
            "variance cutoff {variance_cutoff} not in (0, 1]"
        )));
    }
    let dim = vectors.first().map(Vec::len).ok_or(Error::DegenerateSpan)?;
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: v.len(),
        });
    }
    let count = vectors.len();
    let stacked = DMatrix::from_fn(dim, count, |i, j| vectors[j][i]);
    if stacked.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSpan);
    }

    // Tall inputs go through a thin QR first so the SVD runs on a small square factor.
    let (right, singular) = if dim > count {
        let svd = stacked.clone().qr().r().svd(false, true);
        (svd.v_t.expect("right singular vectors requested"), svd.singular_values)
    } else {
        let svd = stacked.clone().svd(false, true);
        (svd.v_t.expect("right singular vectors requested"), svd.singular_values)
    };

    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));
    let sigma: Vec<f64> = order.iter().map(|&i| singular[i]).collect();
    let sigma_max = sigma[0];
    if !(sigma_max > 0.0) {
        return Err(Error::DegenerateSpan);
    }

    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let target = variance_cutoff * total;
    let mut captured = 0.0;
    let mut keep = sigma.len();
    for (i, s) in sigma.iter().enumerate() {
        captured += s * s;
        if captured >= target {
            keep = i + 1;
            break;
        }
    }
    let above_floor = sigma.iter().take_while(|&&s| s >= SINGULAR_VALUE_FLOOR * sigma_max).count();
    let keep = keep.min(above_floor).max(1);
    let kept: f64 = sigma[..keep].iter().map(|s| s * s).sum();

    // Left vectors are rebuilt as A v so they lie in the column space even
    // when the small SVD returns inaccurate left vectors for nearly singular
    // factors; two Gram-Schmidt passes then restore orthonormality.
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(keep);
    for &i in &order[..keep] {
        let mut u = &stacked * right.row(i).transpose();
        for _ in 0..2 {
            for c in &columns {
                let along = c.dot(&u);
                u.axpy(-along, c, 1.0);
            }
        }
        let norm = u.norm();
        if !(norm > 0.0) {
            break;
        }
        columns.push(u / norm);
    }
    if columns.is_empty() {
        return Err(Error::DegenerateSpan);
    }
    let basis = DMatrix::from_columns(&columns);
    Ok(LocalSubspaceBasis {
        basis,
        source_count: count,
        variance_captured: (kept / total).min(1.0),
    })
}

/// Basis of `members` plus their enrichment vectors.
///
/// The variance cutoff applies to the members only. Enrichment vectors are
/// projected off the member basis and their remainder is kept whole, down to
/// the singular value floor, so the enriched span always contains the
/// truncated member span and the analytic deformation directions.
pub fn enriched_basis(
    members: &[Vec<f64>],
    cfg: &EnrichmentConfig,
    variance_cutoff: f64,
) -> Result<LocalSubspaceBasis> {
    let extra = enrichment_vectors(members, cfg)?;
    let dim = members[0].len();
    let base = match orthonormalize(members, variance_cutoff) {
        Ok(b) => b,
        Err(Error::DegenerateSpan) => LocalSubspaceBasis::zero(dim, members.len()),
        Err(e) => return Err(e),
    };
    let source_count = members.len() + extra.len();
    if extra.is_empty() {
        return Ok(LocalSubspaceBasis { source_count, ..base });
    }
    let scale = extra
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let e = DMatrix::from_fn(dim, extra.len(), |i, j| extra[j][i]);
    let b = &base.basis;
    // Two passes of projection keep the complement orthogonal to working precision.
    let mut rest = &e - b * b.tr_mul(&e);
    rest -= b * b.tr_mul(&rest);
    let rest_vectors: Vec<Vec<f64>> = rest.column_iter().map(|c| c.iter().copied().collect()).collect();
    let complement = match orthonormalize(&rest_vectors, 1.0) {
        Ok(c) => c,
        Err(Error::DegenerateSpan) => return Ok(LocalSubspaceBasis { source_count, ..base }),
        Err(e) => return Err(e),
    };
    let sigma_floor = SINGULAR_VALUE_FLOOR * scale.max(1.0e-300);
    let c = complement.basis;
    let strengths = c.tr_mul(&rest);
    let kept: Vec<usize> = (0..c.ncols())
        .filter(|&j| strengths.row(j).norm() >= sigma_floor)
        .collect();
    let mut columns: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
    columns.extend(kept.iter().map(|&j| c.column(j).into_owned()));
    let basis = if columns.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok(LocalSubspaceBasis {
        basis,
        source_count,
        variance_captured: base.variance_captured,
    })
}

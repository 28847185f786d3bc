//! JSON model files.
//!
//! ```json
//! {"format_version": 1,
//!  "transform": {"Q": 256, "mass_epsilon": null},
//!  "grid": {"t0": 0.0, "dt": 0.0039, "len": 256},
//!  "enrichment": {"use_translation": true, "N": 2},
//!  "k": 4, "variance_cutoff": 0.99,
//!  "classes": [{"label": 1, "features": [[...]],
//!               "bases": [{"cols": 3, "data": [...]}]}]}
//! ```
//!
//! Basis data is row-major with `2Q + 2` rows. Floats are written in the
//! shortest form that parses back to the identical `f64`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nls::{ClassModel, TrainedModel};
use crate::signal::Grid;
use crate::subspace::{EnrichmentConfig, LocalSubspaceBasis};
use crate::transform::TransformConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    transform: TransformSection,
    grid: Grid,
    enrichment: EnrichmentConfig,
    k: usize,
    variance_cutoff: f64,
    classes: Vec<ClassSection>,
}

#[derive(Serialize, Deserialize)]
struct TransformSection {
    #[serde(rename = "Q")]
    quantiles: usize,
    mass_epsilon: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ClassSection {
    label: f64,
    features: Vec<Vec<f64>>,
    bases: Vec<BasisSection>,
}

#[derive(Serialize, Deserialize)]
struct BasisSection {
    cols: usize,
    data: Vec<f64>,
    #[serde(default)]
    source_count: usize,
    #[serde(default)]
    variance_captured: f64,
}

impl BasisSection {
    fn from_basis(b: &LocalSubspaceBasis) -> Self {
        let m = b.matrix();
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        BasisSection {
            cols: m.ncols(),
            data,
            source_count: b.source_count(),
            variance_captured: b.variance_captured(),
        }
    }

    fn into_basis(self, rows: usize) -> Result<LocalSubspaceBasis> {
        if self.data.len() != rows * self.cols {
            return Err(Error::Integrity(format!(
                "basis holds {} values, expected {rows} x {}",
                self.data.len(),
                self.cols
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("basis has non-finite entries".into()));
        }
        let matrix = DMatrix::from_row_slice(rows, self.cols, &self.data);
        LocalSubspaceBasis::from_matrix(matrix, self.source_count, self.variance_captured)
    }
}

pub fn to_json(model: &TrainedModel) -> Result<String> {
    if model.class_count() == 0 {
        return Err(Error::Config("refusing to save a model without classes".into()));
    }
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        transform: TransformSection {
            quantiles: model.transform().quantiles,
            mass_epsilon: model.transform().mass_epsilon,
        },
        grid: model.grid(),
        enrichment: *model.enrichment(),
        k: model.k(),
        variance_cutoff: model.variance_cutoff(),
        classes: model
            .classes()
            .iter()
            .map(|c| ClassSection {
                label: c.label,
                features: c.features.clone(),
                bases: c.bases.iter().map(BasisSection::from_basis).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Integrity(format!("unreadable model document: {e}")))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::ModelFormat(format!("format_version {v}, expected {FORMAT_VERSION}"))),
        None => return Err(Error::ModelFormat("missing format_version".into())),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Integrity(format!("malformed model: {e}")))?;

    let transform = TransformConfig {
        quantiles: file.transform.quantiles,
        mass_epsilon: file.transform.mass_epsilon,
    };
    transform.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    let grid = Grid::new(file.grid.t0, file.grid.dt, file.grid.len).map_err(|e| Error::Integrity(e.to_string()))?;
    let rows = transform.feature_dim();
    if file.classes.is_empty() {
        return Err(Error::Integrity("model has no classes".into()));
    }
    let classes = file
        .classes
        .into_iter()
        .map(|c| {
            if c.features.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Integrity("features have non-finite entries".into()));
            }
            let bases = c
                .bases
                .into_iter()
                .map(|b| b.into_basis(rows))
                .collect::<Result<Vec<_>>>()?;
            Ok(ClassModel {
                label: c.label,
                features: c.features,
                bases,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrainedModel::from_parts(transform, file.enrichment, file.k, file.variance_cutoff, grid, classes).map_err(
        |e| match e {
            Error::Integrity(_) => e,
            other => Error::Integrity(other.to_string()),
        },
    )
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_json(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nls::train;
    use crate::signal::{LabeledDataset, Signal};

    fn model() -> TrainedModel {
        let g = Grid::unit(32).unwrap();
        let a = Signal::from_fn(g, |t| (-(t - 0.4f64).powi(2) / 0.01).exp()).unwrap();
        let b = Signal::from_fn(g, |t| (6.0 * t).sin()).unwrap();
        let ds = LabeledDataset::new(vec![a, b], vec![0, 1], vec![3.0, 7.5]).unwrap();
        train(&ds, &TransformConfig::new(16).unwrap(), &EnrichmentConfig::new(true, 1).unwrap(), 1, 0.99).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model();
        let back = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_document_is_integrity_error() {
        let text = to_json(&model()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(from_json(cut), Err(Error::Integrity(_))));
    }

    #[test]
    fn version_mismatch_is_format_error() {
        let text = to_json(&model()).unwrap().replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(from_json(&text), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn corrupted_basis_detected() {
        let mut value: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        let data = value["classes"][0]["bases"][0]["data"].as_array_mut().unwrap();
        data.pop();
        assert!(matches!(from_json(&value.to_string()), Err(Error::Integrity(_))));

        let mut value: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        value["classes"][0]["bases"][0]["data"][0] = serde_json::json!(5.0);
        assert!(matches!(from_json(&value.to_string()), Err(Error::Integrity(_))));
    }

    #[test]
    fn empty_model_refused() {
        let m = model();
        let empty = TrainedModel::from_parts(*m.transform(), *m.enrichment(), 1, 0.99, m.grid(), Vec::new()).unwrap();
        assert!(matches!(to_json(&empty), Err(Error::Config(_))));
    }
}

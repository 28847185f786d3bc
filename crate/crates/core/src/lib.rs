//! Signed cumulative distribution transform (SCDT) features and the nearest
//! local subspace (NLS) classifier for 1D signals, with a synthetic warp
//! generator, a 1NN-DTW baseline and benchmark metrics.

pub mod bench;
pub mod cli;
mod error;
pub mod model;
pub mod nls;
pub mod signal;
pub mod subspace;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use model::{load_model, save_model};
pub use nls::{train, tune, tune_and_train, Prediction, TrainedModel, TuneOptions, TuneResult};
pub use signal::{Grid, LabeledDataset, Signal};
pub use subspace::{EnrichmentConfig, LocalSubspaceBasis};
pub use transform::{cdt, inverse_scdt, scdt, TransformConfig, TransportFeature};

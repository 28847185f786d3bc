//! C interface to the SCDT transform, the NLS classifier and DTW.
//!
//! Every function returns an [`ScdtStatus`]. On failure a message describing
//! the error is kept per thread and can be read with
//! [`scdt_last_error_message`]. Models are opaque handles created by
//! [`scdt_model_train`] or [`scdt_model_load`] and released with
//! [`scdt_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use scdt_nls::bench::dtw::dtw_slices;
use scdt_nls::bench::DtwConfig;
use scdt_nls::{
    load_model, save_model, scdt, train, EnrichmentConfig, Error, Grid, LabeledDataset, Signal, TrainedModel,
    TransformConfig,
};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScdtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSignal = 3,
    DimensionMismatch = 4,
    BufferTooSmall = 5,
    Io = 6,
    ModelFormat = 7,
    Integrity = 8,
    Panic = 9,
}

/// Trained NLS classifier.
pub struct ScdtModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(ScdtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidSignal(_) | Error::NegativeInput(_) | Error::ZeroMass { .. } | Error::Parse { .. } => {
                ScdtStatus::InvalidSignal
            }
            Error::Dimension { .. } => ScdtStatus::DimensionMismatch,
            Error::Io { .. } => ScdtStatus::Io,
            Error::ModelFormat(_) => ScdtStatus::ModelFormat,
            Error::Integrity(_) | Error::Json(_) => ScdtStatus::Integrity,
            _ => ScdtStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: ScdtStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Runs `body`, converting errors and panics into a status and a stored message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ScdtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            ScdtStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            ScdtStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return fail(ScdtStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return fail(ScdtStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn model_ref<'a>(model: *const ScdtModel) -> Result<&'a TrainedModel, Failure> {
    if model.is_null() {
        return fail(ScdtStatus::NullPointer, "model is null");
    }
    Ok(&(*model).inner)
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return fail(ScdtStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(ScdtStatus::InvalidArgument, "path is not valid UTF-8"),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return fail(ScdtStatus::NullPointer, format!("{what} is null"));
    }
    *out = value;
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// successful call. The pointer stays valid until the next call into this
/// library from the same thread.
#[no_mangle]
pub extern "C" fn scdt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn scdt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the flattened SCDT feature `[pos quantiles, pos mass, neg quantiles,
/// neg mass]` of `samples` (taken on `t0 + i * dt`) into `out`, which must
/// hold `2 * quantiles + 2` values.
///
/// # Safety
/// `samples` must point to `length` readable values and `out` to `out_len`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn scdt_transform(
    samples: *const f64,
    length: usize,
    t0: f64,
    dt: f64,
    quantiles: usize,
    out: *mut f64,
    out_len: usize,
) -> ScdtStatus {
    guard(|| {
        let samples = slice(samples, length, "samples")?;
        let cfg = TransformConfig::new(quantiles)?;
        if out_len < cfg.feature_dim() {
            return fail(
                ScdtStatus::BufferTooSmall,
                format!("output holds {out_len} values, need {}", cfg.feature_dim()),
            );
        }
        let out = slice_mut(out, out_len, "out")?;
        let signal = Signal::new(samples.to_vec(), t0, dt)?;
        let feature = scdt(&signal, &cfg)?.flatten();
        out[..feature.len()].copy_from_slice(&feature);
        Ok(())
    })
}

/// Band-constrained DTW distance between two series of equal length.
///
/// # Safety
/// `a` and `b` must each point to `length` readable values.
#[no_mangle]
pub unsafe extern "C" fn scdt_dtw_distance(
    a: *const f64,
    b: *const f64,
    length: usize,
    window: usize,
    out_distance: *mut f64,
) -> ScdtStatus {
    guard(|| {
        let a = slice(a, length, "a")?;
        let b = slice(b, length, "b")?;
        let d = dtw_slices(a, b, &DtwConfig { window })?;
        write_out(out_distance, d, "out_distance")
    })
}

/// Trains an NLS model on `n_series` series of `length` samples stored
/// row-major in `data`, on the unit interval. `labels` holds one label per
/// series; classes are the distinct labels in ascending order.
///
/// `quantiles` of 0 uses `length`. On success `*out_model` receives a handle
/// to free with [`scdt_model_free`].
///
/// # Safety
/// `data` must point to `n_series * length` values, `labels` to `n_series`
/// values and `out_model` to writable storage for one pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn scdt_model_train(
    data: *const f64,
    n_series: usize,
    length: usize,
    labels: *const f64,
    quantiles: usize,
    k: usize,
    harmonic_order: usize,
    use_translation: bool,
    variance_cutoff: f64,
    out_model: *mut *mut ScdtModel,
) -> ScdtStatus {
    guard(|| {
        if out_model.is_null() {
            return fail(ScdtStatus::NullPointer, "out_model is null");
        }
        let Some(total) = n_series.checked_mul(length) else {
            return fail(ScdtStatus::InvalidArgument, "n_series * length overflows");
        };
        let data = slice(data, total, "data")?;
        let raw_labels = slice(labels, n_series, "labels")?;
        if raw_labels.iter().any(|l| !l.is_finite()) {
            return fail(ScdtStatus::InvalidArgument, "labels must be finite");
        }
        let mut classes = raw_labels.to_vec();
        classes.sort_by(f64::total_cmp);
        classes.dedup();
        let indices = raw_labels
            .iter()
            .map(|l| classes.iter().position(|c| c == l).expect("label present"))
            .collect();
        let grid = Grid::unit(length)?;
        let signals = data
            .chunks(length.max(1))
            .take(n_series)
            .map(|row| Signal::on_grid(row.to_vec(), grid))
            .collect::<scdt_nls::Result<Vec<_>>>()?;
        let ds = LabeledDataset::new(signals, indices, classes)?;
        let cfg = TransformConfig::new(if quantiles == 0 { length } else { quantiles })?;
        let enrichment = EnrichmentConfig::new(use_translation, harmonic_order)?;
        let model = train(&ds, &cfg, &enrichment, k, variance_cutoff)?;
        *out_model = Box::into_raw(Box::new(ScdtModel { inner: model }));
        Ok(())
    })
}

/// Loads a model saved by [`scdt_model_save`] or the command line tool.
///
/// # Safety
/// `path` must be a nul-terminated string and `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_load(path: *const c_char, out_model: *mut *mut ScdtModel) -> ScdtStatus {
    guard(|| {
        if out_model.is_null() {
            return fail(ScdtStatus::NullPointer, "out_model is null");
        }
        let model = load_model(path_arg(path)?)?;
        *out_model = Box::into_raw(Box::new(ScdtModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_save(model: *const ScdtModel, path: *const c_char) -> ScdtStatus {
    guard(|| {
        let model = model_ref(model)?;
        save_model(model, path_arg(path)?)?;
        Ok(())
    })
}

/// Classifies one series of `length` samples. Writes the predicted label
/// and, when `residuals` is not null, the squared residual of every class
/// (`residuals_len` must be at least the class count).
///
/// # Safety
/// `model` must be a live handle, `samples` must hold `length` values,
/// `out_label` must be writable and `residuals` null or `residuals_len`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_predict(
    model: *const ScdtModel,
    samples: *const f64,
    length: usize,
    out_label: *mut f64,
    residuals: *mut f64,
    residuals_len: usize,
) -> ScdtStatus {
    guard(|| {
        let model = model_ref(model)?;
        let samples = slice(samples, length, "samples")?;
        if out_label.is_null() {
            return fail(ScdtStatus::NullPointer, "out_label is null");
        }
        if !residuals.is_null() && residuals_len < model.class_count() {
            return fail(
                ScdtStatus::BufferTooSmall,
                format!("residual buffer holds {residuals_len}, need {}", model.class_count()),
            );
        }
        let grid = model.grid();
        if length != grid.len {
            return fail(
                ScdtStatus::DimensionMismatch,
                format!("model expects {} samples, got {length}", grid.len),
            );
        }
        let signal = Signal::on_grid(samples.to_vec(), grid)?;
        let prediction = model.predict(&signal)?;
        *out_label = model.class_labels()[prediction.class_index];
        if !residuals.is_null() {
            let out = slice_mut(residuals, residuals_len, "residuals")?;
            out[..prediction.per_class_residuals.len()].copy_from_slice(&prediction.per_class_residuals);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_class_count(model: *const ScdtModel, out_count: *mut usize) -> ScdtStatus {
    guard(|| {
        let model = model_ref(model)?;
        write_out(out_count, model.class_count(), "out_count")
    })
}

/// Copies the class labels, in class index order, into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_class_labels(
    model: *const ScdtModel,
    out: *mut f64,
    out_len: usize,
) -> ScdtStatus {
    guard(|| {
        let model = model_ref(model)?;
        let labels = model.class_labels();
        if out_len < labels.len() {
            return fail(
                ScdtStatus::BufferTooSmall,
                format!("label buffer holds {out_len}, need {}", labels.len()),
            );
        }
        slice_mut(out, out_len, "out")?[..labels.len()].copy_from_slice(&labels);
        Ok(())
    })
}

/// Series length the model was trained on.
///
/// # Safety
/// `model` must be a live handle and `out_length` writable.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_length(model: *const ScdtModel, out_length: *mut usize) -> ScdtStatus {
    guard(|| {
        let model = model_ref(model)?;
        write_out(out_length, model.grid().len, "out_length")
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scdt_model_free(model: *mut ScdtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

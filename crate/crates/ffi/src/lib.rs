//! C ABI over the oss-lifecycle library.
//!
//! Every fallible call returns an [`OlcStatus`]. On failure a message is kept
//! per thread and can be read with [`olc_last_error_message`]. Models are
//! opaque [`OlcModel`] handles released with [`olc_model_free`]; strings
//! returned through `char **` out-parameters are released with
//! [`olc_string_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use oss_lifecycle::evaluate::{classification_report, ConfusionMatrix};
use oss_lifecycle::features::{bus_factor, class_name, compute_features, FeatureOptions, METRIC_NAMES};
use oss_lifecycle::ingest::{load_archive, rfc3339};
use oss_lifecycle::learners::ModelDocument;
use oss_lifecycle::{Error, Matrix};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed input data, archive, model file or argument value.
    DataError = 3,
    /// Input width does not match the model.
    DimensionMismatch = 4,
    /// The model cannot produce the requested output.
    Unsupported = 5,
    /// I/O or other runtime failure.
    RuntimeError = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Loaded classification model.
pub struct OlcModel {
    doc: ModelDocument,
    feature_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> OlcStatus {
    match e.root() {
        Error::DimensionMismatch { .. } => OlcStatus::DimensionMismatch,
        _ if e.is_data_error() => OlcStatus::DataError,
        _ => OlcStatus::RuntimeError,
    }
}

/// Runs `f`, recording any error or panic for the calling thread.
fn guard(f: impl FnOnce() -> Result<(), (OlcStatus, String)>) -> OlcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OlcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside oss-lifecycle");
            OlcStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (OlcStatus, String)>;
}

impl<T> IntoFfi<T> for oss_lifecycle::Result<T> {
    fn ffi(self) -> Result<T, (OlcStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (OlcStatus, String) {
    (OlcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OlcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (OlcStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn out_string(s: String, out: *mut *mut c_char) -> Result<(), (OlcStatus, String)> {
    let c = CString::new(s).map_err(|_| (OlcStatus::RuntimeError, "string contains NUL".to_string()))?;
    // SAFETY: caller checked `out` for null.
    unsafe { *out = c.into_raw() };
    Ok(())
}

unsafe fn matrix_arg(x: *const f64, n_rows: usize, n_cols: usize) -> Result<Matrix, (OlcStatus, String)> {
    let len = n_rows.checked_mul(n_cols).ok_or_else(|| (OlcStatus::DataError, "matrix too large".into()))?;
    if len > 0 && x.is_null() {
        return Err(null("x"));
    }
    let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(x, len).to_vec() };
    Matrix::from_vec(n_rows, n_cols, data).ffi()
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn olc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn olc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn olc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a `model.json` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn olc_model_load(path: *const c_char, out: *mut *mut OlcModel) -> OlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let doc = ModelDocument::load(path).ffi()?;
        *out = Box::into_raw(Box::new(wrap(doc)?));
        Ok(())
    })
}

/// Parses a model document from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn olc_model_from_json(json: *const c_char, out: *mut *mut OlcModel) -> OlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = ModelDocument::from_json(str_arg(json, "json")?).ffi()?;
        *out = Box::into_raw(Box::new(wrap(doc)?));
        Ok(())
    })
}

fn wrap(doc: ModelDocument) -> Result<OlcModel, (OlcStatus, String)> {
    let feature_names = doc
        .selected_features
        .iter()
        .map(|n| CString::new(n.as_str()).map_err(|_| (OlcStatus::DataError, "feature name contains NUL".to_string())))
        .collect::<Result<_, _>>()?;
    Ok(OlcModel { doc, feature_names })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `olc_model_load` or `olc_model_from_json` and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn olc_model_free(model: *mut OlcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of input columns, or 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn olc_model_n_features(model: *const OlcModel) -> usize {
    model.as_ref().map_or(0, |m| m.doc.payload.n_features())
}

/// Number of classes, or 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn olc_model_n_classes(model: *const OlcModel) -> usize {
    model.as_ref().map_or(0, |m| m.doc.payload.classes().len())
}

/// Stage code (0 sandbox, 1 incubating, 2 graduated) of class column `i`,
/// or -1 when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn olc_model_class_code(model: *const OlcModel, i: usize) -> i32 {
    model
        .as_ref()
        .and_then(|m| m.doc.payload.classes().get(i))
        .map_or(-1, |&c| c as i32)
}

/// Name of input column `i`, owned by the model, or null when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn olc_model_feature_name(model: *const OlcModel, i: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.feature_names.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Predicts stage codes for `n_rows` row-major rows of `n_cols` values.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles and `out` room for `n_rows` values.
#[no_mangle]
pub unsafe extern "C" fn olc_model_predict(
    model: *const OlcModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut u32,
) -> OlcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() && n_rows > 0 {
            return Err(null("out"));
        }
        let x = matrix_arg(x, n_rows, n_cols)?;
        let pred = m.doc.payload.predict(&x).ffi()?;
        for (i, c) in pred.into_iter().enumerate() {
            *out.add(i) = c as u32;
        }
        Ok(())
    })
}

/// Class probabilities, row-major with columns in `olc_model_class_code`
/// order. SVM models give `OLC_STATUS_UNSUPPORTED`.
///
/// # Safety
/// `x` must hold `n_rows * n_cols` doubles and `out` room for
/// `n_rows * olc_model_n_classes(model)` doubles.
#[no_mangle]
pub unsafe extern "C" fn olc_model_predict_proba(
    model: *const OlcModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> OlcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() && n_rows > 0 {
            return Err(null("out"));
        }
        let x = matrix_arg(x, n_rows, n_cols)?;
        let p = m
            .doc
            .payload
            .predict_proba(&x)
            .ffi()?
            .ok_or_else(|| (OlcStatus::Unsupported, format!("{} models give no probabilities", m.doc.family)))?;
        let flat = p.as_slice();
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// Number of metrics in a feature vector.
#[no_mangle]
pub extern "C" fn olc_metric_count() -> usize {
    METRIC_NAMES.len()
}

/// Static name of metric `i`, or null when out of range.
#[no_mangle]
pub extern "C" fn olc_metric_name(i: usize) -> *const c_char {
    static NAMES: std::sync::OnceLock<Vec<CString>> = std::sync::OnceLock::new();
    let names = NAMES.get_or_init(|| METRIC_NAMES.iter().map(|n| CString::new(*n).expect("no NUL")).collect());
    names.get(i).map_or(ptr::null(), |c| c.as_ptr())
}

/// Computes the metric vector of an on-disk archive into `out`, which must
/// hold `olc_metric_count()` doubles. `window_end` is an RFC 3339 timestamp
/// or null for the archive's own window; `recency_days` sets the
/// new-contributor window.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be large enough.
#[no_mangle]
pub unsafe extern "C" fn olc_features_from_archive(
    archive: *const c_char,
    window_end: *const c_char,
    recency_days: i64,
    out: *mut f64,
) -> OlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = str_arg(archive, "archive")?;
        let mut log = load_archive(Path::new(dir)).ffi()?;
        if !window_end.is_null() {
            let t = rfc3339::parse(str_arg(window_end, "window_end")?)
                .map_err(|e| (OlcStatus::DataError, format!("window_end: {e}")))?;
            log = log.with_window_end(t);
        }
        let opts = FeatureOptions {
            recency_days,
            ..FeatureOptions::default()
        };
        let fv = compute_features(&log, &opts).ffi()?;
        for (i, (_, v)) in fv.values.iter().enumerate() {
            *out.add(i) = *v;
        }
        Ok(())
    })
}

/// Smallest number of authors whose commits reach `threshold` of the total.
///
/// # Safety
/// `counts` must hold `n` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn olc_bus_factor(counts: *const u64, n: usize, threshold: f64, out: *mut u64) -> OlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if counts.is_null() && n > 0 {
            return Err(null("counts"));
        }
        let slice = if n == 0 { &[][..] } else { std::slice::from_raw_parts(counts, n) };
        let m: HashMap<usize, u64> = slice.iter().copied().enumerate().collect();
        *out = bus_factor(&m, threshold).ffi()?;
        Ok(())
    })
}

/// Classification report as JSON from a `k x k` row-major confusion matrix
/// (rows actual, columns predicted) over stage codes `labels`.
///
/// # Safety
/// `labels` must hold `k` values, `counts` `k * k` values; `out` must be valid.
/// The returned string is released with `olc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn olc_report_json(
    labels: *const u32,
    counts: *const u64,
    k: usize,
    out: *mut *mut c_char,
) -> OlcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if k == 0 {
            return Err((OlcStatus::DataError, "k must be positive".into()));
        }
        if labels.is_null() || counts.is_null() {
            return Err(null("labels or counts"));
        }
        let labels: Vec<usize> = std::slice::from_raw_parts(labels, k).iter().map(|&l| l as usize).collect();
        let flat = std::slice::from_raw_parts(counts, k * k);
        let rows: Vec<Vec<u64>> = flat.chunks(k).map(<[u64]>::to_vec).collect();
        let names: Vec<String> = labels.iter().map(|&l| class_name(l)).collect();
        let m = ConfusionMatrix::from_counts(labels, rows).ffi()?.with_names(names);
        let report = classification_report(&m).ffi()?;
        let json = serde_json::to_string(&report).map_err(|e| (OlcStatus::RuntimeError, e.to_string()))?;
        out_string(json, out)
    })
}

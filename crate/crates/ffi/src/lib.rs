//! C interface to trained neucredit models.
//!
//! Every function returns one of the `NC_*` status codes. On failure the
//! message is kept per thread and can be read with [`nc_last_error_message`].
//! Models are opaque handles released with [`nc_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use neucredit::cli::Checkpoint;
use neucredit::data::{generate_synthetic, parse_dataset, save_dataset, Dataset};
use neucredit::Error;
use serde::Serialize;

pub const NC_OK: i32 = 0;
pub const NC_ERR_NULL: i32 = -1;
pub const NC_ERR_INVALID_ARG: i32 = -2;
pub const NC_ERR_IO: i32 = -3;
pub const NC_ERR_DATA: i32 = -4;
pub const NC_ERR_NUMERIC: i32 = -5;
pub const NC_ERR_BUFFER_TOO_SMALL: i32 = -6;
pub const NC_ERR_INTERNAL: i32 = -255;

/// A trained model loaded from a checkpoint.
pub struct NcModel {
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => NC_ERR_IO,
            Error::Data { .. } | Error::Json(_) => NC_ERR_DATA,
            Error::Domain(_) | Error::Divergence { .. } => NC_ERR_NUMERIC,
            Error::Config(_) | Error::Shape { .. } => NC_ERR_INVALID_ARG,
        };
        Failure(code, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            NC_OK
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            NC_ERR_INTERNAL
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(NC_ERR_NULL, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NC_ERR_INVALID_ARG, format!("{what} is not valid UTF-8")))
}

/// Copy `s` plus a terminating NUL into `buf`. `out_len` receives the size
/// needed, terminator included, whether or not it fit.
unsafe fn copy_out(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> Result<(), Failure> {
    let need = s.len() + 1;
    if !out_len.is_null() {
        *out_len = need;
    }
    if buf.is_null() || cap < need {
        return Err(Failure(
            NC_ERR_BUFFER_TOO_SMALL,
            format!("buffer holds {cap} bytes, {need} needed"),
        ));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf`.
///
/// # Safety
/// `buf` must point to `cap` writable bytes; `out_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn nc_last_error_message(buf: *mut c_char, cap: usize, out_len: *mut usize) -> i32 {
    let msg = LAST_ERROR.with(|e| e.borrow().to_string_lossy().into_owned());
    match copy_out(&msg, buf, cap, out_len) {
        Ok(()) => NC_OK,
        Err(Failure(code, _)) => code,
    }
}

/// Load a checkpoint file into a new model handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nc_model_load(path: *const c_char, out: *mut *mut NcModel) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let path = text(path, "path")?;
        let checkpoint = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(NcModel { checkpoint }));
        Ok(())
    })
}

/// Release a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`nc_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nc_model_free(model: *mut NcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    id: &'a str,
    step: usize,
    y_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    parts: Option<[f64; 3]>,
}

/// Score line-delimited dataset records with a model.
///
/// Writes a JSON array of `{"id", "step", "y_hat", "parts"?}` objects, one
/// per loan, into `buf`. `parts` holds `[y_a, y_w, y_b]` for models with the
/// decomposed head. When `buf` is too small the call fails with
/// `NC_ERR_BUFFER_TOO_SMALL` and `out_len` holds the size needed.
///
/// # Safety
/// `model` must be a live handle, `records` a NUL-terminated string, `buf`
/// `cap` writable bytes and `out_len` null or valid.
#[no_mangle]
pub unsafe extern "C" fn nc_model_score_json(
    model: *const NcModel,
    records: *const c_char,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> i32 {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let records = text(records, "records")?;
        let examples = parse_dataset(records.as_bytes())?.examples();
        let scores = model.checkpoint.predict(&examples)?;
        let rows: Vec<ScoreRow> = scores
            .iter()
            .map(|s| ScoreRow {
                id: &examples[s.example].id,
                step: s.step,
                y_hat: s.y_hat,
                parts: s.parts,
            })
            .collect();
        let json = serde_json::to_string(&rows).map_err(|e| Failure(NC_ERR_INTERNAL, e.to_string()))?;
        copy_out(&json, buf, cap, out_len)
    })
}

/// Generate a synthetic dataset file; `out_fraction` (nullable) receives the
/// share of positive steps.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_fraction` null or valid.
#[no_mangle]
pub unsafe extern "C" fn nc_generate_synthetic(
    n: usize,
    len: usize,
    seed: u64,
    path: *const c_char,
    out_fraction: *mut f64,
) -> i32 {
    guard(|| {
        let path = text(path, "path")?;
        if n == 0 || len == 0 {
            return Err(Failure(NC_ERR_INVALID_ARG, "n and len must be positive".into()));
        }
        let data = Dataset::Synthetic(generate_synthetic(n, len, seed).1);
        save_dataset(path, &data)?;
        if !out_fraction.is_null() {
            *out_fraction = data.positive_fraction();
        }
        Ok(())
    })
}

/// Area under the ROC curve of `n` scores against 0/1 labels.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> i32 {
    guard(|| {
        if scores.is_null() || labels.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = std::slice::from_raw_parts(scores, n);
        let l = std::slice::from_raw_parts(labels, n);
        let pairs: Vec<(f64, bool)> = s.iter().zip(l).map(|(&v, &y)| (v, y != 0)).collect();
        *out = neucredit::eval::auc(&pairs)?;
        Ok(())
    })
}

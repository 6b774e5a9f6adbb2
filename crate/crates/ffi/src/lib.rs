//! C ABI over the sugmine normalizer and trained models.
//!
//! Every fallible function returns a [`SugmineStatus`] code; on failure the
//! message is available from [`sugmine_last_error`] on the same thread.
//! Strings returned through out-pointers are owned by the caller and must be
//! released with [`sugmine_string_free`]. Handles are released with their
//! matching `_free` function; passing NULL to any `_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sugmine::config::RunConfig;
use sugmine::model::{ModelFileError, TrainedModel};
use sugmine::normalize::Normalizer;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SugmineStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Config = 4,
    Model = 5,
    Fingerprint = 6,
    Panic = 7,
}

/// Opaque normalizer handle.
pub struct SugmineNormalizer {
    inner: Normalizer,
}

/// Opaque handle to a loaded model.
pub struct SugmineModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(SugmineStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> c_int {
    clear_error();
    let status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SugmineStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SugmineStatus::Panic
        }
    };
    status as c_int
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure(
            SugmineStatus::NullPointer,
            format!("{name} is NULL"),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            SugmineStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure(SugmineStatus::NullPointer, format!("{name} is NULL")))
}

fn out_arg<T>(p: *mut T, name: &str) -> FfiResult<*mut T> {
    if p.is_null() {
        Err(Failure(
            SugmineStatus::NullPointer,
            format!("{name} is NULL"),
        ))
    } else {
        Ok(p)
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs removed")
        .into_raw()
}

fn model_failure(e: ModelFileError) -> Failure {
    let status = match &e {
        ModelFileError::Io { .. } => SugmineStatus::Io,
        ModelFileError::Fingerprint { .. } => SugmineStatus::Fingerprint,
        _ => SugmineStatus::Model,
    };
    Failure(status, e.to_string())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next sugmine call on the same thread.
#[no_mangle]
pub extern "C" fn sugmine_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sugmine_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Normalizer with the shipped default tables and all rules enabled.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sugmine_normalizer_new_default(out: *mut *mut SugmineNormalizer) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let n = Box::new(SugmineNormalizer {
            inner: Normalizer::shared_default().clone(),
        });
        *out = Box::into_raw(n);
        Ok(())
    })
}

/// Normalizer built from a TOML run configuration file.
///
/// # Safety
/// `config_path` must be NULL or a NUL-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sugmine_normalizer_from_config(
    config_path: *const c_char,
    out: *mut *mut SugmineNormalizer,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(config_path, "config_path")?;
        let cfg = RunConfig::load(Path::new(path))
            .map_err(|e| Failure(SugmineStatus::Config, e.to_string()))?;
        let inner = cfg
            .normalizer()
            .map_err(|e| Failure(SugmineStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(SugmineNormalizer { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be NULL or come from a `sugmine_normalizer_*` constructor
/// and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sugmine_normalizer_free(handle: *mut SugmineNormalizer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Normalizes `text`; the result is written to `*out` and must be released
/// with `sugmine_string_free`.
///
/// # Safety
/// `handle` must be a live normalizer, `text` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sugmine_preprocess(
    handle: *const SugmineNormalizer,
    text: *const c_char,
    out: *mut *mut c_char,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let n = ref_arg(handle, "normalizer")?;
        let text = str_arg(text, "text")?;
        *out = to_c_string(n.inner.preprocess(text));
        Ok(())
    })
}

/// Hex fingerprint of the normalizer configuration.
///
/// # Safety
/// As for [`sugmine_preprocess`].
#[no_mangle]
pub unsafe extern "C" fn sugmine_normalizer_fingerprint(
    handle: *const SugmineNormalizer,
    out: *mut *mut c_char,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let n = ref_arg(handle, "normalizer")?;
        *out = to_c_string(n.inner.fingerprint().to_string());
        Ok(())
    })
}

/// Loads a model file and its companion feature file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sugmine_model_load(
    path: *const c_char,
    out: *mut *mut SugmineModel,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = TrainedModel::load(Path::new(path)).map_err(model_failure)?;
        *out = Box::into_raw(Box::new(SugmineModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be NULL or come from `sugmine_model_load` and not have been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sugmine_model_free(handle: *mut SugmineModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Model kind name: "nb", "logreg", "svm" or "lstm".
///
/// # Safety
/// `handle` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sugmine_model_kind(
    handle: *const SugmineModel,
    out: *mut *mut c_char,
) -> c_int {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = ref_arg(handle, "model")?;
        *out = to_c_string(m.inner.kind().name().to_string());
        Ok(())
    })
}

/// Classifies raw `text`. Writes 1 (suggestion) or 0 to `*label` and the
/// decision value to `*score` when `score` is not NULL. The normalizer must
/// be the one the model was trained with, else `SUGMINE_STATUS_FINGERPRINT`.
///
/// # Safety
/// `model` and `normalizer` must be live handles, `text` a NUL-terminated
/// string, `label` writable and `score` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sugmine_model_predict(
    model: *const SugmineModel,
    normalizer: *const SugmineNormalizer,
    text: *const c_char,
    label: *mut c_int,
    score: *mut f64,
) -> c_int {
    guard(|| {
        let label = out_arg(label, "label")?;
        let m = ref_arg(model, "model")?;
        let n = ref_arg(normalizer, "normalizer")?;
        let text = str_arg(text, "text")?;
        let p = m
            .inner
            .predict_text(&n.inner, text)
            .map_err(model_failure)?;
        *label = c_int::from(p.label.is_positive());
        if !score.is_null() {
            *score = p.score.unwrap_or(0.0);
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sugmine_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

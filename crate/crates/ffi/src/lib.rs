//! C ABI for `structprior`.
//!
//! Objects cross the boundary as opaque handles created by `sp_*_new` /
//! `sp_*_load` and released with the matching `sp_*_free`. Every fallible
//! call returns an [`SpStatus`]; on failure, `sp_last_error_message` returns
//! a description that stays valid until the next failing call on the same
//! thread. Results are written through out-pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use structprior::distance::{statistics_distance, wasserstein1, Metric};
use structprior::distributions::{
    binomial_pmf, make_posterior, make_support, std_normal_cdf, CategoricalDistribution, PosteriorKind,
    PosteriorSpec, SupportKind,
};
use structprior::env::{EnvConfig, ReasoningTreeEnv, State};
use structprior::verifier::ModelFile;
use structprior::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    InvalidArgument = 1,
    ParseError = 2,
    IntegrityError = 3,
    IoError = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpPosterior {
    OneHot = 0,
    GaussDynamic = 1,
    GaussStatic = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpMetric {
    Wasserstein = 0,
    Kl = 1,
}

/// Opaque environment handle.
pub struct SpEnv {
    inner: ReasoningTreeEnv,
}

/// Opaque handle to a trained model file.
pub struct SpModel {
    inner: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(err: &Error) -> SpStatus {
    match err {
        Error::InvalidArgument(_) => SpStatus::InvalidArgument,
        Error::Parse { .. } => SpStatus::ParseError,
        Error::Integrity(_) => SpStatus::IntegrityError,
        Error::Io(_) => SpStatus::IoError,
    }
}

struct Failure(SpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside structprior");
            SpStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn state_from(problem: u64, path: *const u32, len: usize) -> Result<State, Failure> {
    let actions = if len == 0 {
        &[][..]
    } else {
        if path.is_null() {
            return Err(null("path"));
        }
        std::slice::from_raw_parts(path, len)
    };
    Ok(State { problem, path: actions.iter().map(|&a| a as usize).collect() })
}

unsafe fn write_probs(dist: &CategoricalDistribution, out: *mut f64, len: usize) -> Result<(), Failure> {
    let probs = dist.probs();
    if out.is_null() {
        return Err(null("out"));
    }
    if len < probs.len() {
        return Err(Failure(SpStatus::BufferTooSmall, format!("need {} entries, got {len}", probs.len())));
    }
    std::ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
    Ok(())
}

fn posterior_spec(kind: SpPosterior, static_sigma: f64) -> Result<PosteriorSpec, Failure> {
    Ok(match kind {
        SpPosterior::OneHot => PosteriorSpec::ONE_HOT,
        SpPosterior::GaussDynamic => PosteriorSpec::GAUSS_DYNAMIC,
        SpPosterior::GaussStatic if static_sigma > 0.0 => PosteriorSpec::gauss_static(static_sigma)?,
        SpPosterior::GaussStatic => PosteriorSpec { kind: PosteriorKind::GaussStatic, static_sigma: None },
    })
}

/// Message describing the most recent failure on this thread. Never null.
#[no_mangle]
pub extern "C" fn sp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates an environment. Free it with [`sp_env_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sp_env_new(
    branching: u32,
    depth: u32,
    seed: u64,
    policy_beta: f64,
    threshold: f64,
    out: *mut *mut SpEnv,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = EnvConfig { branching: branching as usize, depth: depth as usize, seed, policy_beta, threshold };
        *out = Box::into_raw(Box::new(SpEnv { inner: ReasoningTreeEnv::new(config)? }));
        Ok(())
    })
}

/// Creates an environment from its JSON config text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` as in [`sp_env_new`].
#[no_mangle]
pub unsafe extern "C" fn sp_env_from_json(json: *const c_char, out: *mut *mut SpEnv) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure(SpStatus::ParseError, e.to_string()))?;
        let config: EnvConfig =
            serde_json::from_str(text).map_err(|e| Failure(SpStatus::ParseError, format!("env config: {e}")))?;
        *out = Box::into_raw(Box::new(SpEnv { inner: ReasoningTreeEnv::new(config)? }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from `sp_env_new`/`sp_env_from_json` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sp_env_free(env: *mut SpEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Writes the 64-character hex config hash plus a terminating NUL.
///
/// # Safety
/// `env` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn sp_env_hash(env: *const SpEnv, buf: *mut c_char, cap: usize) -> SpStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let hash = env.inner.config().hash();
        if cap < hash.len() + 1 {
            return Err(Failure(SpStatus::BufferTooSmall, format!("need {} bytes", hash.len() + 1)));
        }
        std::ptr::copy_nonoverlapping(hash.as_ptr() as *const c_char, buf, hash.len());
        *buf.add(hash.len()) = 0;
        Ok(())
    })
}

/// Exact value of the state `(problem, path[0..len])`.
///
/// # Safety
/// `env` must be a live handle, `path` must point to `len` actions (may be
/// null when `len == 0`) and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_env_true_value(
    env: *const SpEnv,
    problem: u64,
    path: *const u32,
    len: usize,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out_ref(out, "out")?;
        *out = env.inner.true_value(&state_from(problem, path, len)?)?;
        Ok(())
    })
}

/// Outcome of a terminal state: writes 1 for correct, 0 otherwise.
///
/// # Safety
/// As for [`sp_env_true_value`].
#[no_mangle]
pub unsafe extern "C" fn sp_env_leaf_correct(
    env: *const SpEnv,
    problem: u64,
    path: *const u32,
    len: usize,
    out: *mut i32,
) -> SpStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out_ref(out, "out")?;
        *out = i32::from(env.inner.leaf_correct(&state_from(problem, path, len)?)?);
        Ok(())
    })
}

/// Loads a model file written by `structprior train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_model_load(path: *const c_char, out: *mut *mut SpModel) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| Failure(SpStatus::InvalidArgument, e.to_string()))?;
        let file = std::fs::File::open(Path::new(path)).map_err(|e| Failure(SpStatus::IoError, format!("{path}: {e}")))?;
        let inner = ModelFile::read(std::io::BufReader::new(file))?;
        *out = Box::into_raw(Box::new(SpModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`sp_model_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sp_model_free(model: *mut SpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Verifier value of a non-root state.
///
/// # Safety
/// Handles must be live; `path`/`out` as in [`sp_env_true_value`].
#[no_mangle]
pub unsafe extern "C" fn sp_model_predict(
    model: *const SpModel,
    env: *const SpEnv,
    problem: u64,
    path: *const u32,
    len: usize,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out_ref(out, "out")?;
        *out = model.inner.model.score_state(&env.inner, &state_from(problem, path, len)?)?;
        Ok(())
    })
}

/// `Bin(k, p)` over the `k + 1` equidistant locations.
///
/// # Safety
/// `out` must hold `len >= k + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_binomial_pmf(k: u32, p: f64, out: *mut f64, len: usize) -> SpStatus {
    guard(|| write_probs(&binomial_pmf(k as usize, p)?, out, len))
}

/// Posterior over `k + 1` bins for `c` successes. For `GaussStatic`, a
/// non-positive `static_sigma` selects the default `2 / (3k)`.
///
/// # Safety
/// `out` must hold `len >= k + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_make_posterior(
    kind: SpPosterior,
    static_sigma: f64,
    c: u32,
    k: u32,
    out: *mut f64,
    len: usize,
) -> SpStatus {
    guard(|| {
        let spec = posterior_spec(kind, static_sigma)?;
        write_probs(&make_posterior(&spec, c as usize, k as usize)?, out, len)
    })
}

/// 1-Wasserstein distance between two probability vectors of length `len`
/// on the equidistant grid over `[0, 1]`.
///
/// # Safety
/// `a` and `b` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_wasserstein1(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if a.is_null() || b.is_null() {
            return Err(null("input vector"));
        }
        let support = make_support(len, SupportKind::Equidistant)?;
        let a = CategoricalDistribution::new(support.clone(), std::slice::from_raw_parts(a, len).to_vec())?;
        let b = CategoricalDistribution::new(support, std::slice::from_raw_parts(b, len).to_vec())?;
        *out = wasserstein1(&a, &b)?;
        Ok(())
    })
}

/// Statistics-based distance between a posterior family and `Bin(k, p)`.
/// KL absolute-continuity violations yield `INFINITY` with status `Ok`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_statistics_distance(
    kind: SpPosterior,
    static_sigma: f64,
    k: u32,
    p: f64,
    metric: SpMetric,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = posterior_spec(kind, static_sigma)?;
        let metric = match metric {
            SpMetric::Wasserstein => Metric::Wasserstein,
            SpMetric::Kl => Metric::Kl,
        };
        *out = statistics_distance(&spec, k as usize, p, metric)?;
        Ok(())
    })
}

/// Standard normal CDF.
#[no_mangle]
pub extern "C" fn sp_std_normal_cdf(x: f64) -> f64 {
    std_normal_cdf(x)
}

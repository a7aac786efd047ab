//! C ABI for identik.
//!
//! Datasets, splits and rank-one results cross the boundary as opaque handles,
//! each released with its matching `_free` function.
//! Every fallible call returns an [`IdentikStatus`]; on failure the message is
//! available from [`identik_last_error_message`] on the same thread until the
//! next failing call.
//!
//! Handles are not synchronized: a handle may be shared between threads for
//! reading, but must not be freed while another call is using it.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use identik::ingest::{read_embeddings, read_manifest};
use identik::metrics::{d_prime, delta_tail, empirical_quantile, threshold_for_fmr};
use identik::{
    build_balanced_split, build_report, build_split, rank_one_scores, BalanceSpec, DemographicGroup, DistributionStats,
    EmbeddingStore, Error, ImageRecord, MetricParams, ProbeGallerySplit, RankOneResult,
};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentikStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    /// Malformed or inconsistent input files.
    DataError = 4,
    InvalidArgument = 5,
    /// Not enough identities or samples for the request.
    Insufficient = 6,
    /// The metric is undefined for this input (empty, degenerate, unachievable).
    MetricUndefined = 7,
    OutOfRange = 8,
    Internal = 99,
}

impl From<&Error> for IdentikStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => IdentikStatus::Io,
            Error::InsufficientIdentities { .. } | Error::InsufficientSamples { .. } => IdentikStatus::Insufficient,
            Error::DegenerateDistributions | Error::EmptyInput | Error::NoMatedProbes | Error::Unachievable { .. } => {
                IdentikStatus::MetricUndefined
            }
            Error::IndexOutOfRange { .. } => IdentikStatus::OutOfRange,
            Error::InvalidArgument(_) | Error::BadDimensions { .. } | Error::DimensionMismatch { .. } => {
                IdentikStatus::InvalidArgument
            }
            e if e.is_data_error() => IdentikStatus::DataError,
            Error::UnknownImage(_) | Error::ZeroNorm => IdentikStatus::DataError,
            _ => IdentikStatus::Internal,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: IdentikStatus, message: impl Into<String>) -> IdentikStatus {
    set_error(message);
    status
}

fn fail_with(e: Error) -> IdentikStatus {
    fail((&e).into(), e.to_string())
}

/// Runs `f`, turning panics into [`IdentikStatus::Internal`].
fn guard(f: impl FnOnce() -> IdentikStatus) -> IdentikStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(IdentikStatus::Internal, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, IdentikStatus> {
    if p.is_null() {
        return Err(fail(IdentikStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IdentikStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], IdentikStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(IdentikStatus::NullArgument, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(IdentikStatus::NullArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Manifest records plus their embeddings.
pub struct IdentikDataset {
    records: Vec<ImageRecord>,
    store: EmbeddingStore,
}

/// A probe / gallery partition of a dataset.
pub struct IdentikSplit {
    inner: ProbeGallerySplit,
}

/// Rank-one search results, one per probe, sorted by probe image id.
pub struct IdentikResults {
    inner: Vec<RankOneResult>,
}

/// Scores of one probe. `has_*` is false when the score is absent.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentikScorePair {
    pub mated: f64,
    pub nonmated: f64,
    pub has_mated: bool,
    pub has_nonmated: bool,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn identik_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn identik_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Reads and validates a manifest and embedding file.
#[no_mangle]
pub unsafe extern "C" fn identik_dataset_open(
    manifest_path: *const c_char,
    embeddings_path: *const c_char,
    out: *mut *mut IdentikDataset,
) -> IdentikStatus {
    guard(|| {
        non_null!(out);
        let manifest = try_ffi!(str_arg(manifest_path, "manifest_path"));
        let embeddings = try_ffi!(str_arg(embeddings_path, "embeddings_path"));
        let records = match read_manifest(manifest) {
            Ok(r) => r,
            Err(e) => return fail_with(e),
        };
        let store = match read_embeddings(embeddings) {
            Ok(s) => s,
            Err(e) => return fail_with(e),
        };
        let report = identik::validate_dataset(&records, &store);
        if !report.is_valid() {
            return fail_with(Error::ValidationFailed(report.summary()));
        }
        *out = Box::into_raw(Box::new(IdentikDataset { records, store }));
        IdentikStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn identik_dataset_free(dataset: *mut IdentikDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

#[no_mangle]
pub unsafe extern "C" fn identik_dataset_image_count(dataset: *const IdentikDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.records.len())
}

/// Every subject's most recent image is its probe; the rest are enrolled.
#[no_mangle]
pub unsafe extern "C" fn identik_split_full(
    dataset: *const IdentikDataset,
    out: *mut *mut IdentikSplit,
) -> IdentikStatus {
    guard(|| {
        non_null!(dataset, out);
        let inner = build_split(&(*dataset).records);
        *out = Box::into_raw(Box::new(IdentikSplit { inner }));
        IdentikStatus::Ok
    })
}

/// Equal identities and enrolled images per demographic group.
#[no_mangle]
pub unsafe extern "C" fn identik_split_balanced(
    dataset: *const IdentikDataset,
    identities_per_group: usize,
    enrolled_per_identity: usize,
    seed: u64,
    out: *mut *mut IdentikSplit,
) -> IdentikStatus {
    guard(|| {
        non_null!(dataset, out);
        let spec = BalanceSpec {
            identities_per_group,
            enrolled_per_identity,
            rng_seed: seed,
        };
        match build_balanced_split(&(*dataset).records, &spec) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IdentikSplit { inner }));
                IdentikStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn identik_split_free(split: *mut IdentikSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

#[no_mangle]
pub unsafe extern "C" fn identik_split_probe_count(split: *const IdentikSplit) -> usize {
    split.as_ref().map_or(0, |s| s.inner.probe_count())
}

#[no_mangle]
pub unsafe extern "C" fn identik_split_gallery_count(split: *const IdentikSplit) -> usize {
    split.as_ref().map_or(0, |s| s.inner.gallery_image_count())
}

/// Exact rank-one search. `workers` = 0 uses all cores.
#[no_mangle]
pub unsafe extern "C" fn identik_rank_one(
    dataset: *const IdentikDataset,
    split: *const IdentikSplit,
    workers: usize,
    out: *mut *mut IdentikResults,
) -> IdentikStatus {
    guard(|| {
        non_null!(dataset, split, out);
        let ds = &*dataset;
        match rank_one_scores(&(*split).inner, &ds.records, &ds.store, workers) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(IdentikResults { inner }));
                IdentikStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn identik_results_free(results: *mut IdentikResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

#[no_mangle]
pub unsafe extern "C" fn identik_results_len(results: *const IdentikResults) -> usize {
    results.as_ref().map_or(0, |r| r.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn identik_results_scores(
    results: *const IdentikResults,
    index: usize,
    out: *mut IdentikScorePair,
) -> IdentikStatus {
    guard(|| {
        non_null!(results, out);
        let all = &(*results).inner;
        let Some(r) = all.get(index) else {
            return fail(IdentikStatus::OutOfRange, format!("index {index} >= {}", all.len()));
        };
        *out = IdentikScorePair {
            mated: r.mated_score.unwrap_or(f64::NAN),
            nonmated: r.nonmated_score.unwrap_or(f64::NAN),
            has_mated: r.mated_score.is_some(),
            has_nonmated: r.nonmated_score.is_some(),
        };
        IdentikStatus::Ok
    })
}

/// Per-group metric report as JSON. Free the string with [`identik_string_free`].
#[no_mangle]
pub unsafe extern "C" fn identik_results_report_json(
    results: *const IdentikResults,
    race: *const c_char,
    gender: *const c_char,
    tail_mass: f64,
    out: *mut *mut c_char,
) -> IdentikStatus {
    guard(|| {
        non_null!(results, out);
        let group = DemographicGroup::new(try_ffi!(str_arg(race, "race")), try_ffi!(str_arg(gender, "gender")));
        let params = MetricParams {
            tail_mass,
            ..MetricParams::default()
        };
        let json = match build_report(&(*results).inner, None, &group, &params).and_then(|r| r.to_json()) {
            Ok(j) => j,
            Err(e) => return fail_with(e),
        };
        match CString::new(json) {
            Ok(c) => {
                *out = c.into_raw();
                IdentikStatus::Ok
            }
            Err(_) => fail(IdentikStatus::Internal, "report contains NUL"),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn identik_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn stats(v: &[f64], name: &str) -> Result<DistributionStats, IdentikStatus> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(fail(
            IdentikStatus::InvalidArgument,
            format!("{name} has non-finite values"),
        ));
    }
    DistributionStats::from_samples(v).ok_or_else(|| fail_with(Error::EmptyInput))
}

fn write_result(r: identik::Result<f64>, out: *mut f64) -> IdentikStatus {
    match r {
        Ok(v) => {
            unsafe { *out = v };
            IdentikStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// d′ between two score samples.
#[no_mangle]
pub unsafe extern "C" fn identik_d_prime(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> IdentikStatus {
    guard(|| {
        non_null!(out);
        let sa = try_ffi!(stats(try_ffi!(slice_arg(a, a_len, "a")), "a"));
        let sb = try_ffi!(stats(try_ffi!(slice_arg(b, b_len, "b")), "b"));
        write_result(d_prime(&sa, &sb), out)
    })
}

/// Nearest-rank quantile.
#[no_mangle]
pub unsafe extern "C" fn identik_quantile(scores: *const f64, len: usize, q: f64, out: *mut f64) -> IdentikStatus {
    guard(|| {
        non_null!(out);
        let s = try_ffi!(slice_arg(scores, len, "scores"));
        write_result(empirical_quantile(s, q), out)
    })
}

/// Mated low-tail quantile minus non-mated high-tail quantile.
#[no_mangle]
pub unsafe extern "C" fn identik_delta_tail(
    mated: *const f64,
    mated_len: usize,
    nonmated: *const f64,
    nonmated_len: usize,
    tail_mass: f64,
    out: *mut f64,
) -> IdentikStatus {
    guard(|| {
        non_null!(out);
        let m = try_ffi!(slice_arg(mated, mated_len, "mated"));
        let n = try_ffi!(slice_arg(nonmated, nonmated_len, "nonmated"));
        write_result(delta_tail(m, n, tail_mass), out)
    })
}

/// Smallest observed impostor score whose false match rate is at most `target_fmr`.
#[no_mangle]
pub unsafe extern "C" fn identik_threshold_for_fmr(
    impostor: *const f64,
    len: usize,
    target_fmr: f64,
    out: *mut f64,
) -> IdentikStatus {
    guard(|| {
        non_null!(out);
        let s = try_ffi!(slice_arg(impostor, len, "impostor"));
        write_result(threshold_for_fmr(s, target_fmr), out)
    })
}

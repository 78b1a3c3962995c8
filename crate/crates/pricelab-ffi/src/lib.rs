//! C interface to the price-index pipeline.
//!
//! The API hands out two opaque handle types: [`PlRun`] owns the result of a
//! full pipeline run (the emitted series plus the run manifest) and
//! [`PlSeries`] owns one named monthly series copied out of a run. Handles
//! are created behind out-pointers, must be released with the matching
//! `*_free` function, and are not thread-safe to mutate concurrently
//! (read-only accessors may be called from any thread).
//!
//! Every fallible entry point returns a [`PlStatus`]. On failure a
//! human-readable message is stored per thread and can be fetched with
//! [`pl_last_error`]; the pointer stays valid until the next failing call on
//! the same thread. Strings returned by accessors are owned by the handle
//! they came from and die with it. Panics never unwind across the boundary;
//! they are caught and reported as [`PlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::OnceLock;

use serde::Deserialize;

use pricelab::pipeline::{self, IndexMethod, RunConfig};
use pricelab::{Error, ErrorClass, IndexSeries};

/// Outcome of a call. `Ok` is zero; everything else carries a message
/// retrievable with `pl_last_error` on the calling thread.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    /// The call succeeded.
    Ok = 0,
    /// Invalid options or flag combination, rejected before computation.
    Usage = 1,
    /// The input data does not support the requested computation.
    Data = 2,
    /// A numerical procedure failed on otherwise valid data.
    Numerical = 3,
    /// A required pointer argument was null.
    NullArgument = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

impl PlStatus {
    fn of(error: &Error) -> PlStatus {
        match error.class() {
            ErrorClass::Usage => PlStatus::Usage,
            ErrorClass::Data => PlStatus::Data,
            ErrorClass::Numerical => PlStatus::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: PlStatus, message: String) -> PlStatus {
    let message = CString::new(message).unwrap_or_else(|_| c"invalid error text".to_owned());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
    status
}

fn fail_with(error: &Error) -> PlStatus {
    fail(PlStatus::of(error), error.to_string())
}

/// Message of the most recent failure on this thread, or null if every call
/// so far succeeded. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION.get_or_init(|| CString::new(env!("CARGO_PKG_VERSION")).unwrap()).as_ptr()
}

struct SeriesData {
    name: CString,
    months: Vec<CString>,
    values: Vec<f64>,
}

impl SeriesData {
    fn of(name: &str, series: &IndexSeries) -> SeriesData {
        SeriesData {
            name: CString::new(name).expect("series names contain no NUL"),
            months: series
                .points()
                .iter()
                .map(|(m, _)| CString::new(m.to_string()).unwrap())
                .collect(),
            values: series.points().iter().map(|&(_, v)| v).collect(),
        }
    }
}

/// A finished pipeline run: the emitted series and the manifest. Opaque.
pub struct PlRun {
    series: Vec<SeriesData>,
    manifest_json: CString,
}

/// One named monthly index series copied out of a run. Opaque.
pub struct PlSeries(SeriesData);

/// Run options, decoded from the JSON string passed to `pl_run`. Field
/// names and value grammars mirror the CLI flags; absent fields take the
/// CLI defaults.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Options {
    /// jevons|dutot|carli|harmonic|cswd|laspeyres|paasche|fisher|tornqvist|
    /// sato-vartia|geks|ccdi|gk|tpd
    index: Option<String>,
    /// Chain a bilateral formula month on month instead of comparing to the base.
    chained: bool,
    /// Rebase the emitted series onto this YYYY-MM month.
    base: Option<String>,
    /// Inclusive month range "FIRST:LAST".
    months: Option<String>,
    window: Option<usize>,
    /// movement|window|half|mean|fbew|fbmw, or "none".
    splice: Option<String>,
    /// Filter specs like "lowsale:1.25" or "extremeprice:0.5,2.0".
    filters: Vec<String>,
    /// subgroup|outlet|both, or "none".
    aggregate: Option<String>,
    agg_formula: Option<String>,
    allow_missing_cells: bool,
    match_threshold: Option<f64>,
    match_table: Option<PathBuf>,
    /// csv|json
    emit: Option<String>,
}

impl Options {
    fn into_config(self, inputs: Vec<PathBuf>, output_dir: PathBuf) -> Result<RunConfig, Error> {
        let method = IndexMethod::parse(self.index.as_deref().unwrap_or("geks"), self.chained)?;
        let mut config = RunConfig::new(inputs, output_dir, method);
        let bad = |what: &str, detail: &dyn std::fmt::Display| {
            Error::InvalidConfig(format!("{what}: {detail}"))
        };
        if let Some(base) = &self.base {
            config.base_month = Some(base.parse().map_err(|e| bad("base", &e))?);
        }
        if let Some(range) = &self.months {
            let (first, last) =
                range.split_once(':').ok_or_else(|| bad("months", &"expected FIRST:LAST"))?;
            config.month_range = Some((
                first.parse().map_err(|e| bad("months", &e))?,
                last.parse().map_err(|e| bad("months", &e))?,
            ));
        }
        if let Some(window) = self.window {
            config.window_length = window;
        }
        if let Some(splice) = self.splice.as_deref().filter(|s| *s != "none") {
            config.splice = Some(splice.parse()?);
        }
        config.filters = self.filters.iter().map(|f| f.parse()).collect::<Result<_, _>>()?;
        if let Some(partition) = self.aggregate.as_deref().filter(|s| *s != "none") {
            config.partition = Some(partition.parse()?);
        }
        if let Some(formula) = &self.agg_formula {
            config.agg_formula = formula.parse()?;
        }
        config.allow_missing_cells = self.allow_missing_cells;
        if let Some(threshold) = self.match_threshold {
            config.match_threshold = threshold;
        }
        config.match_table = self.match_table;
        if let Some(emit) = &self.emit {
            config.emit = emit.parse()?;
        }
        Ok(config)
    }
}

unsafe fn utf8<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, PlStatus> {
    if ptr.is_null() {
        return Err(fail(PlStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(PlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Parse the input files, compute the configured index series, write the
/// artifacts (series, manifest, rejects) under `output_dir`, and hand back a
/// run handle for in-memory access to the same results.
///
/// `inputs` is an array of `n_inputs` file paths. `options_json` configures
/// the run (see the README for the schema); pass null or `"{}"` for the
/// defaults (full-window GEKS, one series over the whole panel, CSV output).
/// On success `*out_run` owns the results and must be released with
/// `pl_run_free`.
///
/// # Safety
///
/// `inputs` must point to `n_inputs` valid NUL-terminated strings;
/// `output_dir` and (when non-null) `options_json` must be valid
/// NUL-terminated strings; `out_run` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_run(
    inputs: *const *const c_char,
    n_inputs: usize,
    output_dir: *const c_char,
    options_json: *const c_char,
    out_run: *mut *mut PlRun,
) -> PlStatus {
    if out_run.is_null() {
        return fail(PlStatus::NullArgument, "out_run is null".into());
    }
    if inputs.is_null() {
        return fail(PlStatus::NullArgument, "inputs is null".into());
    }
    let mut paths = Vec::with_capacity(n_inputs);
    for i in 0..n_inputs {
        match utf8(*inputs.add(i), &format!("inputs[{i}]")) {
            Ok(path) => paths.push(PathBuf::from(path)),
            Err(status) => return status,
        }
    }
    let output_dir = match utf8(output_dir, "output_dir") {
        Ok(dir) => PathBuf::from(dir),
        Err(status) => return status,
    };
    let options: Options = if options_json.is_null() {
        Options::default()
    } else {
        let text = match utf8(options_json, "options_json") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match serde_json::from_str(text) {
            Ok(options) => options,
            Err(e) => return fail(PlStatus::Usage, format!("options: {e}")),
        }
    };

    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<PlRun, Error> {
        let config = options.into_config(paths, output_dir)?;
        let artifacts = pipeline::run(&config)?;
        let manifest =
            serde_json::to_string_pretty(&artifacts.manifest).expect("manifest serializes");
        Ok(PlRun {
            series: artifacts
                .series
                .iter()
                .map(|(name, series)| SeriesData::of(name, series))
                .collect(),
            manifest_json: CString::new(manifest).expect("JSON contains no NUL"),
        })
    }));
    match outcome {
        Ok(Ok(run)) => {
            *out_run = Box::into_raw(Box::new(run));
            PlStatus::Ok
        }
        Ok(Err(error)) => fail_with(&error),
        Err(_) => fail(PlStatus::Panic, "internal panic in pl_run".into()),
    }
}

/// Release a run handle. Null is a no-op.
///
/// # Safety
///
/// `run` must be null or a pointer obtained from `pl_run` that has not been
/// freed yet; strings borrowed from the handle become invalid.
#[no_mangle]
pub unsafe extern "C" fn pl_run_free(run: *mut PlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of series in the run (each partition cell, then `total` when
/// aggregating; a single `all` series otherwise). Null yields 0.
///
/// # Safety
///
/// `run` must be null or a live handle from `pl_run`.
#[no_mangle]
pub unsafe extern "C" fn pl_run_series_count(run: *const PlRun) -> usize {
    run.as_ref().map_or(0, |r| r.series.len())
}

/// Name of the series at `index`, owned by the run. Null handle or an
/// out-of-range index yields null.
///
/// # Safety
///
/// `run` must be null or a live handle from `pl_run`.
#[no_mangle]
pub unsafe extern "C" fn pl_run_series_name(run: *const PlRun, index: usize) -> *const c_char {
    run.as_ref().and_then(|r| r.series.get(index)).map_or(ptr::null(), |s| s.name.as_ptr())
}

/// Copy the series at `index` out of the run into a standalone handle that
/// survives `pl_run_free`. Release it with `pl_series_free`.
///
/// # Safety
///
/// `run` must be a live handle from `pl_run`; `out_series` must be a valid
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_run_open_series(
    run: *const PlRun,
    index: usize,
    out_series: *mut *mut PlSeries,
) -> PlStatus {
    if out_series.is_null() {
        return fail(PlStatus::NullArgument, "out_series is null".into());
    }
    let Some(run) = run.as_ref() else {
        return fail(PlStatus::NullArgument, "run is null".into());
    };
    let Some(data) = run.series.get(index) else {
        return fail(
            PlStatus::Usage,
            format!("series index {index} out of range 0..{}", run.series.len()),
        );
    };
    let copy = SeriesData {
        name: data.name.clone(),
        months: data.months.clone(),
        values: data.values.clone(),
    };
    *out_series = Box::into_raw(Box::new(PlSeries(copy)));
    PlStatus::Ok
}

/// The run manifest (configuration echo, record counts, computed and
/// excluded cells) as a JSON string owned by the run. Null handle yields
/// null.
///
/// # Safety
///
/// `run` must be null or a live handle from `pl_run`.
#[no_mangle]
pub unsafe extern "C" fn pl_run_manifest_json(run: *const PlRun) -> *const c_char {
    run.as_ref().map_or(ptr::null(), |r| r.manifest_json.as_ptr())
}

/// Release a series handle. Null is a no-op.
///
/// # Safety
///
/// `series` must be null or a pointer from `pl_run_open_series` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn pl_series_free(series: *mut PlSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Name of the series (its cell label). Null yields null.
///
/// # Safety
///
/// `series` must be null or a live handle from `pl_run_open_series`.
#[no_mangle]
pub unsafe extern "C" fn pl_series_name(series: *const PlSeries) -> *const c_char {
    series.as_ref().map_or(ptr::null(), |s| s.0.name.as_ptr())
}

/// Number of monthly points in the series. Null yields 0.
///
/// # Safety
///
/// `series` must be null or a live handle from `pl_run_open_series`.
#[no_mangle]
pub unsafe extern "C" fn pl_series_len(series: *const PlSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.values.len())
}

/// Month label ("YYYY-MM") of the point at `index`, owned by the series.
/// Null handle or an out-of-range index yields null.
///
/// # Safety
///
/// `series` must be null or a live handle from `pl_run_open_series`.
#[no_mangle]
pub unsafe extern "C" fn pl_series_month(series: *const PlSeries, index: usize) -> *const c_char {
    series.as_ref().and_then(|s| s.0.months.get(index)).map_or(ptr::null(), |m| m.as_ptr())
}

/// Index value of the point at `index`, written to `out_value`.
///
/// # Safety
///
/// `series` must be a live handle from `pl_run_open_series`; `out_value`
/// must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_series_value(
    series: *const PlSeries,
    index: usize,
    out_value: *mut f64,
) -> PlStatus {
    if out_value.is_null() {
        return fail(PlStatus::NullArgument, "out_value is null".into());
    }
    let Some(series) = series.as_ref() else {
        return fail(PlStatus::NullArgument, "series is null".into());
    };
    let Some(&value) = series.0.values.get(index) else {
        return fail(
            PlStatus::Usage,
            format!("point index {index} out of range 0..{}", series.0.values.len()),
        );
    };
    *out_value = value;
    PlStatus::Ok
}

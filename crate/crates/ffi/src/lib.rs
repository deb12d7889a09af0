//! C ABI for the `nearfar` library.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released by the matching `*_free`. Every fallible call returns an
//! [`NfStatus`]; on failure the message is available from
//! [`nf_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nearfar::bounds::LocalizationSetup;
use nearfar::geometry::{ArrayGeometry, Point};
use nearfar::scenarios::{self, runs, RunOptions, ScenarioConfig, ScenarioTable};
use nearfar::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    InvalidArgument = 1,
    DegenerateGeometry = 2,
    NumericalFailure = 3,
    NoSolution = 4,
    ConfigError = 5,
    RunFailure = 6,
    IoError = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Linear array handle.
pub struct NfGeometry(ArrayGeometry);

/// Parsed scenario configuration handle.
pub struct NfScenario(ScenarioConfig);

/// Result table of a scenario run.
pub struct NfTable(ScenarioTable);

/// Misspecified-bound summary at one position.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NfBoundReport {
    pub peb_m: f64,
    pub lb_mm_m: f64,
    pub bias_m: f64,
    pub mme_db: f64,
    pub pseudo_true_aoa_rad: f64,
    pub pseudo_true_delay_s: f64,
    pub iterations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NfStatus {
    match e {
        Error::InvalidArgument(_) => NfStatus::InvalidArgument,
        Error::DegenerateGeometry(_) => NfStatus::DegenerateGeometry,
        Error::NumericalFailure(_) => NfStatus::NumericalFailure,
        Error::NoSolution(_) => NfStatus::NoSolution,
        Error::Config { .. } => NfStatus::ConfigError,
        Error::RunFailure { .. } => NfStatus::RunFailure,
        Error::Io(_) => NfStatus::IoError,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            NfStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            NfStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            NfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

/// Message of the last failing call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform linear array of `n` elements along y, spacing in carrier wavelengths.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_ula(
    n: usize,
    spacing_wavelengths: f64,
    carrier_hz: f64,
    out_geom: *mut *mut NfGeometry,
) -> NfStatus {
    guard(|| {
        let slot = out(out_geom, "out_geom")?;
        let g = ArrayGeometry::ula_wavelengths(n, spacing_wavelengths, carrier_hz)?;
        *slot = Box::into_raw(Box::new(NfGeometry(g)));
        Ok(())
    })
}

/// # Safety
/// `geom` must come from [`nf_geometry_ula`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_free(geom: *mut NfGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// # Safety
/// `geom` must be a live handle and `out_m` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_aperture(geom: *const NfGeometry, out_m: *mut f64) -> NfStatus {
    guard(|| {
        let g = deref(geom, "geom")?;
        *out(out_m, "out_m")? = g.0.aperture();
        Ok(())
    })
}

/// Fraunhofer distance at the carrier wavelength.
///
/// # Safety
/// `geom` must be a live handle and `out_m` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_fraunhofer_distance(geom: *const NfGeometry, out_m: *mut f64) -> NfStatus {
    guard(|| {
        let g = deref(geom, "geom")?;
        *out(out_m, "out_m")? = g.0.fraunhofer_distance(g.0.carrier_wavelength())?;
        Ok(())
    })
}

/// UMi street-canyon LoS probability at 2D distance `d2d_m`.
///
/// # Safety
/// `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_los_probability_umi(d2d_m: f64, out_p: *mut f64) -> NfStatus {
    guard(|| {
        *out(out_p, "out_p")? = nearfar::channel::los_probability_umi(d2d_m)?;
        Ok(())
    })
}

/// KL divergence between two univariate Gaussians, nats.
///
/// # Safety
/// `out_nats` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_kl_gaussian(mu1: f64, var1: f64, mu2: f64, var2: f64, out_nats: *mut f64) -> NfStatus {
    guard(|| {
        *out(out_nats, "out_nats")? = nearfar::metrics::kl_gaussian(mu1, var1, mu2, var2)?;
        Ok(())
    })
}

/// Parses and validates a JSON scenario.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_scenario` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_scenario_from_json(json: *const c_char, out_scenario: *mut *mut NfScenario) -> NfStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let cfg = ScenarioConfig::from_json_str(str_arg(json, "json")?)?;
        *slot = Box::into_raw(Box::new(NfScenario(cfg)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_scenario` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_scenario_from_file(path: *const c_char, out_scenario: *mut *mut NfScenario) -> NfStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let cfg = ScenarioConfig::from_path(Path::new(str_arg(path, "path")?))?;
        *slot = Box::into_raw(Box::new(NfScenario(cfg)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nf_scenario_set_seed(scenario: *mut NfScenario, seed: u64) -> NfStatus {
    guard(|| {
        out(scenario, "scenario")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from a `nf_scenario_from_*` call. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn nf_scenario_free(scenario: *mut NfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the scenario on `threads` workers (0 means all cores). Failed cells
/// are part of the table; the run itself fails with `NF_STATUS_RUN_FAILURE`
/// when too many cells failed, in which case no table is returned.
///
/// # Safety
/// `scenario` must be a live handle and `out_table` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_scenario_run(
    scenario: *const NfScenario,
    threads: usize,
    out_table: *mut *mut NfTable,
) -> NfStatus {
    guard(|| {
        let cfg = &deref(scenario, "scenario")?.0;
        let slot = out(out_table, "out_table")?;
        let opts = RunOptions {
            threads: (threads > 0).then_some(threads),
        };
        let table = scenarios::run_scenario(cfg, &opts)?;
        table.check_failures()?;
        *slot = Box::into_raw(Box::new(NfTable(table)));
        Ok(())
    })
}

/// Misspecified-bound report at `(x_m, y_m)` for an mme-map scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out_report` writable.
#[no_mangle]
pub unsafe extern "C" fn nf_bound_report(
    scenario: *const NfScenario,
    x_m: f64,
    y_m: f64,
    out_report: *mut NfBoundReport,
) -> NfStatus {
    guard(|| {
        let cfg = &deref(scenario, "scenario")?.0;
        let slot = out(out_report, "out_report")?;
        let setup: LocalizationSetup = runs::localization_setup(cfg)?;
        let r = setup.analyze(&Point::new(x_m, y_m))?;
        *slot = NfBoundReport {
            peb_m: r.peb_m,
            lb_mm_m: r.lb_mm_m,
            bias_m: r.bias_m,
            mme_db: r.mme_db,
            pseudo_true_aoa_rad: r.pseudo_true.aoa_rad,
            pseudo_true_delay_s: r.pseudo_true.delay_s,
            iterations: r.iterations,
        };
        Ok(())
    })
}

/// # Safety
/// `table` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn nf_table_rows(table: *const NfTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.rows.len())
}

/// Row `row` of a table. `out_ok` is 1 for a successful cell and 0 for a
/// flagged one (whose value is NaN).
///
/// # Safety
/// `table` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_table_row(
    table: *const NfTable,
    row: usize,
    out_x_m: *mut f64,
    out_y_m: *mut f64,
    out_value: *mut f64,
    out_ok: *mut i32,
) -> NfStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        let r = t
            .rows
            .get(row)
            .ok_or_else(|| Fail::Arg(format!("row {row} out of range ({} rows)", t.rows.len())))?;
        *out(out_x_m, "out_x_m")? = r.x_m;
        *out(out_y_m, "out_y_m")? = r.y_m;
        *out(out_value, "out_value")? = r.value;
        *out(out_ok, "out_ok")? = i32::from(r.flag.is_none());
        Ok(())
    })
}

/// Writes the table as CSV.
///
/// # Safety
/// `table` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nf_table_write_csv(table: *const NfTable, path: *const c_char) -> NfStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        scenarios::write_csv_file(t, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `table` must come from [`nf_scenario_run`]. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn nf_table_free(table: *mut NfTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

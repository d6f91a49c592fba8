//! C ABI for the force-reconstruction library.
//!
//! All entry points return an [`FxStatus`] error code; `FX_OK` (0) means
//! success. Objects are passed as opaque handles created and destroyed by
//! this library; column data returned by `fx_series_column` stays valid
//! until the owning series handle is freed. The last error message is kept
//! per thread and can be copied out with `fx_last_error_message`.
//!
//! The companion header `include/fluxrecon.h` is maintained by hand and
//! mirrors these declarations.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fluxrecon::harness::{
    check_conditions, run_twin, simulate, ErrorSeries, ExperimentConfig, OutputSection,
};
use fluxrecon::FluxError;

/// Error codes of the C ABI (0 = success).
pub type FxStatus = c_int;

/// Success.
pub const FX_OK: FxStatus = 0;
/// Invalid configuration (parse error, unknown key, or bad value).
pub const FX_ERR_CONFIG: FxStatus = 1;
/// The rigorous parameter conditions are infeasible.
pub const FX_ERR_INFEASIBLE: FxStatus = 2;
/// The time integration blew up.
pub const FX_ERR_BLOWUP: FxStatus = 3;
/// A stability bound on the time step was violated.
pub const FX_ERR_TIMESTEP: FxStatus = 4;
/// Malformed snapshot, archive, or descriptor data.
pub const FX_ERR_FORMAT: FxStatus = 5;
/// Underlying I/O failure.
pub const FX_ERR_IO: FxStatus = 6;
/// Invalid grid parameters or mismatched grids.
pub const FX_ERR_GRID: FxStatus = 7;
/// A required pointer argument was null.
pub const FX_ERR_NULL: FxStatus = 8;
/// A panic was caught at the ABI boundary.
pub const FX_ERR_PANIC: FxStatus = 9;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn code_of(err: &FluxError) -> FxStatus {
    match err {
        FluxError::Grid(_) => FX_ERR_GRID,
        FluxError::Config(_) => FX_ERR_CONFIG,
        FluxError::Infeasible(_) => FX_ERR_INFEASIBLE,
        FluxError::BlowUp { .. } => FX_ERR_BLOWUP,
        FluxError::TimeStep(_) => FX_ERR_TIMESTEP,
        FluxError::Format(_) => FX_ERR_FORMAT,
        FluxError::Io(_) => FX_ERR_IO,
    }
}

fn fail(err: FluxError) -> FxStatus {
    let code = code_of(&err);
    set_error(err.to_string());
    code
}

fn guarded(f: impl FnOnce() -> FxStatus) -> FxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("panic caught at the ABI boundary".into());
            FX_ERR_PANIC
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, FxStatus> {
    if ptr.is_null() {
        set_error("null string argument".into());
        return Err(FX_ERR_NULL);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        FX_ERR_FORMAT
    })
}

/// Opaque experiment definition handle.
pub struct FxExperiment {
    config: ExperimentConfig,
}

/// Opaque error-series handle with pinned column storage.
pub struct FxSeries {
    series: ErrorSeries,
}

/// Copies the current thread's last error message (NUL-terminated,
/// truncated to `len` bytes) into `buf`. Returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null with `len` 0).
#[no_mangle]
pub unsafe extern "C" fn fx_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a TOML experiment definition into a new handle.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string; `out` must be a valid
/// pointer. The handle must be released with `fx_experiment_free`.
#[no_mangle]
pub unsafe extern "C" fn fx_experiment_parse(
    toml_text: *const c_char,
    out: *mut *mut FxExperiment,
) -> FxStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output handle".into());
            return FX_ERR_NULL;
        }
        let text = match cstr(toml_text) {
            Ok(t) => t,
            Err(code) => return code,
        };
        match ExperimentConfig::from_toml(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(FxExperiment { config }));
                FX_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases an experiment handle (null is a no-op).
///
/// # Safety
/// `exp` must have come from `fx_experiment_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fx_experiment_free(exp: *mut FxExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Overrides the RNG seed of an experiment.
///
/// # Safety
/// `exp` must be a live handle from `fx_experiment_parse`.
#[no_mangle]
pub unsafe extern "C" fn fx_experiment_set_seed(exp: *mut FxExperiment, seed: u64) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_mut() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        exp.config.seed = seed;
        FX_OK
    })
}

/// Sets (or replaces) the output directory of an experiment.
///
/// # Safety
/// `exp` must be a live handle; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fx_experiment_set_output_dir(
    exp: *mut FxExperiment,
    dir: *const c_char,
) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_mut() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        let dir = match cstr(dir) {
            Ok(d) => d,
            Err(code) => return code,
        };
        exp.config.output = Some(OutputSection { dir: dir.to_string() });
        FX_OK
    })
}

/// Sets a numeric config field by dotted name (e.g. `"params.mu1"`).
///
/// # Safety
/// `exp` must be a live handle; `axis` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fx_experiment_set_axis(
    exp: *mut FxExperiment,
    axis: *const c_char,
    value: c_double,
) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_mut() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        let axis = match cstr(axis) {
            Ok(a) => a,
            Err(code) => return code,
        };
        match exp.config.set_axis(axis, value) {
            Ok(()) => FX_OK,
            Err(e) => fail(e),
        }
    })
}

/// Evaluates the parameter feasibility conditions; `*out_feasible` is set to
/// 1 when feasible, 0 otherwise.
///
/// # Safety
/// `exp` must be a live handle; `out_feasible` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_check(exp: *const FxExperiment, out_feasible: *mut c_int) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_ref() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        if out_feasible.is_null() {
            set_error("null output pointer".into());
            return FX_ERR_NULL;
        }
        match check_conditions(&exp.config) {
            Ok(report) => {
                *out_feasible = report.feasible as c_int;
                set_error(report.summary);
                FX_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Generates the truth trajectory and writes its observation archive to the
/// configured output directory.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fx_simulate(exp: *const FxExperiment) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_ref() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        match simulate(&exp.config) {
            Ok(()) => FX_OK,
            Err(e) => fail(e),
        }
    })
}

/// Runs the twin experiment and returns its error series as a new handle.
///
/// # Safety
/// `exp` must be a live handle; `out` must be valid. The series must be
/// released with `fx_series_free`.
#[no_mangle]
pub unsafe extern "C" fn fx_run_twin(
    exp: *const FxExperiment,
    out: *mut *mut FxSeries,
) -> FxStatus {
    guarded(|| {
        let Some(exp) = exp.as_ref() else {
            set_error("null experiment handle".into());
            return FX_ERR_NULL;
        };
        if out.is_null() {
            set_error("null output handle".into());
            return FX_ERR_NULL;
        }
        match run_twin(&exp.config) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(FxSeries { series: run.series }));
                FX_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a series handle (null is a no-op).
///
/// # Safety
/// `series` must have come from `fx_run_twin` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fx_series_free(series: *mut FxSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of sample rows in a series.
///
/// # Safety
/// `series` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fx_series_len(series: *const FxSeries) -> usize {
    match series.as_ref() {
        Some(s) => s.series.len(),
        None => 0,
    }
}

/// Returns a borrowed pointer to a column (`"t"`, `"sync_err_L2"`,
/// `"sync_err_H1"`, `"model_err_Hm1"`, `"model_err_L2"`, `"aux_energy"`);
/// `*out_len` receives the number of values. The pointer stays valid until
/// the series is freed.
///
/// # Safety
/// `series` must be a live handle; `column` must be NUL-terminated;
/// `out_data` and `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_series_column(
    series: *const FxSeries,
    column: *const c_char,
    out_data: *mut *const c_double,
    out_len: *mut usize,
) -> FxStatus {
    guarded(|| {
        let Some(s) = series.as_ref() else {
            set_error("null series handle".into());
            return FX_ERR_NULL;
        };
        if out_data.is_null() || out_len.is_null() {
            set_error("null output pointer".into());
            return FX_ERR_NULL;
        }
        let name = match cstr(column) {
            Ok(n) => n,
            Err(code) => return code,
        };
        match s.series.column(name) {
            Some(values) => {
                *out_data = values.as_ptr();
                *out_len = values.len();
                FX_OK
            }
            None => {
                set_error(format!("unknown series column '{name}'"));
                FX_ERR_CONFIG
            }
        }
    })
}

/// Fits an exponential decay rate to a column over `[t_from, t_to]`;
/// `out_rate` and `out_residual` receive the slope and the relative RMS
/// log-residual (either may be null to skip).
///
/// # Safety
/// `series` must be a live handle; `column` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fx_series_fit(
    series: *const FxSeries,
    column: *const c_char,
    t_from: c_double,
    t_to: c_double,
    out_rate: *mut c_double,
    out_residual: *mut c_double,
) -> FxStatus {
    guarded(|| {
        let Some(s) = series.as_ref() else {
            set_error("null series handle".into());
            return FX_ERR_NULL;
        };
        let name = match cstr(column) {
            Ok(n) => n,
            Err(code) => return code,
        };
        match s.series.fit(name, (t_from, t_to)) {
            Ok(fit) => {
                if !out_rate.is_null() {
                    *out_rate = fit.rate;
                }
                if !out_residual.is_null() {
                    *out_residual = fit.residual;
                }
                FX_OK
            }
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    const TD_TOML: &str = r#"
equation = "td"
algorithm = "nudging"
seed = 11

[grid]
dim = 2
k = 8

[physics]
kappa = 1.0

[velocity]
kind = "taylor_green"
amplitude = 0.05

[force]
rank = 2
map = "power_law_tail"
exponent = 3.0
weight = 0.5

[observation]
n_obs = 4

[params]
auto = false
mu1 = 20.0
mu2 = 40.0

[time]
dt = 5e-3
t = 0.5
sample_every = 5
"#;

    #[test]
    fn parse_run_fit_free_lifecycle() {
        let text = CString::new(TD_TOML).unwrap();
        let mut exp: *mut FxExperiment = std::ptr::null_mut();
        unsafe {
            assert_eq!(fx_experiment_parse(text.as_ptr(), &mut exp), FX_OK);
            let mut series: *mut FxSeries = std::ptr::null_mut();
            assert_eq!(fx_run_twin(exp, &mut series), FX_OK);
            assert!(fx_series_len(series) > 8);
            let column = CString::new("model_err_Hm1").unwrap();
            let mut data: *const c_double = std::ptr::null();
            let mut len = 0usize;
            assert_eq!(fx_series_column(series, column.as_ptr(), &mut data, &mut len), FX_OK);
            assert_eq!(len, fx_series_len(series));
            assert!(*data > *data.add(len - 1), "model error must decrease");
            let mut rate = 0.0;
            let mut residual = 0.0;
            assert_eq!(
                fx_series_fit(series, column.as_ptr(), 0.05, 0.5, &mut rate, &mut residual),
                FX_OK
            );
            assert!(rate < 0.0, "rate {rate}");
            fx_series_free(series);
            fx_experiment_free(exp);
        }
    }

    #[test]
    fn bad_config_reports_code_and_message() {
        let text = CString::new("equation = \"td\"\nbogus = 1\n").unwrap();
        let mut exp: *mut FxExperiment = std::ptr::null_mut();
        unsafe {
            assert_eq!(fx_experiment_parse(text.as_ptr(), &mut exp), FX_ERR_CONFIG);
            let mut buf = [0i8; 256];
            let n = fx_last_error_message(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);
        }
        assert!(exp.is_null());
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            assert_eq!(fx_experiment_set_seed(std::ptr::null_mut(), 1), FX_ERR_NULL);
            let mut feasible = 0;
            assert_eq!(fx_check(std::ptr::null(), &mut feasible), FX_ERR_NULL);
            assert_eq!(fx_series_len(std::ptr::null()), 0);
            fx_series_free(std::ptr::null_mut());
            fx_experiment_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn set_axis_and_check_work_through_the_abi() {
        let text = CString::new(TD_TOML).unwrap();
        let mut exp: *mut FxExperiment = std::ptr::null_mut();
        unsafe {
            assert_eq!(fx_experiment_parse(text.as_ptr(), &mut exp), FX_OK);
            let axis = CString::new("params.mu1").unwrap();
            assert_eq!(fx_experiment_set_axis(exp, axis.as_ptr(), 25.0), FX_OK);
            let bad = CString::new("no.such.axis").unwrap();
            assert_eq!(fx_experiment_set_axis(exp, bad.as_ptr(), 1.0), FX_ERR_CONFIG);
            let mut feasible = -1;
            assert_eq!(fx_check(exp, &mut feasible), FX_OK);
            assert!(feasible == 0 || feasible == 1);
            fx_experiment_free(exp);
        }
    }
}

//! C ABI over the solver.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`IrsStatus`];
//! on failure a message for the calling thread is available from
//! [`irs_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irs_swipt::baselines::AlgorithmId;
use irs_swipt::experiments::{build_scenario, run_on_draw, StoredSolution};
use irs_swipt::model::{check_feasibility, ChannelSet, Solution};
use irs_swipt::units::{db_to_linear, dbm_to_watts};
use irs_swipt::{Error, SystemConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Parse = 4,
    /// No feasible point was found for the scenario.
    Infeasible = 5,
    Numerical = 6,
    Dimension = 7,
    /// Output buffer too small; the required length is still written.
    BufferTooSmall = 8,
    Io = 9,
    Panic = 10,
}

/// Scenario configuration.
pub struct IrsConfig {
    inner: SystemConfig,
}

/// A solution with the scenario it was computed on.
pub struct IrsSolution {
    stored: StoredSolution,
    config: SystemConfig,
    channels: ChannelSet,
    solution: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> IrsStatus {
    match err {
        Error::Config(_) | Error::TooManyUsers { .. } => IrsStatus::InvalidConfig,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => IrsStatus::Parse,
        Error::Infeasible(_) | Error::ScenarioInfeasible(_) | Error::RankDeficient => IrsStatus::Infeasible,
        Error::NumericalFailure(_) | Error::DegenerateLinearization(_) => IrsStatus::Numerical,
        Error::Dimension(_) | Error::Domain(_) | Error::OrderContract(_) => IrsStatus::Dimension,
        Error::Io(_) => IrsStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (IrsStatus, String)>) -> IrsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside the solver");
            IrsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IrsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (IrsStatus, String) {
    (IrsStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (IrsStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (IrsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (IrsStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `src` into `buf` when it fits; `len` always receives the length.
unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), (IrsStatus, String)> {
    if !len.is_null() {
        *len = src.len();
    }
    if cap < src.len() {
        return Err((IrsStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

fn string_out(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn irs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn irs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The default scenario (K=4, N=4, M=30).
#[no_mangle]
pub extern "C" fn irs_config_default() -> *mut IrsConfig {
    Box::into_raw(Box::new(IrsConfig { inner: SystemConfig::default() }))
}

/// Parses the `key = value` config format; missing keys take defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irs_config_parse(text: *const c_char, out: *mut *mut IrsConfig) -> IrsStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let inner = SystemConfig::from_toml_str(text).map_err(lib_err)?;
        write_out(out, IrsConfig { inner })
    })
}

/// Config in the `key = value` format. Free with [`irs_string_free`].
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_config_to_string(cfg: *const IrsConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => string_out(c.inner.to_toml_string()),
        None => {
            set_error("cfg is null");
            ptr::null_mut()
        }
    }
}

/// Sets the user, antenna and element counts.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_config_set_dims(cfg: *mut IrsConfig, users: usize, antennas: usize, elements: usize) -> IrsStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let next = SystemConfig { num_users: users, num_antennas: antennas, num_elements: elements, ..c.inner.clone() };
        next.validate().map_err(lib_err)?;
        c.inner = next;
        Ok(())
    })
}

/// Sets the SINR threshold (dB) and the harvested-energy threshold (dBm).
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_config_set_thresholds(cfg: *mut IrsConfig, sinr_db: f64, energy_dbm: f64) -> IrsStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let next = SystemConfig {
            sinr_threshold: db_to_linear(sinr_db),
            energy_threshold: dbm_to_watts(energy_dbm),
            ..c.inner.clone()
        };
        next.validate().map_err(lib_err)?;
        c.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn irs_config_free(cfg: *mut IrsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds draw `draw` of `seed` and runs `algorithm` (for example
/// `"JDBPR_OPT"` or `"NO_IRS"`) on it.
///
/// # Safety
/// `cfg` must be a live handle, `algorithm` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irs_solve(
    cfg: *const IrsConfig,
    algorithm: *const c_char,
    seed: u64,
    draw: u64,
    out: *mut *mut IrsSolution,
) -> IrsStatus {
    guard(|| {
        let c = &cfg.as_ref().ok_or_else(|| null("cfg"))?.inner;
        let id: AlgorithmId = read_str(algorithm, "algorithm")?.parse().map_err(lib_err)?;
        let channels = build_scenario(c, seed, draw).map_err(lib_err)?;
        let solution = run_on_draw(id, c, &channels, seed, draw).map_err(lib_err)?;
        let stored = StoredSolution::new(id, c, seed, draw, &solution);
        let (config, channels) = stored.scenario().map_err(lib_err)?;
        write_out(out, IrsSolution { stored, config, channels, solution })
    })
}

/// Loads a solution written by [`irs_solution_to_json`] or the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_from_json(json: *const c_char, out: *mut *mut IrsSolution) -> IrsStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let stored: StoredSolution = serde_json::from_str(text).map_err(|e| (IrsStatus::Parse, e.to_string()))?;
        let solution = stored.to_solution().map_err(lib_err)?;
        let (config, channels) = stored.scenario().map_err(lib_err)?;
        write_out(out, IrsSolution { stored, config, channels, solution })
    })
}

/// Free with [`irs_string_free`].
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_to_json(sol: *const IrsSolution) -> *mut c_char {
    match sol.as_ref() {
        Some(s) => match serde_json::to_string_pretty(&s.stored) {
            Ok(text) => string_out(text),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        },
        None => {
            set_error("sol is null");
            ptr::null_mut()
        }
    }
}

/// Total transmit power in watts, NaN for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_objective(sol: *const IrsSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.solution.objective)
}

/// Number of alternating iterations run, 0 for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_iterations(sol: *const IrsSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.solution.trace.len())
}

/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_converged(sol: *const IrsSolution) -> bool {
    sol.as_ref().is_some_and(|s| s.solution.converged)
}

/// Power-splitting ratios, one per user.
///
/// # Safety
/// `sol` must be a live handle, `buf` must hold `cap` values and `len`
/// must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_split(sol: *const IrsSolution, buf: *mut f64, cap: usize, len: *mut usize) -> IrsStatus {
    guard(|| copy_out(&sol.as_ref().ok_or_else(|| null("sol"))?.solution.split.rho, buf, cap, len))
}

/// IRS phases in radians, one per element.
///
/// # Safety
/// As for [`irs_solution_split`].
#[no_mangle]
pub unsafe extern "C" fn irs_solution_phases(sol: *const IrsSolution, buf: *mut f64, cap: usize, len: *mut usize) -> IrsStatus {
    guard(|| copy_out(&sol.as_ref().ok_or_else(|| null("sol"))?.solution.phases.theta, buf, cap, len))
}

/// Beamformer of `user` as interleaved `re, im` pairs (2N values).
///
/// # Safety
/// As for [`irs_solution_split`].
#[no_mangle]
pub unsafe extern "C" fn irs_solution_beam(
    sol: *const IrsSolution,
    user: usize,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> IrsStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        let w = s
            .solution
            .beams
            .w
            .get(user)
            .ok_or_else(|| (IrsStatus::Dimension, format!("user {user} out of range")))?;
        let flat: Vec<f64> = w.iter().flat_map(|z| [z.re, z.im]).collect();
        copy_out(&flat, buf, cap, len)
    })
}

/// Decoding sequence, first decoded user first.
///
/// # Safety
/// `sol` must be a live handle, `buf` must hold `cap` values and `len`
/// must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_order(sol: *const IrsSolution, buf: *mut usize, cap: usize, len: *mut usize) -> IrsStatus {
    guard(|| {
        let seq = sol.as_ref().ok_or_else(|| null("sol"))?.solution.order.sequence();
        if !len.is_null() {
            *len = seq.len();
        }
        if cap < seq.len() {
            return Err((IrsStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", seq.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(seq.as_ptr(), buf, seq.len());
        Ok(())
    })
}

/// Re-checks every constraint on the rebuilt scenario. `feasible` receives
/// the verdict and `min_margin` the smallest normalized margin.
///
/// # Safety
/// `sol` must be a live handle; the out pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_check(sol: *const IrsSolution, tol: f64, feasible: *mut bool, min_margin: *mut f64) -> IrsStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("sol"))?;
        if !(tol >= 0.0) {
            return Err((IrsStatus::InvalidConfig, format!("tolerance must be non-negative, got {tol}")));
        }
        let report = check_feasibility(&s.channels, &s.solution, &s.config, tol).map_err(lib_err)?;
        if !feasible.is_null() {
            *feasible = report.feasible();
        }
        if !min_margin.is_null() {
            *min_margin = report.min_margin();
        }
        Ok(())
    })
}

/// # Safety
/// `sol` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn irs_solution_free(sol: *mut IrsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

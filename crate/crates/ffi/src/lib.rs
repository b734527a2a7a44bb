//! C ABI over the radcode library.
//!
//! Objects cross the boundary as opaque handles created by `rc_*_new`-style calls and
//! released with the matching `rc_*_free`. Every fallible call returns an [`RcStatus`];
//! on failure the message is kept per thread and read with [`rc_last_error_message`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use radcode::analysis::marcum_q1;
use radcode::linalg::C64;
use radcode::model::{generalized_barker_32, p3_code, CodeVector, Interference, RadarScenario};
use radcode::solver::{synthesize, SolverOptions, SynthesisResult};
use radcode::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IllConditioned = 3,
    Degenerate = 4,
    SolverFailure = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Scenario description with an exponentially correlated interference covariance.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcScenarioParams {
    pub pulses: usize,
    /// Pulse repetition interval (s).
    pub pri: f64,
    /// Chirp bandwidth (Hz).
    pub bandwidth: f64,
    /// Pulse width (s).
    pub pulse_width: f64,
    /// Fast-time sampling step (s).
    pub sample_step: f64,
    pub fast_samples: usize,
    pub amplitude_power: f64,
    pub normalized_doppler: f64,
    pub pfa: f64,
    /// One-lag correlation coefficient of the interference.
    pub rho: f64,
}

/// Scalar figures of merit of a synthesized code.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RcMetrics {
    pub sinr_db: f64,
    pub crb_tau: f64,
    pub crb_fd: f64,
    pub det_crb: f64,
    pub pd: f64,
    pub papr: f64,
    pub isl_db: f64,
    pub upsilon_db: f64,
    pub objective_db: f64,
    pub iterations: usize,
}

pub struct RcScenario(RadarScenario);
pub struct RcCode(CodeVector);
pub struct RcResult(SynthesisResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: RcStatus, msg: impl Into<String>) -> RcStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> RcStatus {
    let status = match &e {
        Error::InvalidInput { .. } | Error::Parse { .. } | Error::ZeroVector => {
            RcStatus::InvalidArgument
        }
        Error::IllConditioned { .. } => RcStatus::IllConditioned,
        Error::Degenerate(_) => RcStatus::Degenerate,
        Error::Solver(_) => RcStatus::SolverFailure,
        Error::Io { .. } => RcStatus::Io,
    };
    fail(status, e.to_string())
}

fn guarded(body: impl FnOnce() -> RcStatus) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => {
            if s == RcStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => fail(
            RcStatus::Internal,
            "internal panic caught at the C boundary",
        ),
    }
}

fn into_handle<T>(value: T, out: *mut *mut T) -> RcStatus {
    // SAFETY: callers check `out` for null before reaching here.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RcStatus::Ok
}

/// Defaults of the reference scenario.
#[no_mangle]
pub extern "C" fn rc_scenario_params_default() -> RcScenarioParams {
    let d = RadarScenario::default();
    let rho = match d.interference {
        Interference::Exponential { rho } => rho,
        Interference::Explicit(_) => unreachable!("default interference is exponential"),
    };
    RcScenarioParams {
        pulses: d.pulses,
        pri: d.pri,
        bandwidth: d.bandwidth,
        pulse_width: d.pulse_width,
        sample_step: d.sample_step,
        fast_samples: d.fast_samples,
        amplitude_power: d.amplitude_power,
        normalized_doppler: d.normalized_doppler,
        pfa: d.pfa,
        rho,
    }
}

/// Validate `params` and create a scenario handle in `*out`.
///
/// # Safety
/// `params` must point to a valid `RcScenarioParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_scenario_new(
    params: *const RcScenarioParams,
    out: *mut *mut RcScenario,
) -> RcStatus {
    guarded(|| {
        if params.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_scenario_new");
        }
        let p = unsafe { *params };
        let scenario = RadarScenario {
            pulses: p.pulses,
            pri: p.pri,
            bandwidth: p.bandwidth,
            pulse_width: p.pulse_width,
            sample_step: p.sample_step,
            fast_samples: p.fast_samples,
            amplitude_power: p.amplitude_power,
            normalized_doppler: p.normalized_doppler,
            pfa: p.pfa,
            interference: Interference::Exponential { rho: p.rho },
        };
        match scenario
            .validate()
            .and_then(|_| scenario.covariance().map(|_| ()))
        {
            Ok(()) => into_handle(RcScenario(scenario), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from `rc_scenario_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_scenario_free(scenario: *mut RcScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Unit-energy P3 code of length `pulses`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_code_p3(pulses: usize, out: *mut *mut RcCode) -> RcStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_code_p3");
        }
        if pulses == 0 {
            return fail(RcStatus::InvalidArgument, "pulses must be at least 1");
        }
        into_handle(RcCode(p3_code(pulses)), out)
    })
}

/// Bundled length-32 generalized Barker code.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_code_generalized_barker(out: *mut *mut RcCode) -> RcStatus {
    guarded(|| {
        if out.is_null() {
            return fail(
                RcStatus::NullPointer,
                "null argument to rc_code_generalized_barker",
            );
        }
        into_handle(RcCode(generalized_barker_32()), out)
    })
}

/// Build a code from separate real and imaginary arrays, scaled to unit energy.
///
/// # Safety
/// `re` and `im` must each point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_code_from_parts(
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut RcCode,
) -> RcStatus {
    guarded(|| {
        if re.is_null() || im.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_code_from_parts");
        }
        let (re, im) = unsafe {
            (
                std::slice::from_raw_parts(re, len),
                std::slice::from_raw_parts(im, len),
            )
        };
        let entries: Vec<C64> = re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect();
        match CodeVector::from_slice(&entries).and_then(|c| CodeVector::normalized(c.into_inner()))
        {
            Ok(c) => into_handle(RcCode(c), out),
            Err(e) => from_error(e),
        }
    })
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live code handle.
#[no_mangle]
pub unsafe extern "C" fn rc_code_len(code: *const RcCode) -> usize {
    if code.is_null() {
        0
    } else {
        unsafe { &*code }.0.len()
    }
}

/// Copy the entries into `re` and `im`, each of capacity `len`.
///
/// # Safety
/// `code` must be a live code handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_code_copy(
    code: *const RcCode,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> RcStatus {
    guarded(|| {
        if code.is_null() || re.is_null() || im.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_code_copy");
        }
        let c = unsafe { &*code }.0.entries();
        if len < c.len() {
            return fail(
                RcStatus::InvalidArgument,
                format!("buffer holds {len} entries, code has {}", c.len()),
            );
        }
        let (re, im) = unsafe {
            (
                std::slice::from_raw_parts_mut(re, len),
                std::slice::from_raw_parts_mut(im, len),
            )
        };
        for (k, z) in c.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        RcStatus::Ok
    })
}

/// # Safety
/// `code` must be null or a live code handle.
#[no_mangle]
pub unsafe extern "C" fn rc_code_free(code: *mut RcCode) {
    if !code.is_null() {
        drop(unsafe { Box::from_raw(code) });
    }
}

/// Design a code for weight `beta` and similarity radius `zeta` with default solver options.
///
/// # Safety
/// `scenario` and `reference` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_synthesize(
    scenario: *const RcScenario,
    reference: *const RcCode,
    beta: f64,
    zeta: f64,
    out: *mut *mut RcResult,
) -> RcStatus {
    guarded(|| {
        if scenario.is_null() || reference.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_synthesize");
        }
        let (s, r) = unsafe { (&(*scenario).0, &(*reference).0) };
        match synthesize(s, beta, zeta, r, &SolverOptions::default()) {
            Ok(res) => into_handle(RcResult(res), out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `result` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_result_metrics(
    result: *const RcResult,
    out: *mut RcMetrics,
) -> RcStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_result_metrics");
        }
        let r = &unsafe { &*result }.0;
        let m = RcMetrics {
            sinr_db: r.sinr_db,
            crb_tau: r.crb.crb_tau,
            crb_fd: r.crb.crb_fd,
            det_crb: r.crb.det,
            pd: r.pd,
            papr: r.papr,
            isl_db: r.isl_db,
            upsilon_db: r.upsilon_db,
            objective_db: r.augmented_db,
            iterations: r.trace.iterations(),
        };
        unsafe { ptr::write(out, m) };
        RcStatus::Ok
    })
}

/// New code handle holding the designed code.
///
/// # Safety
/// `result` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_result_code(
    result: *const RcResult,
    out: *mut *mut RcCode,
) -> RcStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_result_code");
        }
        into_handle(RcCode(unsafe { &*result }.0.code.clone()), out)
    })
}

/// # Safety
/// `result` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn rc_result_free(result: *mut RcResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// First-order Marcum Q function.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_marcum_q1(a: f64, b: f64, out: *mut f64) -> RcStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RcStatus::NullPointer, "null argument to rc_marcum_q1");
        }
        match marcum_q1(a, b) {
            Ok(q) => {
                unsafe { *out = q };
                RcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the buffer size needed for the full message including the terminator.
///
/// # Safety
/// `buf` must be null or hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len() + 1
    })
}

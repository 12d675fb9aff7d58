//! C ABI over `steersim`.
//!
//! Every fallible call returns a [`SteersimStatus`]; on failure the message
//! is available from [`steersim_last_error`] on the same thread. States are
//! opaque handles created by [`steersim_state_ghz`] and released with
//! [`steersim_state_free`]. Pair settings are the GHZ-optimal directions for
//! Charlie measuring `x` then `y`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use steersim::measurement::{local_pair_update, luders_update};
use steersim::scenario::{parse_axes, run_scenario, Protocol, ScenarioConfig};
use steersim::state::{bloch_form, compress, ghz, CompressionBasis, DensityMatrix};
use steersim::steering::{
    classical_bound, closed_form_local, closed_form_nonlocal, ellipsoid, steering_parameter, SettingStrength,
    SteeredParty, StrengthHistory,
};
use steersim::{ComplexMatrix, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteersimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    NotCompressible = 4,
    Unsupported = 5,
    DegenerateSteerer = 6,
    Ambiguous = 7,
    Config = 8,
    Internal = 9,
}

impl From<&Error> for SteersimStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionOverflow { .. } | Error::Shape(_) => SteersimStatus::InvalidArgument,
            Error::NotHermitian { .. } | Error::NotPsd { .. } | Error::InvalidState(_) => SteersimStatus::InvalidState,
            Error::NotCompressible { .. } => SteersimStatus::NotCompressible,
            Error::UnsupportedSize { .. } => SteersimStatus::Unsupported,
            Error::DegenerateSteerer { .. } => SteersimStatus::DegenerateSteerer,
            Error::AmbiguousSetting(_) => SteersimStatus::Ambiguous,
            Error::Config(_) => SteersimStatus::Config,
            Error::Consistency(_) => SteersimStatus::Internal,
        }
    }
}

/// Opaque three-qubit state plus the pair settings applied to it.
pub struct SteersimState {
    rho: DensityMatrix,
    protocol: Protocol,
}

/// Which qubit is steered: 0 for Charlie, 1 for the compressed `AB` qubit.
pub const STEERSIM_PARTY_CHARLIE: c_int = 0;
pub const STEERSIM_PARTY_AB: c_int = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SteersimEllipsoid {
    pub center: [f64; 3],
    /// Row-major 3x3.
    pub matrix: [f64; 9],
    /// Descending.
    pub semiaxes: [f64; 3],
    /// Row `k` is the axis of `semiaxes[k]`.
    pub orientation: [f64; 9],
    pub volume: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SteersimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SteersimStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} is null"));
            SteersimStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(&msg);
            SteersimStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            SteersimStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SteersimStatus::Internal
        }
    }
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not UTF-8")))
}

unsafe fn state_mut<'a>(p: *mut SteersimState) -> Result<&'a mut SteersimState, Failure> {
    p.as_mut().ok_or(Failure::Null("state"))
}

fn charlie_dirs(protocol: &Protocol) -> &[ComplexMatrix] {
    &protocol.charlie
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn steersim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New GHZ state handle, or null on failure.
#[no_mangle]
pub extern "C" fn steersim_state_ghz() -> *mut SteersimState {
    let rho = ghz();
    match Protocol::derive(&rho, &ScenarioConfig::default()) {
        Ok(protocol) => Box::into_raw(Box::new(SteersimState { rho, protocol })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `state` must come from [`steersim_state_ghz`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn steersim_state_free(state: *mut SteersimState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Applies one pair's averaged nonlocal measurement with strengths `lambdas[0..n]`.
///
/// # Safety
/// `state` must be a live handle and `lambdas` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn steersim_state_apply_nonlocal(
    state: *mut SteersimState,
    lambdas: *const f64,
    n: usize,
) -> SteersimStatus {
    guard(|| {
        let s = state_mut(state)?;
        let strengths = lambdas_to_strengths(slice_arg(lambdas, n, "lambdas")?, &s.protocol)?;
        let settings = s.protocol.nonlocal_settings(&strengths)?;
        s.rho = luders_update(&s.rho, &settings)?;
        Ok(())
    })
}

/// Applies one pair's local measurement, `A` with `etas`, `B` with `gammas`.
///
/// # Safety
/// `state` must be a live handle; `etas` and `gammas` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn steersim_state_apply_local(
    state: *mut SteersimState,
    etas: *const f64,
    gammas: *const f64,
    n: usize,
) -> SteersimStatus {
    guard(|| {
        let s = state_mut(state)?;
        check_settings(n, &s.protocol)?;
        let etas = slice_arg(etas, n, "etas")?;
        let gammas = slice_arg(gammas, n, "gammas")?;
        let strengths = etas
            .iter()
            .zip(gammas)
            .map(|(&e, &g)| SettingStrength::local(e, g))
            .collect::<steersim::Result<Vec<_>>>()?;
        let (a, b) = s.protocol.local_settings(&strengths)?;
        s.rho = local_pair_update(&s.rho, &a, &b)?;
        Ok(())
    })
}

/// Steering functional of the current state for a pair with strengths `lambdas[0..n]`.
///
/// # Safety
/// `state` must be a live handle, `lambdas` must point to `n` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn steersim_state_steering(
    state: *const SteersimState,
    lambdas: *const f64,
    n: usize,
    out: *mut f64,
) -> SteersimStatus {
    guard(|| {
        let s = state.as_ref().ok_or(Failure::Null("state"))?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let lambdas = slice_arg(lambdas, n, "lambdas")?;
        check_settings(n, &s.protocol)?;
        let dirs: Vec<ComplexMatrix> = s.protocol.pair_directions.iter().map(|d| d.matrix()).collect();
        *out = steering_parameter(&s.rho, &dirs, lambdas, charlie_dirs(&s.protocol))?;
        Ok(())
    })
}

/// Ellipsoid of the compressed current state; `party` is one of the
/// `STEERSIM_PARTY_*` constants.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn steersim_state_ellipsoid(
    state: *const SteersimState,
    party: c_int,
    out: *mut SteersimEllipsoid,
) -> SteersimStatus {
    guard(|| {
        let s = state.as_ref().ok_or(Failure::Null("state"))?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let party = match party {
            STEERSIM_PARTY_CHARLIE => SteeredParty::Charlie,
            STEERSIM_PARTY_AB => SteeredParty::Ab,
            other => return Err(Failure::Arg(format!("unknown party {other}"))),
        };
        let c = compress(&s.rho, CompressionBasis::default())?;
        let e = ellipsoid(&bloch_form(&c.state)?, party)?;
        let flat = |m: [[f64; 3]; 3]| {
            let mut f = [0.0; 9];
            for r in 0..3 {
                f[3 * r..3 * r + 3].copy_from_slice(&m[r]);
            }
            f
        };
        *out = SteersimEllipsoid {
            center: e.center,
            matrix: flat(e.matrix),
            semiaxes: e.semiaxes,
            orientation: flat(e.orientation),
            volume: e.volume,
        };
        Ok(())
    })
}

/// Classical bound for a comma-separated axis list such as `"x,y"`.
///
/// # Safety
/// `axes` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn steersim_classical_bound(axes: *const c_char, out: *mut f64) -> SteersimStatus {
    guard(|| {
        let axes = parse_axes(str_arg(axes, "axes")?)?;
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let dirs: Vec<ComplexMatrix> = axes.iter().map(|a| a.matrix()).collect();
        *out = classical_bound(&dirs)?;
        Ok(())
    })
}

/// Closed-form steering value of pair `i` (1-based) for a two-setting
/// history. `lambdas` holds `pairs * 2` strengths, pair-major. `gammas` may
/// be null (then `γ = √λ`); `local` nonzero selects local measurements.
///
/// # Safety
/// `lambdas` (and `gammas` unless null) must point to `pairs * 2` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn steersim_closed_form(
    lambdas: *const f64,
    gammas: *const f64,
    pairs: usize,
    i: usize,
    local: c_int,
    out: *mut f64,
) -> SteersimStatus {
    guard(|| {
        let len = pairs.checked_mul(2).ok_or_else(|| Failure::Arg("pairs overflows".into()))?;
        let lambdas = slice_arg(lambdas, len, "lambdas")?;
        let gammas = if gammas.is_null() { None } else { Some(slice_arg(gammas, len, "gammas")?) };
        let out = out.as_mut().ok_or(Failure::Null("out"))?;
        let rows = (0..pairs)
            .map(|p| {
                (0..2)
                    .map(|k| {
                        let l = lambdas[2 * p + k];
                        match gammas {
                            Some(g) => SettingStrength::with_gamma(l, g[2 * p + k]),
                            None => SettingStrength::symmetric(l),
                        }
                    })
                    .collect::<steersim::Result<Vec<_>>>()
            })
            .collect::<steersim::Result<Vec<_>>>()?;
        let h = StrengthHistory::new(rows)?;
        if i == 0 || i > pairs {
            return Err(Failure::Arg(format!("pair index {i} outside 1..={pairs}")));
        }
        *out = if local != 0 { closed_form_local(&h, i)? } else { closed_form_nonlocal(&h, i)? };
        Ok(())
    })
}

/// Runs a JSON scenario and stores the JSON result in `*out`, to be released
/// with [`steersim_string_free`].
///
/// # Safety
/// `config_json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn steersim_run_scenario(config_json: *const c_char, out: *mut *mut c_char) -> SteersimStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let run = run_scenario(&ScenarioConfig::from_json(text)?)?;
        let json = serde_json::to_string(&run).map_err(|e| Failure::Arg(e.to_string()))?;
        *out = CString::new(json).map_err(|e| Failure::Arg(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`steersim_run_scenario`] or be null.
#[no_mangle]
pub unsafe extern "C" fn steersim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn check_settings(n: usize, protocol: &Protocol) -> Result<(), Failure> {
    if n != protocol.pair_directions.len() {
        return Err(Failure::Arg(format!(
            "expected {} strengths, got {n}",
            protocol.pair_directions.len()
        )));
    }
    Ok(())
}

fn lambdas_to_strengths(lambdas: &[f64], protocol: &Protocol) -> Result<Vec<SettingStrength>, Failure> {
    check_settings(lambdas.len(), protocol)?;
    Ok(lambdas
        .iter()
        .map(|&l| SettingStrength::symmetric(l))
        .collect::<steersim::Result<Vec<_>>>()?)
}

//! C interface to the bistab library.
//!
//! Every function returns a [`BistabStatus`]; on failure the message is kept
//! per thread and can be copied out with [`bistab_last_error`]. Parameters
//! live behind an opaque [`BistabParams`] handle. Frequencies and rates cross
//! the boundary in GHz (ordinary frequency), matching the configuration files.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bistab::error::Error;
use bistab::fpe::{fpe_first_moment, hyp0f2};
use bistab::master::{model_steady_state, observables};
use bistab::meanfield::mb_steady_states;
use bistab::models::{critical_photon_number, device_preset, ghz, Model, SystemParams};
use num_complex::Complex64;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BistabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownPreset = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque parameter set.
pub struct BistabParams(SystemParams);

/// Hamiltonian selector for [`bistab_steady_observables`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BistabModel {
    Jc = 0,
    Gjc = 1,
    Duffing = 2,
}

/// Steady-state expectation values. `abs_sigma_minus` is NaN for the
/// cavity-only model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BistabObservables {
    pub re_a: f64,
    pub im_a: f64,
    pub n_photon: f64,
    pub sigma_z: f64,
    pub abs_sigma_minus: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> BistabStatus {
    match e {
        Error::UnknownPreset(_) => BistabStatus::UnknownPreset,
        Error::InvalidParameter { .. } | Error::Config(_) | Error::InvalidDimension(_) | Error::SingularDetuning => {
            BistabStatus::InvalidArgument
        }
        _ => BistabStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (BistabStatus, String)>) -> BistabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BistabStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            BistabStatus::Panic
        }
    }
}

fn lib(e: Error) -> (BistabStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (BistabStatus, String) {
    (BistabStatus::NullPointer, format!("{name} is null"))
}

/// Borrows a handle.
///
/// # Safety
/// `p` must be null or a live handle from this library.
unsafe fn params<'a>(p: *const BistabParams) -> Result<&'a SystemParams, (BistabStatus, String)> {
    p.as_ref().map(|h| &h.0).ok_or_else(|| null("params"))
}

/// Writes through an out-pointer.
///
/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn put<T>(out: *mut T, v: T, name: &str) -> Result<(), (BistabStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bistab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bistab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a handle from a named preset (`D1`, `D2`, `FIG2`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn bistab_params_preset(name: *const c_char, out: *mut *mut BistabParams) -> BistabStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (BistabStatus::InvalidArgument, "preset name is not UTF-8".to_string()))?;
        let p = device_preset(name).map_err(lib)?;
        put(out, Box::into_raw(Box::new(BistabParams(p))), "out")
    })
}

/// Creates a handle from explicit values: frequencies and rates in GHz,
/// temperature in kelvin. The drive starts off, parked on the cavity.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bistab_params_new(
    f_c: f64,
    f_q: f64,
    g: f64,
    chi: f64,
    kappa: f64,
    gamma: f64,
    gamma_phi: f64,
    temperature: f64,
    out: *mut *mut BistabParams,
) -> BistabStatus {
    guard(|| {
        let p = SystemParams {
            omega_c: ghz(f_c),
            omega_q: ghz(f_q),
            g: ghz(g),
            chi: ghz(chi),
            eps_d: 0.0,
            omega_d: ghz(f_c),
            kappa: ghz(kappa),
            gamma: ghz(gamma),
            gamma_phi: ghz(gamma_phi),
            temperature,
        };
        p.validate().map_err(lib)?;
        put(out, Box::into_raw(Box::new(BistabParams(p))), "out")
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bistab_params_free(p: *mut BistabParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets the drive frequency (GHz) and strength as `ε_d / (2κ)`.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bistab_params_set_drive(p: *mut BistabParams, f_d: f64, scale: f64) -> BistabStatus {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| null("params"))?;
        let next = h.0.with_drive_frequency(ghz(f_d)).with_drive_scale(scale);
        next.validate().map_err(lib)?;
        h.0 = next;
        Ok(())
    })
}

/// `δ² / (4g²)`.
///
/// # Safety
/// `p` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn bistab_critical_photon_number(p: *const BistabParams, out: *mut f64) -> BistabStatus {
    guard(|| {
        let p = params(p)?;
        put(out, critical_photon_number(p.g, p.delta()).map_err(lib)?, "out")
    })
}

/// Mean-field steady states, ordered by photon number. Writes up to
/// `capacity` photon numbers and stability flags (1 stable, 0 unstable) and
/// the number of roots to `count`. Returns `BufferTooSmall` when `capacity`
/// is short; `count` is still set.
///
/// # Safety
/// `photons` and `stable` must be valid for `capacity` elements; `count`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn bistab_meanfield_roots(
    p: *const BistabParams,
    photons: *mut f64,
    stable: *mut i32,
    capacity: usize,
    count: *mut usize,
) -> BistabStatus {
    guard(|| {
        let p = params(p)?;
        let roots = mb_steady_states(p).map_err(lib)?;
        put(count, roots.len(), "count")?;
        if roots.len() > capacity {
            return Err((BistabStatus::BufferTooSmall, format!("{} roots, capacity {capacity}", roots.len())));
        }
        if photons.is_null() || stable.is_null() {
            return Err(null("photons/stable"));
        }
        for (i, r) in roots.iter().enumerate() {
            *photons.add(i) = r.photon_number();
            *stable.add(i) = i32::from(r.stable);
        }
        Ok(())
    })
}

/// Master-equation steady state at a fixed Fock cutoff. `levels` is the
/// transmon level count for `Gjc` and ignored otherwise.
///
/// # Safety
/// `p` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn bistab_steady_observables(
    p: *const BistabParams,
    model: BistabModel,
    levels: usize,
    cutoff: usize,
    out: *mut BistabObservables,
) -> BistabStatus {
    guard(|| {
        let p = params(p)?;
        let m = match model {
            BistabModel::Jc => Model::Jc,
            BistabModel::Gjc => Model::Gjc(levels),
            BistabModel::Duffing => Model::Duffing,
        };
        let (spec, rho) = model_steady_state(p, m, cutoff).map_err(lib)?;
        let o = observables(&rho, &spec).map_err(lib)?;
        let v = BistabObservables {
            re_a: o.alpha.re,
            im_a: o.alpha.im,
            n_photon: o.n_photon,
            sigma_z: o.sigma_z.unwrap_or(f64::NAN),
            abs_sigma_minus: o.sigma_minus.map_or(f64::NAN, |s| s.norm()),
        };
        put(out, v, "out")
    })
}

/// Analytic steady-state `⟨a⟩` of the effective Fokker-Planck model.
///
/// # Safety
/// `p` must be a live handle; `re` and `im` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bistab_fpe_first_moment(p: *const BistabParams, re: *mut f64, im: *mut f64) -> BistabStatus {
    guard(|| {
        let a = fpe_first_moment(params(p)?).map_err(lib)?;
        put(re, a.re, "re")?;
        put(im, a.im, "im")
    })
}

/// `₀F₂(; a, b; z)` for complex arguments.
///
/// # Safety
/// `re` and `im` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bistab_hyp0f2(
    a_re: f64,
    a_im: f64,
    b_re: f64,
    b_im: f64,
    z_re: f64,
    z_im: f64,
    re: *mut f64,
    im: *mut f64,
) -> BistabStatus {
    guard(|| {
        let v = hyp0f2(Complex64::new(a_re, a_im), Complex64::new(b_re, b_im), Complex64::new(z_re, z_im))
            .map_err(lib)?;
        put(re, v.re, "re")?;
        put(im, v.im, "im")
    })
}

//! C ABI over `aads-core`.
//!
//! Models are opaque handles created from a JSON model spec. Every call
//! returns an [`AadsStatus`] code; the message of the last failure on the
//! calling thread is available from [`aads_last_error`]. Panics are caught at
//! the boundary and reported as `AADS_STATUS_PANIC`.

use aads_core::experiments;
use aads_core::fefferman_graham::{fg_expand, BoundaryData};
use aads_core::geodesic::{self, GeodesicState, StopRule};
use aads_core::spacetimes::{build_model, BoundaryPoint, ModelSpec};
use aads_core::tensor_core::{einstein_residual, metric_at, SpacetimeModel};
use aads_core::AadsError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes. Values 1–15 mirror the library error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AadsStatus {
    Ok = 0,
    Domain = 1,
    Stencil = 2,
    Construction = 3,
    Config = 4,
    Coverage = 5,
    DegeneratePlane = 6,
    Singularity = 7,
    NonConvex = 8,
    Ambiguous = 9,
    Precondition = 10,
    Unsupported = 11,
    OutOfRegion = 12,
    OffHorizon = 13,
    Divergence = 14,
    Indeterminate = 15,
    /// A required pointer was null.
    NullPointer = 100,
    /// A string argument was not valid UTF-8 or JSON.
    InvalidInput = 101,
    Panic = 102,
}

/// Opaque spacetime model.
pub struct AadsModel {
    inner: SpacetimeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &AadsError) -> AadsStatus {
    use AadsStatus::*;
    const ALL: [AadsStatus; 15] = [
        Domain, Stencil, Construction, Config, Coverage, DegeneratePlane, Singularity, NonConvex, Ambiguous,
        Precondition, Unsupported, OutOfRegion, OffHorizon, Divergence, Indeterminate,
    ];
    ALL.get((e.code() - 1) as usize).copied().unwrap_or(Panic)
}

struct Fail(AadsStatus, String);

impl From<AadsError> for Fail {
    fn from(e: AadsError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AadsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AadsStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("panic inside aads");
            AadsStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(AadsStatus::NullPointer, "null pointer argument".into())
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn model<'a>(m: *const AadsModel) -> Result<&'a SpacetimeModel, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(null)
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail(AadsStatus::InvalidInput, e.to_string()))
}

fn check_dim(m: &SpacetimeModel, n: usize) -> Result<(), Fail> {
    if n != m.d {
        return Err(Fail(AadsStatus::Domain, format!("expected {} coordinates, got {n}", m.d)));
    }
    Ok(())
}

/// Message of the last failed call on this thread (empty if none). Valid until the next call.
#[no_mangle]
pub extern "C" fn aads_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a model from a JSON spec such as `{"family": "ads_global", "d": 4, "R": 1.0}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aads_model_new(spec_json: *const c_char, out: *mut *mut AadsModel) -> AadsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let spec: ModelSpec = serde_json::from_str(text(spec_json)?).map_err(|e| Fail(AadsStatus::InvalidInput, e.to_string()))?;
        let inner = build_model(&spec)?;
        *out = Box::into_raw(Box::new(AadsModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `m` must come from `aads_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aads_model_free(m: *mut AadsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Spacetime dimension of the model, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn aads_model_dim(m: *const AadsModel) -> usize {
    m.as_ref().map_or(0, |m| m.inner.d)
}

/// Writes the `n × n` metric (row-major) at the chart point `x` into `out`.
///
/// # Safety
/// `x` must hold `n` values and `out` room for `n * n`.
#[no_mangle]
pub unsafe extern "C" fn aads_metric_at(m: *const AadsModel, x: *const f64, n: usize, out: *mut f64) -> AadsStatus {
    guard(|| {
        let model = model(m)?;
        check_dim(model, n)?;
        let x = slice(x, n)?;
        if out.is_null() {
            return Err(null());
        }
        let g = metric_at(model, &model.point(x))?;
        std::slice::from_raw_parts_mut(out, n * n).copy_from_slice(&g);
        Ok(())
    })
}

/// Largest component of `Ric − (2Λ/(d−2)) g` at `x`.
///
/// # Safety
/// `x` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn aads_einstein_residual(m: *const AadsModel, x: *const f64, n: usize, lambda: f64, out: *mut f64) -> AadsStatus {
    guard(|| {
        let model = model(m)?;
        check_dim(model, n)?;
        let x = slice(x, n)?;
        if out.is_null() {
            return Err(null());
        }
        *out = einstein_residual(model, &model.point(x), lambda)?;
        Ok(())
    })
}

/// Integrates a geodesic from `(x, v)` up to `max_affine` with boundary
/// detection. On a boundary hit writes `τ` to `tau`, `e` (length `n − 1`) to
/// `e` and 1 to `hit`; otherwise writes 0 to `hit`.
///
/// # Safety
/// `x`, `v` must hold `n` values, `e` room for `n − 1`; `tau` and `hit` must be valid.
#[no_mangle]
pub unsafe extern "C" fn aads_geodesic_boundary_hit(
    m: *const AadsModel,
    x: *const f64,
    v: *const f64,
    n: usize,
    max_affine: f64,
    tau: *mut f64,
    e: *mut f64,
    hit: *mut i32,
) -> AadsStatus {
    guard(|| {
        let model = model(m)?;
        check_dim(model, n)?;
        let (x, v) = (slice(x, n)?, slice(v, n)?);
        if tau.is_null() || e.is_null() || hit.is_null() {
            return Err(null());
        }
        let tr = geodesic::integrate(model, &GeodesicState::new(model.point(x), v), &StopRule::boundary(max_affine))?;
        match tr.boundary_hit() {
            Some(b) => {
                *tau = b.tau;
                std::slice::from_raw_parts_mut(e, n - 1).copy_from_slice(&b.e);
                *hit = 1;
            }
            None => *hit = 0,
        }
        Ok(())
    })
}

/// Time-delay fan of `n_directions` rays from the boundary point `(tau, e)`;
/// writes the smallest and largest delay past the antipodal point.
///
/// # Safety
/// `e` must hold `n_e` values; `min_delay`, `max_delay` must be valid.
#[no_mangle]
pub unsafe extern "C" fn aads_time_delay(
    m: *const AadsModel,
    tau: f64,
    e: *const f64,
    n_e: usize,
    n_directions: usize,
    min_delay: *mut f64,
    max_delay: *mut f64,
) -> AadsStatus {
    guard(|| {
        let model = model(m)?;
        let e = slice(e, n_e)?;
        if min_delay.is_null() || max_delay.is_null() {
            return Err(null());
        }
        let rep = experiments::time_delay(model, &BoundaryPoint::new(tau, e)?, n_directions)?;
        *min_delay = rep.min_delay;
        *max_delay = rep.max_delay;
        Ok(())
    })
}

/// Fefferman–Graham table for analytic boundary data (`"esu"` or
/// `"minkowski"`) as JSON. Free the string with `aads_string_free`.
///
/// # Safety
/// `boundary` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aads_fg_table_json(boundary: *const c_char, d: usize, order: usize, out: *mut *mut c_char) -> AadsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let data = match text(boundary)? {
            "esu" => BoundaryData::analytic_esu(d)?,
            "minkowski" => BoundaryData::analytic_minkowski(d)?,
            other => return Err(Fail(AadsStatus::InvalidInput, format!("unknown boundary {other}"))),
        };
        let json = fg_expand(&data, order)?.to_json();
        *out = CString::new(json).map_err(|e| Fail(AadsStatus::InvalidInput, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aads_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

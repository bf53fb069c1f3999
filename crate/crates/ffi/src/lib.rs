//! C interface to the `orthocal` calibration toolkit.
//!
//! Every function returns an [`OrthocalStatus`]; on failure the message is
//! available from [`orthocal_last_error`] on the same thread. Geometry and
//! calibration results are opaque handles released with their `_free` function.
//!
//! Array layouts:
//! - points, joints and offsets: `x, y, z`
//! - reduced double-posture data (6): `dx_y, dx_z, dy_x, dy_z, dz_x, dz_y`
//! - full double-posture data (12): plane blocks XY, YZ, XZ, each
//!   `c1_plus, c2_plus, c1_minus, c2_minus` (see [`orthocal_value_name`])
//! - single-posture data (6): `dz_x0, dz_y0, dz_x_plus, dz_x_minus, dz_y_plus, dz_y_minus`

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use orthocal::accuracy::{offset_covariance, EquationSet};
use orthocal::identification::{calibrate, CalibrationResult, Method};
use orthocal::kinematics::{
    direct_kinematics, inverse_kinematics, CartesianPoint, ConfigurationIndices, JointCoords,
    JointOffsets,
};
use orthocal::measurement::{
    predict_double_posture, predict_reduced, MeasurementSet, MeasurementShape,
};
use orthocal::{Error, Geometry};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthocalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    /// Point or joint values outside the reachable domain.
    Domain = 3,
    Singular = 4,
    /// The identification system lost rank.
    Rank = 5,
    /// The nonlinear solver did not converge.
    Convergence = 6,
    JointLimit = 7,
    /// Too many failed runs in a Monte-Carlo study.
    TooManyFailures = 8,
    /// Internal error; the message names it.
    Panic = 9,
}

/// Identification method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrthocalMethod {
    ClosedForm = 0,
    LinearSingle = 1,
    Linear6 = 2,
    Linear12 = 3,
    Nonlinear6 = 4,
    Nonlinear12 = 5,
}

impl From<OrthocalMethod> for Method {
    fn from(m: OrthocalMethod) -> Method {
        match m {
            OrthocalMethod::ClosedForm => Method::ClosedForm,
            OrthocalMethod::LinearSingle => Method::LinearSingle,
            OrthocalMethod::Linear6 => Method::Linear6,
            OrthocalMethod::Linear12 => Method::Linear12,
            OrthocalMethod::Nonlinear6 => Method::Nonlinear6,
            OrthocalMethod::Nonlinear12 => Method::Nonlinear12,
        }
    }
}

/// Opaque manipulator geometry.
pub struct OrthocalGeometry(Geometry);

/// Opaque calibration result.
pub struct OrthocalResult(CalibrationResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OrthocalStatus {
    match e {
        Error::Domain(_) => OrthocalStatus::Domain,
        Error::Limit { .. } => OrthocalStatus::JointLimit,
        Error::Singular(_) => OrthocalStatus::Singular,
        Error::Rank { .. } => OrthocalStatus::Rank,
        Error::Convergence { .. } => OrthocalStatus::Convergence,
        Error::TooManyFailures { .. } => OrthocalStatus::TooManyFailures,
        Error::InvalidInput(_) => OrthocalStatus::InvalidInput,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OrthocalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            OrthocalStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            OrthocalStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_error(&format!("internal error: {msg}"));
            OrthocalStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn read3(p: *const f64, what: &'static str) -> Result<[f64; 3], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

unsafe fn write_slice(dst: *mut f64, src: &[f64], what: &'static str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::Null(what));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn orthocal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn orthocal_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(s) => s,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// The prototype geometry (L = 310.25 mm, joint range -100..60 mm).
#[no_mangle]
pub unsafe extern "C" fn orthocal_geometry_prototype(
    out: *mut *mut OrthocalGeometry,
) -> OrthocalStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = Box::into_raw(Box::new(OrthocalGeometry(Geometry::PROTOTYPE)));
        Ok(())
    })
}

/// A geometry with the given leg length and joint range about it, mm.
#[no_mangle]
pub unsafe extern "C" fn orthocal_geometry_new(
    leg_length: f64,
    rho_min: f64,
    rho_max: f64,
    out: *mut *mut OrthocalGeometry,
) -> OrthocalStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let g = Geometry::new(leg_length, rho_min, rho_max)?;
        *out = Box::into_raw(Box::new(OrthocalGeometry(g)));
        Ok(())
    })
}

/// Releases a geometry; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn orthocal_geometry_free(geom: *mut OrthocalGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Joint readings `rho_out[3]` that place the tool at `p[3]` given `offsets[3]`.
#[no_mangle]
pub unsafe extern "C" fn orthocal_inverse_kinematics(
    geom: *const OrthocalGeometry,
    p: *const f64,
    offsets: *const f64,
    rho_out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        let p = CartesianPoint::from_array(read3(p, "p")?);
        let d = JointOffsets::from_array(read3(offsets, "offsets")?);
        let sol = inverse_kinematics(&p, &d, g, ConfigurationIndices::ASSEMBLY)?;
        write_slice(rho_out, &sol.joints.to_array(), "rho_out")
    })
}

/// Tool position `p_out[3]` for joint readings `rho[3]` and `offsets[3]`.
#[no_mangle]
pub unsafe extern "C" fn orthocal_direct_kinematics(
    geom: *const OrthocalGeometry,
    rho: *const f64,
    offsets: *const f64,
    p_out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        let rho = JointCoords::from_array(read3(rho, "rho")?);
        let d = JointOffsets::from_array(read3(offsets, "offsets")?);
        let (p, _) = direct_kinematics(&rho, &d, g)?;
        write_slice(p_out, &p.to_array(), "p_out")
    })
}

/// Noise-free reduced deviations `out[6]` for `offsets[3]`.
#[no_mangle]
pub unsafe extern "C" fn orthocal_predict_reduced(
    geom: *const OrthocalGeometry,
    offsets: *const f64,
    out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        let d = JointOffsets::from_array(read3(offsets, "offsets")?);
        write_slice(out, &predict_reduced(&d, g)?.to_array(), "out")
    })
}

/// Noise-free full double-posture deviations `out[12]` for `offsets[3]`.
#[no_mangle]
pub unsafe extern "C" fn orthocal_predict_double(
    geom: *const OrthocalGeometry,
    offsets: *const f64,
    out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        let d = JointOffsets::from_array(read3(offsets, "offsets")?);
        write_slice(out, &predict_double_posture(&d, g)?.to_array(), "out")
    })
}

fn shape_of(method: Method) -> MeasurementShape {
    match method {
        Method::ClosedForm | Method::LinearSingle => MeasurementShape::SinglePosture,
        Method::Linear6 | Method::Nonlinear6 => MeasurementShape::DoubleReduced,
        Method::Linear12 | Method::Nonlinear12 => MeasurementShape::DoubleFull,
    }
}

/// Number of measurement values `method` takes (6 or 12).
#[no_mangle]
pub extern "C" fn orthocal_value_count(method: OrthocalMethod) -> usize {
    shape_of(method.into()).names().len()
}

/// Name of input value `index` for `method`, or null when out of range.
/// The string is static.
#[no_mangle]
pub extern "C" fn orthocal_value_name(method: OrthocalMethod, index: usize) -> *const c_char {
    static NAMES: OnceLock<Vec<Vec<CString>>> = OnceLock::new();
    let names = NAMES.get_or_init(|| {
        [
            MeasurementShape::SinglePosture,
            MeasurementShape::DoubleReduced,
            MeasurementShape::DoubleFull,
        ]
        .map(|shape| {
            shape
                .names()
                .into_iter()
                .map(|n| CString::new(n).unwrap())
                .collect()
        })
        .to_vec()
    });
    let shape_index = match shape_of(method.into()) {
        MeasurementShape::SinglePosture => 0,
        MeasurementShape::DoubleReduced => 1,
        MeasurementShape::DoubleFull => 2,
    };
    names[shape_index]
        .get(index)
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Identifies the joint offsets from `n` measurement values in the order of
/// [`orthocal_value_name`]. The result is written to `*out` and must be freed.
#[no_mangle]
pub unsafe extern "C" fn orthocal_calibrate(
    geom: *const OrthocalGeometry,
    method: OrthocalMethod,
    values: *const f64,
    n: usize,
    out: *mut *mut OrthocalResult,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let method = Method::from(method);
        let values = std::slice::from_raw_parts(values, n);
        let set = MeasurementSet::from_values(shape_of(method), values)?;
        let result = calibrate(&set, method, g)?;
        *out = Box::into_raw(Box::new(OrthocalResult(result)));
        Ok(())
    })
}

/// Releases a calibration result; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_free(result: *mut OrthocalResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Identified offsets `out[3]`, mm.
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_offsets(
    result: *const OrthocalResult,
    out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        write_slice(out, &r.offsets.to_array(), "out")
    })
}

/// Residual RMS and noise estimate, mm. Either output may be null.
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_fit(
    result: *const OrthocalResult,
    residual_rms: *mut f64,
    sigma_hat: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        if !residual_rms.is_null() {
            *residual_rms = r.residual_rms;
        }
        if !sigma_hat.is_null() {
            *sigma_hat = r.sigma_hat;
        }
        Ok(())
    })
}

/// Number of residuals held by the result.
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_residual_count(result: *const OrthocalResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.residuals.len())
}

/// Copies residual `index` (observed minus predicted, mm) and its name into
/// `value` and `name` (`name_len` bytes including the terminator, may be null).
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_residual(
    result: *const OrthocalResult,
    index: usize,
    value: *mut f64,
    name: *mut c_char,
    name_len: usize,
) -> OrthocalStatus {
    guard(|| {
        let r = &get(result, "result")?.0;
        let v = *r
            .residuals
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("residual index {index} out of range")))?;
        if value.is_null() {
            return Err(Failure::Null("value"));
        }
        *value = v;
        if !name.is_null() && name_len > 0 {
            let bytes = r.residual_names[index].as_bytes();
            let n = bytes.len().min(name_len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), name, n);
            *name.add(n) = 0;
        }
        Ok(())
    })
}

/// Solver iterations (zero for linear methods).
#[no_mangle]
pub unsafe extern "C" fn orthocal_result_iterations(result: *const OrthocalResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.iterations)
}

/// Analytic offset covariance `v_out[9]` (row major, mm^2) and `sigma_rho_out`
/// for gauge noise `sigma`; `equations` is 6 or 12.
#[no_mangle]
pub unsafe extern "C" fn orthocal_offset_covariance(
    geom: *const OrthocalGeometry,
    sigma: f64,
    equations: u32,
    v_out: *mut f64,
    sigma_rho_out: *mut f64,
) -> OrthocalStatus {
    guard(|| {
        let g = &get(geom, "geom")?.0;
        let set = match equations {
            6 => EquationSet::Six,
            12 => EquationSet::Twelve,
            other => {
                return Err(
                    Error::InvalidInput(format!("equations must be 6 or 12, got {other}")).into(),
                )
            }
        };
        let cov = offset_covariance(g, sigma, set)?;
        if !v_out.is_null() {
            let rows: Vec<f64> = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| cov.v[(i, j)])
                .collect();
            write_slice(v_out, &rows, "v_out")?;
        }
        if !sigma_rho_out.is_null() {
            *sigma_rho_out = cov.sigma_rho;
        }
        Ok(())
    })
}

//! C ABI over `spinc-core`.
//!
//! Objects are opaque handles created by `*_new` functions and released by the
//! matching `*_free`. Every fallible call returns a `SpincStatus`; on failure the
//! message is available from `spinc_last_error` on the same thread. Complex
//! vectors are passed as interleaved `(re, im)` pairs of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spinc_core::analysis::{index_prediction, BundleSpec};
use spinc_core::clifford::clifford_generators;
use spinc_core::config::parse_config;
use spinc_core::eigensolve::{smallest_eigenvalues, smallest_of_square, EigenRequest, EigenResult};
use spinc_core::gauge::assign_line_bundle;
use spinc_core::geometry::{build_sphere_model, build_torus_model, ModelManifold};
use spinc_core::linalg::C64;
use spinc_core::operators::{
    covariant_laplacian, dirac_operator_with, lichnerowicz_rhs_with, schrodinger_operator, LinearOperator,
    SparseHermitianOperator, WilsonParams,
};
use spinc_core::report::write_report;
use spinc_core::runner::run;
use spinc_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpincStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Indeterminate = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpincOperatorKind {
    /// Dirac operator, with the mass term when `wilson_strength > 0`.
    Dirac = 0,
    /// `Δ_k - kτ`.
    Schrodinger = 1,
    /// Covariant Laplacian.
    Laplacian = 2,
    /// Lichnerowicz right-hand side matching `Dirac` with the same mass term.
    LichnerowiczRhs = 3,
}

/// Model manifold together with the bundle data.
pub struct SpincModel {
    model: ModelManifold,
    bundle: BundleSpec,
}

pub struct SpincOperator {
    op: SparseHermitianOperator,
}

pub struct SpincSpectrum {
    result: EigenResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpincStatus {
    match e {
        Error::Config { .. } | Error::Parse { .. } => SpincStatus::Config,
        Error::IndeterminateCount { .. }
        | Error::IndeterminateSeparation { .. }
        | Error::WindowBeyondSpectrum { .. }
        | Error::NotConverged { .. } => SpincStatus::Indeterminate,
        Error::DenseNoConvergence(_) | Error::GaugeInconsistent { .. } | Error::VanishingDegreeZero { .. } => {
            SpincStatus::Numerical
        }
        Error::Io(_) | Error::Json(_) => SpincStatus::Io,
        _ => SpincStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SpincStatus>) -> SpincStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpincStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SpincStatus::Panic
        }
    }
}

fn fail(e: Error) -> SpincStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> SpincStatus {
    set_error(format!("null pointer: {what}"));
    SpincStatus::NullPointer
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], SpincStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SpincStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SpincStatus::InvalidArgument
    })
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn spinc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Flat torus with `2n` sides, `n` symplectic coefficients and `n` Chern
/// numbers for `L` and for the twisted summand of `E`.
///
/// # Safety
/// Array arguments must point to the stated number of elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_torus_model_new(
    n: usize,
    sides: *const f64,
    resolution: usize,
    a: *const f64,
    chern: *const i64,
    rank_e: usize,
    chern_e: *const i64,
    out: *mut *mut SpincModel,
) -> SpincStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sides = slice(sides, 2 * n, "sides")?;
        let a = slice(a, n, "a")?;
        let chern = slice(chern, n, "chern")?;
        let chern_e = slice(chern_e, n, "chern_e")?;
        let model = build_torus_model(n, sides, resolution, a).map_err(fail)?;
        let bundle = BundleSpec::new(chern.to_vec(), rank_e, chern_e.to_vec()).map_err(fail)?;
        index_prediction(&model, &bundle, 1).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpincModel { model, bundle }));
        Ok(())
    })
}

/// Round sphere of radius `radius` with `∫ω = flux`, `L` of degree `flux`
/// and `E` of rank `rank_e` whose first summand has degree `chern_e`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_sphere_model_new(
    radius: f64,
    flux: f64,
    rank_e: usize,
    chern_e: i64,
    out: *mut *mut SpincModel,
) -> SpincStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = build_sphere_model(radius, flux).map_err(fail)?;
        let bundle = BundleSpec::new(model.periods.clone(), rank_e, vec![chern_e]).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpincModel { model, bundle }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from a `spinc_*_model_new` call, freed once.
#[no_mangle]
pub unsafe extern "C" fn spinc_model_free(model: *mut SpincModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The spectral-gap constant `λ` of the model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_model_lambda(model: *const SpincModel, out: *mut f64) -> SpincStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.model.lambda;
        Ok(())
    })
}

/// Closed-form index of `D_k^+`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_index_prediction(model: *const SpincModel, k: u32, out: *mut i64) -> SpincStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = index_prediction(&m.model, &m.bundle, k).map_err(fail)?.predicted;
        Ok(())
    })
}

/// Assemble an operator on `L^k ⊗ E` over a lattice model. `wilson_strength = 0`
/// selects the bare Dirac operator.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_operator_new(
    model: *const SpincModel,
    kind: SpincOperatorKind,
    k: u32,
    wilson_strength: f64,
    wilson_power: u32,
    out: *mut *mut SpincOperator,
) -> SpincStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(wilson_strength >= 0.0) || (wilson_strength > 0.0 && wilson_power == 0) {
            set_error("wilson_strength must be >= 0 and wilson_power >= 1".into());
            return Err(SpincStatus::InvalidArgument);
        }
        let gauge = assign_line_bundle(&m.model, k, &m.bundle.chern)
            .and_then(|g| g.with_auxiliary_bundle(m.bundle.rank_e, &m.bundle.chern_e))
            .map_err(fail)?;
        let wilson = (wilson_strength > 0.0).then_some(WilsonParams { strength: wilson_strength, power: wilson_power });
        let algebra = || clifford_generators(m.model.n).and_then(|a| a.with_symplectic(&m.model.j0_eigenvalues));
        let op = match kind {
            SpincOperatorKind::Dirac => algebra().and_then(|a| dirac_operator_with(&m.model, &gauge, &a, wilson)),
            SpincOperatorKind::Schrodinger => schrodinger_operator(&m.model, &gauge),
            SpincOperatorKind::Laplacian => covariant_laplacian(&m.model, &gauge),
            SpincOperatorKind::LichnerowiczRhs => algebra().and_then(|a| lichnerowicz_rhs_with(&m.model, &gauge, &a, wilson)),
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(SpincOperator { op }));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from `spinc_operator_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn spinc_operator_free(op: *mut SpincOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Complex dimension of the operator, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinc_operator_dim(op: *const SpincOperator) -> usize {
    op.as_ref().map(|o| o.op.dim()).unwrap_or(0)
}

/// `y = A x` on interleaved complex vectors of `2 * dim` doubles.
///
/// # Safety
/// `x` and `y` must each hold `2 * len` doubles and must not overlap.
#[no_mangle]
pub unsafe extern "C" fn spinc_operator_apply(op: *const SpincOperator, x: *const f64, y: *mut f64, len: usize) -> SpincStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        let n = o.op.dim();
        if len != n {
            set_error(format!("vector length {len} for an operator of dimension {n}"));
            return Err(SpincStatus::InvalidArgument);
        }
        if y.is_null() {
            return Err(null("y"));
        }
        let xs = slice(x, 2 * n, "x")?;
        let v: Vec<C64> = xs.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect();
        let r = o.op.apply_vec(&v);
        let ys = std::slice::from_raw_parts_mut(y, 2 * n);
        for (i, z) in r.iter().enumerate() {
            ys[2 * i] = z.re;
            ys[2 * i + 1] = z.im;
        }
        Ok(())
    })
}

/// The `count` smallest eigenvalues of the operator, or of its square when
/// `square` is nonzero.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_lowest_eigenvalues(
    op: *const SpincOperator,
    count: usize,
    square: i32,
    tolerance: f64,
    seed: u64,
    out: *mut *mut SpincSpectrum,
) -> SpincStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let req = EigenRequest::new(count).tolerance(tolerance).seed(seed);
        req.validate(o.op.dim()).map_err(fail)?;
        let result = if square != 0 {
            smallest_of_square(&o.op, &req, None)
        } else {
            smallest_eigenvalues(&o.op, &req, None)
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(SpincSpectrum { result }));
        Ok(())
    })
}

/// Number of eigenvalues held, 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinc_spectrum_len(spectrum: *const SpincSpectrum) -> usize {
    spectrum.as_ref().map(|s| s.result.eigenvalues.len()).unwrap_or(0)
}

/// Copy up to `len` eigenvalues (ascending) and, if `residuals` is not null,
/// their residuals. Returns the number copied.
///
/// # Safety
/// `values` (and `residuals` when not null) must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spinc_spectrum_values(spectrum: *const SpincSpectrum, values: *mut f64, residuals: *mut f64, len: usize) -> usize {
    let Some(s) = spectrum.as_ref() else { return 0 };
    if values.is_null() {
        return 0;
    }
    let n = len.min(s.result.eigenvalues.len());
    ptr::copy_nonoverlapping(s.result.eigenvalues.as_ptr(), values, n);
    if !residuals.is_null() {
        ptr::copy_nonoverlapping(s.result.residuals.as_ptr(), residuals, n);
    }
    n
}

/// # Safety
/// `spectrum` must be null or a handle from `spinc_lowest_eigenvalues`, freed once.
#[no_mangle]
pub unsafe extern "C" fn spinc_spectrum_free(spectrum: *mut SpincSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Run a configuration given as text, writing the report into `out_dir`
/// (the config's own `output` when null). `exit_code` receives the CLI exit
/// code: 0 pass, 1 fail, 3 indeterminate.
///
/// # Safety
/// `config` must be a NUL-terminated string, `out_dir` null or one, `exit_code` writable.
#[no_mangle]
pub unsafe extern "C" fn spinc_run_config(config: *const c_char, out_dir: *const c_char, exit_code: *mut i32) -> SpincStatus {
    guard(|| {
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let mut cfg = parse_config(text(config, "config")?).map_err(fail)?;
        if !out_dir.is_null() {
            cfg.output = PathBuf::from(text(out_dir, "out_dir")?);
        }
        let output = run(&cfg).map_err(fail)?;
        write_report(&cfg.output, &output.report, &output.spectra).map_err(fail)?;
        *exit_code = output.status.exit_code();
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { spinc_last_error(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
        assert_eq!(s.len(), n.min(255));
        s
    }

    fn unit_torus(resolution: usize) -> *mut SpincModel {
        let mut m = ptr::null_mut();
        let st = unsafe {
            spinc_torus_model_new(1, [1.0, 1.0].as_ptr(), resolution, [1.0].as_ptr(), [1].as_ptr(), 1, [0].as_ptr(), &mut m)
        };
        assert_eq!(st, SpincStatus::Ok);
        m
    }

    #[test]
    fn kernel_of_dirac_square() {
        let m = unit_torus(8);
        let mut predicted = 0;
        assert_eq!(unsafe { spinc_index_prediction(m, 1, &mut predicted) }, SpincStatus::Ok);
        assert_eq!(predicted, 1);
        let mut op = ptr::null_mut();
        assert_eq!(unsafe { spinc_operator_new(m, SpincOperatorKind::Dirac, 1, 0.01, 2, &mut op) }, SpincStatus::Ok);
        assert_eq!(unsafe { spinc_operator_dim(op) }, 128);
        let mut spectrum = ptr::null_mut();
        assert_eq!(unsafe { spinc_lowest_eigenvalues(op, 3, 1, 1e-9, 1, &mut spectrum) }, SpincStatus::Ok);
        let mut vals = [0.0; 3];
        assert_eq!(unsafe { spinc_spectrum_values(spectrum, vals.as_mut_ptr(), ptr::null_mut(), 3) }, 3);
        assert!(vals[0] < 1e-5 && vals[1] > 5.0, "{vals:?}");
        unsafe {
            spinc_spectrum_free(spectrum);
            spinc_operator_free(op);
            spinc_model_free(m);
        }
    }

    #[test]
    fn apply_matches_core() {
        let m = unit_torus(4);
        let mut op = ptr::null_mut();
        assert_eq!(unsafe { spinc_operator_new(m, SpincOperatorKind::Schrodinger, 0, 0.0, 0, &mut op) }, SpincStatus::Ok);
        let n = unsafe { spinc_operator_dim(op) };
        let x: Vec<f64> = (0..2 * n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let mut y = vec![0.0; 2 * n];
        assert_eq!(unsafe { spinc_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), n) }, SpincStatus::Ok);
        // at k = 0 the Laplacian stencil puts 4 / h^2 on the diagonal, h = 1/4
        assert!((y[0] - 64.0).abs() < 1e-12);
        assert_eq!(unsafe { spinc_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), n + 1) }, SpincStatus::InvalidArgument);
        unsafe {
            spinc_operator_free(op);
            spinc_model_free(m);
        }
    }

    #[test]
    fn errors_are_reported() {
        let mut m = ptr::null_mut();
        let st = unsafe {
            spinc_torus_model_new(1, [1.0, 1.0].as_ptr(), 8, [0.5].as_ptr(), [1].as_ptr(), 1, [0].as_ptr(), &mut m)
        };
        assert_eq!(st, SpincStatus::InvalidArgument);
        assert!(last_error().contains("integral"));
        assert!(m.is_null());
        assert_eq!(unsafe { spinc_model_lambda(ptr::null(), ptr::null_mut()) }, SpincStatus::NullPointer);
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { spinc_sphere_model_new(1.0, 1.0, 1, 0, &mut s) }, SpincStatus::Ok);
        let mut op = ptr::null_mut();
        assert_eq!(unsafe { spinc_operator_new(s, SpincOperatorKind::Dirac, 1, 0.0, 0, &mut op) }, SpincStatus::InvalidArgument);
        assert!(last_error().contains("analytic"));
        let mut d = 0;
        assert_eq!(unsafe { spinc_index_prediction(s, 5, &mut d) }, SpincStatus::Ok);
        assert_eq!(d, 6);
        unsafe { spinc_model_free(s) };
    }

    #[test]
    fn run_config_through_the_abi() {
        let dir = std::env::temp_dir().join(format!("spinc-ffi-{}", std::process::id()));
        let cfg = CString::new("[model]\nresolution = 8\n[run]\nk_max = 1\nsuite = lichnerowicz\n").unwrap();
        let out = CString::new(dir.to_str().unwrap()).unwrap();
        let mut code = -1;
        assert_eq!(unsafe { spinc_run_config(cfg.as_ptr(), out.as_ptr(), &mut code) }, SpincStatus::Ok);
        assert_eq!(code, 0);
        assert!(dir.join("report.json").exists());
        let bad = CString::new("[run]\nk_max = x\n").unwrap();
        assert_eq!(unsafe { spinc_run_config(bad.as_ptr(), out.as_ptr(), &mut code) }, SpincStatus::Config);
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn header_declares_the_api() {
        let header = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/include/spinc.h"));
        for name in ["spinc_torus_model_new", "spinc_operator_apply", "spinc_last_error", "SpincStatus", "spinc_run_config"] {
            assert!(header.contains(name), "{name}");
        }
    }
}

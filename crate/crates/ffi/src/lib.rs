//! C ABI over the `znlgt` core.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every entry point returns a [`ZnStatus`]; on failure
//! [`zn_last_error`] describes what went wrong on the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use znlgt::effective;
use znlgt::hamiltonians::{self, CountertermMode, ModelParams, PenaltyParams};
use znlgt::lattice::{self, Boundary, LatticeSpec};
use znlgt::solver;
use znlgt::{Error, SparseOperator};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    DimensionMismatch = 4,
    Capacity = 5,
    BufferTooSmall = 6,
    EmptySector = 7,
    Panic = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZnCounterterm {
    Off = 0,
    Auto = 1,
    Manual = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ZnModelParams {
    pub t: f64,
    pub m: f64,
    pub g2: f64,
    pub chiral: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ZnPenaltyParams {
    pub t_tilde: f64,
    pub w_tilde: f64,
    pub u: f64,
    pub counterterm: ZnCounterterm,
    /// Used only with `ZnCounterterm::Manual`.
    pub manual_coefficient: f64,
}

/// Chain geometry.
pub struct ZnLattice {
    spec: LatticeSpec,
}

/// Sparse Hermitian operator.
pub struct ZnOperator {
    op: SparseOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ZnStatus {
    match err {
        Error::InvalidDimension(_) | Error::InvalidParameter(_) | Error::NotNormalized(_) => {
            ZnStatus::InvalidArgument
        }
        Error::OutOfRange { .. } | Error::Encoding(_) => ZnStatus::OutOfRange,
        Error::DimensionMismatch { .. } => ZnStatus::DimensionMismatch,
        Error::Capacity { .. } => ZnStatus::Capacity,
        Error::EmptySector => ZnStatus::EmptySector,
        Error::Config(_) | Error::Io(_) => ZnStatus::Internal,
    }
}

struct Fail(ZnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ZnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into `ZnStatus::Panic`.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> ZnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ZnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ZnStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn model(p: &ZnModelParams) -> ModelParams {
    ModelParams {
        t: p.t,
        m: p.m,
        g2: p.g2,
        chiral: p.chiral,
    }
}

fn penalty(p: &ZnPenaltyParams) -> PenaltyParams {
    PenaltyParams {
        t_tilde: p.t_tilde,
        w_tilde: p.w_tilde,
        u: p.u,
        counterterm_mode: match p.counterterm {
            ZnCounterterm::Off => CountertermMode::Off,
            ZnCounterterm::Auto => CountertermMode::Auto,
            ZnCounterterm::Manual => CountertermMode::Manual {
                bond_density: p.manual_coefficient,
            },
        },
    }
}

fn boxed_operator(op: SparseOperator, out_op: *mut *mut ZnOperator) -> Result<(), Fail> {
    let slot = unsafe { out(out_op, "out_op")? };
    *slot = Box::into_raw(Box::new(ZnOperator { op }));
    Ok(())
}

/// Copies `src` into `dst[..cap]`; `BufferTooSmall` when it does not fit.
/// `out_len` always receives the required length.
unsafe fn copy_out<T: Copy>(
    src: &[T],
    dst: *mut T,
    cap: usize,
    out_len: *mut usize,
) -> Result<(), Fail> {
    *out(out_len, "out_len")? = src.len();
    if src.len() > cap {
        return Err(Fail(
            ZnStatus::BufferTooSmall,
            format!("buffer holds {cap} entries, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn zn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a chain. With `periodic` set the backgrounds are ignored.
///
/// # Safety
/// `out_lattice` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn zn_lattice_new(
    sites: usize,
    n: usize,
    periodic: bool,
    left_background: usize,
    right_background: usize,
    out_lattice: *mut *mut ZnLattice,
) -> ZnStatus {
    guard(|| {
        let slot = out(out_lattice, "out_lattice")?;
        let boundary = if periodic {
            Boundary::Periodic
        } else {
            Boundary::Open {
                left_background,
                right_background,
            }
        };
        let spec = LatticeSpec::new(sites, n, boundary)?;
        *slot = Box::into_raw(Box::new(ZnLattice { spec }));
        Ok(())
    })
}

/// # Safety
/// `lattice` must come from [`zn_lattice_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn zn_lattice_free(lattice: *mut ZnLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_lattice_dims(
    lattice: *const ZnLattice,
    out_full_dim: *mut usize,
    out_num_links: *mut usize,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        *out(out_full_dim, "out_full_dim")? = l.spec.full_dim();
        *out(out_num_links, "out_num_links")? = l.spec.num_links();
        Ok(())
    })
}

/// Reference-basis indices of the physical sector, ascending. Call with
/// `cap = 0` to query the length.
///
/// # Safety
/// `indices` must hold `cap` writable entries (may be NULL when `cap = 0`).
#[no_mangle]
pub unsafe extern "C" fn zn_lattice_physical_sector(
    lattice: *const ZnLattice,
    indices: *mut u64,
    cap: usize,
    out_len: *mut usize,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        let idx: Vec<u64> = lattice::physical_filter(&l.spec)
            .iter()
            .map(|s| s.0 as u64)
            .collect();
        copy_out(&idx, indices, cap, out_len)
    })
}

/// Gauge Hamiltonian on the full space.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_build_gauge_hamiltonian(
    lattice: *const ZnLattice,
    params: *const ZnModelParams,
    out_op: *mut *mut ZnOperator,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        let p = model(deref(params, "params")?);
        boxed_operator(hamiltonians::build_gauge_hamiltonian(&p, &l.spec)?, out_op)
    })
}

/// Uncorrelated implementation Hamiltonian on the full space.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_build_uncoupled_hamiltonian(
    lattice: *const ZnLattice,
    params: *const ZnModelParams,
    pen: *const ZnPenaltyParams,
    out_op: *mut *mut ZnOperator,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        let p = model(deref(params, "params")?);
        let pp = penalty(deref(pen, "penalty")?);
        boxed_operator(
            hamiltonians::build_uncoupled_hamiltonian(&pp, &p, &l.spec)?,
            out_op,
        )
    })
}

/// Penalty operator, diagonal in the reference basis.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_build_gamma(
    lattice: *const ZnLattice,
    out_op: *mut *mut ZnOperator,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        boxed_operator(hamiltonians::build_gamma(&l.spec), out_op)
    })
}

/// Restriction of a full-space operator to the physical sector.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_operator_restrict_physical(
    lattice: *const ZnLattice,
    op: *const ZnOperator,
    out_op: *mut *mut ZnOperator,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        let o = deref(op, "op")?;
        let idx: Vec<usize> = lattice::physical_filter(&l.spec)
            .iter()
            .map(|s| s.0)
            .collect();
        boxed_operator(o.op.restrict(&idx)?, out_op)
    })
}

/// # Safety
/// `op` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn zn_operator_free(op: *mut ZnOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_operator_dims(
    op: *const ZnOperator,
    out_dim: *mut usize,
    out_nnz: *mut usize,
) -> ZnStatus {
    guard(|| {
        let o = deref(op, "op")?;
        *out(out_dim, "out_dim")? = o.op.dim();
        *out(out_nnz, "out_nnz")? = o.op.nnz();
        Ok(())
    })
}

/// Stored entries in row-major order as `(row, col, re, im)` arrays of
/// length `nnz`. Any of the four buffers may be NULL when `cap = 0`.
///
/// # Safety
/// Each non-NULL buffer must hold `cap` writable entries.
#[no_mangle]
pub unsafe extern "C" fn zn_operator_triplets(
    op: *const ZnOperator,
    rows: *mut u64,
    cols: *mut u64,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ZnStatus {
    guard(|| {
        let o = deref(op, "op")?;
        let t: Vec<_> = o.op.triplets().collect();
        let r: Vec<u64> = t.iter().map(|x| x.0 as u64).collect();
        let c: Vec<u64> = t.iter().map(|x| x.1 as u64).collect();
        let a: Vec<f64> = t.iter().map(|x| x.2.re).collect();
        let b: Vec<f64> = t.iter().map(|x| x.2.im).collect();
        copy_out(&r, rows, cap, out_len)?;
        copy_out(&c, cols, cap, out_len)?;
        copy_out(&a, re, cap, out_len)?;
        copy_out(&b, im, cap, out_len)
    })
}

/// Ascending eigenvalues of a Hermitian operator of dimension at most
/// `dense_cap` (0 selects the default cap).
///
/// # Safety
/// `eigenvalues` must hold `cap` writable entries.
#[no_mangle]
pub unsafe extern "C" fn zn_operator_eigenvalues(
    op: *const ZnOperator,
    dense_cap: usize,
    eigenvalues: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> ZnStatus {
    guard(|| {
        let o = deref(op, "op")?;
        let dense_cap = if dense_cap == 0 {
            solver::DEFAULT_DENSE_CAP
        } else {
            dense_cap
        };
        let dec = solver::dense_eigensolve(&o.op, dense_cap)?;
        copy_out(dec.eigenvalues(), eigenvalues, cap, out_len)
    })
}

/// Discrepancy, after removing a constant offset, between the projected
/// second-order effective Hamiltonian and its closed form.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zn_effective_residual(
    lattice: *const ZnLattice,
    params: *const ZnModelParams,
    pen: *const ZnPenaltyParams,
    out_residual: *mut f64,
) -> ZnStatus {
    guard(|| {
        let l = deref(lattice, "lattice")?;
        let p = model(deref(params, "params")?);
        let pp = penalty(deref(pen, "penalty")?);
        pp.validate()?;
        let rec = effective::certify_point(&l.spec, &p, pp.t_tilde, pp.w_tilde, pp.u)?;
        *out(out_residual, "out_residual")? = rec.residual;
        Ok(())
    })
}

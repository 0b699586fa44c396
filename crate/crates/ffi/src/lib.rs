//! C interface to `dirac-vacuum`.
//!
//! Handles are opaque and owned by the caller once returned; free each with
//! its `*_free` function. Every fallible call returns a [`DvStatus`]; after a
//! non-zero status, [`dv_last_error_message`] describes the failure on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use dirac_vacuum::density::ChargeDensity;
use dirac_vacuum::family::{make_density, DensityFamily};
use dirac_vacuum::lattice::MomentumGrid;
use dirac_vacuum::output::SolutionRecord;
use dirac_vacuum::renorm::{alpha_bare, alpha_physical, b_lambda, lambda_from_kappa};
use dirac_vacuum::scf::{solve_fixed_point, MeanFieldProblem, Solution, SolverConfig};
use dirac_vacuum::series::{uehling_potential, RadialGaussian};
use dirac_vacuum::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    Mismatch = 4,
    NotConverged = 5,
    LandauPole = 6,
    Numerical = 7,
    Io = 8,
    Refused = 9,
    Panic = 10,
}

impl From<&Error> for DvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) => DvStatus::InvalidGrid,
            Error::InvalidParameter { .. }
            | Error::OutsideChargeWindow { .. }
            | Error::Config(_) => DvStatus::InvalidArgument,
            Error::LatticeMismatch { .. } | Error::DimensionMismatch { .. } => DvStatus::Mismatch,
            Error::NotConverged(_) => DvStatus::NotConverged,
            Error::LandauPole { .. } => DvStatus::LandauPole,
            Error::Eigensolver { .. } | Error::Quadrature { .. } | Error::Extrapolation(_) => {
                DvStatus::Numerical
            }
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => DvStatus::Io,
            Error::Refused(_) => DvStatus::Refused,
        }
    }
}

/// Energy terms of a solution, in units of the electron mass.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DvEnergy {
    pub kinetic: f64,
    pub external: f64,
    pub direct: f64,
    pub total: f64,
    pub lower_bound: f64,
}

pub struct DvGrid {
    grid: Arc<MomentumGrid>,
}

pub struct DvDensity {
    density: ChargeDensity,
}

pub struct DvSolution {
    solution: Solution,
    grid: Arc<MomentumGrid>,
    config: SolverConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> DvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DvStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            DvStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DvStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return DvStatus::NullPointer;
        })+
    };
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Momentum grid of box side `box_side`, `points_per_axis` points and cutoff `cutoff`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dv_grid_new(
    box_side: f64,
    points_per_axis: usize,
    cutoff: f64,
    out: *mut *mut DvGrid,
) -> DvStatus {
    non_null!(out);
    guard(|| {
        let grid = MomentumGrid::new(box_side, points_per_axis, cutoff)?;
        *out = boxed(DvGrid {
            grid: Arc::new(grid),
        });
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`dv_grid_new`] and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dv_grid_free(grid: *mut DvGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// One-particle dimension `4M`, or 0 for a null grid.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn dv_grid_dimension(grid: *const DvGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.dimension())
}

/// Normalized Gaussian of charge `charge` and standard deviation `width`
/// centred at the origin. Widths below the grid spacing are refused unless
/// `force` is set.
///
/// # Safety
/// `grid` must be a live grid handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dv_density_gaussian(
    grid: *const DvGrid,
    charge: f64,
    width: f64,
    force: bool,
    out: *mut *mut DvDensity,
) -> DvStatus {
    non_null!(grid, out);
    guard(|| {
        let (density, _) = make_density(
            &DensityFamily::gaussian(charge, width),
            &(*grid).grid,
            force,
        )?;
        *out = boxed(DvDensity { density });
        Ok(())
    })
}

/// # Safety
/// `density` must be null or a live density handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn dv_density_free(density: *mut DvDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// `L³ ρ̂(0)`.
///
/// # Safety
/// `density` must be a live density handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_density_total_charge(
    density: *const DvDensity,
    out: *mut f64,
) -> DvStatus {
    non_null!(density, out);
    *out = (*density).density.total_charge();
    DvStatus::Ok
}

/// Number of Fourier coefficients.
///
/// # Safety
/// `density` must be null or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn dv_density_len(density: *const DvDensity) -> usize {
    density
        .as_ref()
        .map_or(0, |d| d.density.coefficients().len())
}

/// Copies the coefficients into `re` and `im`, each of length `len` equal to
/// [`dv_density_len`].
///
/// # Safety
/// `re` and `im` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dv_density_coefficients(
    density: *const DvDensity,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> DvStatus {
    non_null!(density, re, im);
    let c = (*density).density.coefficients();
    if len != c.len() {
        set_error(&format!("buffer length {len} differs from {}", c.len()));
        return DvStatus::InvalidArgument;
    }
    for (i, z) in c.iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    DvStatus::Ok
}

/// Self-consistent solution at fixed `mu` from the free vacuum.
/// `tolerance <= 0` and `max_iterations == 0` select the defaults.
///
/// # Safety
/// `grid` and `external` must be live handles (the density built on `grid`),
/// `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dv_solve(
    grid: *const DvGrid,
    external: *const DvDensity,
    alpha: f64,
    mu: f64,
    tolerance: f64,
    max_iterations: usize,
    out: *mut *mut DvSolution,
) -> DvStatus {
    non_null!(grid, external, out);
    guard(|| {
        let grid = Arc::clone(&(*grid).grid);
        let defaults = SolverConfig::default();
        let config = SolverConfig {
            alpha,
            mu,
            tolerance: if tolerance > 0.0 {
                tolerance
            } else {
                defaults.tolerance
            },
            max_iterations: if max_iterations > 0 {
                max_iterations
            } else {
                defaults.max_iterations
            },
            ..defaults
        };
        let problem = MeanFieldProblem::new(
            Arc::clone(&grid),
            (*external).density.clone(),
            config.flavor,
        )?;
        let solution = solve_fixed_point(&problem, &config, None)?;
        *out = boxed(DvSolution {
            solution,
            grid,
            config,
        });
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn dv_solution_free(solution: *mut DvSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_solution_energy(
    solution: *const DvSolution,
    out: *mut DvEnergy,
) -> DvStatus {
    non_null!(solution, out);
    let e = (*solution).solution.energy;
    *out = DvEnergy {
        kinetic: e.kinetic,
        external: e.external,
        direct: e.direct,
        total: e.total,
        lower_bound: e.lower_bound,
    };
    DvStatus::Ok
}

/// Generalized charge `Tr_{P⁰₋} Q` and iteration count.
///
/// # Safety
/// `solution` must be a live handle; `charge` and `iterations` writable.
#[no_mangle]
pub unsafe extern "C" fn dv_solution_summary(
    solution: *const DvSolution,
    charge: *mut f64,
    iterations: *mut usize,
) -> DvStatus {
    non_null!(solution, charge, iterations);
    *charge = (*solution).solution.charge;
    *iterations = (*solution).solution.iterations;
    DvStatus::Ok
}

/// New density handle holding the induced vacuum density `ρ_Q`.
///
/// # Safety
/// `solution` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dv_solution_density(
    solution: *const DvSolution,
    out: *mut *mut DvDensity,
) -> DvStatus {
    non_null!(solution, out);
    *out = boxed(DvDensity {
        density: (*solution).solution.rho.clone(),
    });
    DvStatus::Ok
}

/// Solution as a JSON document; release it with [`dv_string_free`].
///
/// # Safety
/// `solution` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dv_solution_to_json(
    solution: *const DvSolution,
    out: *mut *mut c_char,
) -> DvStatus {
    non_null!(solution, out);
    guard(|| {
        let s = &*solution;
        let record = SolutionRecord::new(&s.solution, &s.grid, &s.config, "", None);
        let text = serde_json::to_string(&record)?;
        *out = CString::new(text)
            .map_err(|e| Error::Config(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `B_Λ`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_b_lambda(cutoff: f64, out: *mut f64) -> DvStatus {
    non_null!(out);
    guard(|| {
        *out = b_lambda(cutoff)?;
        Ok(())
    })
}

/// `α_ph = α / (1 + α B_Λ)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_alpha_physical(alpha: f64, cutoff: f64, out: *mut f64) -> DvStatus {
    non_null!(out);
    guard(|| {
        *out = alpha_physical(alpha, cutoff)?;
        Ok(())
    })
}

/// `α = α_ph / (1 − α_ph B_Λ)`; `DV_STATUS_LANDAU_POLE` when `α_ph B_Λ ≥ 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_alpha_bare(alpha_ph: f64, cutoff: f64, out: *mut f64) -> DvStatus {
    non_null!(out);
    guard(|| {
        *out = alpha_bare(alpha_ph, cutoff)?;
        Ok(())
    })
}

/// Cutoff with `α_ph B_Λ = κ`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_lambda_from_kappa(
    alpha_ph: f64,
    kappa: f64,
    out: *mut f64,
) -> DvStatus {
    non_null!(out);
    guard(|| {
        *out = lambda_from_kappa(alpha_ph, kappa)?;
        Ok(())
    })
}

/// Uehling potential at radius `x` of a centred Gaussian charge.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dv_uehling_potential(
    charge: f64,
    width: f64,
    x: f64,
    out: *mut f64,
) -> DvStatus {
    non_null!(out);
    guard(|| {
        *out = uehling_potential(&RadialGaussian::new(charge, width)?, x)?;
        Ok(())
    })
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dv_last_error_copy(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reads the last error message as a Rust string (used by the tests).
pub fn last_error() -> String {
    // SAFETY: the pointer refers to the thread-local buffer, alive for this call.
    unsafe { CStr::from_ptr(dv_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

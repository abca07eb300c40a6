//! C ABI over the solvers and the buffer-based metrics.
//!
//! Every call returns a status code; out-parameters are written only on
//! GPC_OK. Solver results live behind opaque handles that must be released
//! with the matching _free. The message for the last failure on the calling
//! thread is available from gpc_last_error_message() until the next failing
//! call on that thread. Densities passed as buffers may be unnormalized;
//! they are normalized on ingestion and must be nonnegative.

use gpchaos::chaos::{
    entropy, fisher_information, relative_entropy, relative_fisher, total_variation,
    wasserstein_samples, Metric, Order,
};
use gpchaos::cli::exit_code;
use gpchaos::gp::{minimize_gp, FlowParams, GpProblem, GpSolution, Trap};
use gpchaos::grid::{Grid, SampleSet, ScalarField};
use gpchaos::nbody::{energy_components, ground_state, NBodyGroundState, NBodyProblem};
use gpchaos::scattering::{gp_scaled_potential, scattering_report, PairPotential};
use gpchaos::{Error, Result};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Success.
pub const GPC_OK: i32 = 0;
/// ABI misuse: null pointer, unknown enum value, or buffer length mismatch.
pub const GPC_MISUSE: i32 = 1;
/// Input rejected by validation.
pub const GPC_INVALID: i32 = 2;
/// A numerical invariant failed mid-run.
pub const GPC_NUMERICAL: i32 = 3;
/// Internal panic caught at the boundary.
pub const GPC_PANIC: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(code: i32, message: &str) -> i32 {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).unwrap_or_default();
    });
    code
}

fn fail_error(err: &Error) -> i32 {
    fail(exit_code(err), &err.to_string())
}

/// Runs the body with a panic guard; the status-code discipline above.
fn guarded(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => fail(GPC_PANIC, "internal panic at the ABI boundary"),
    }
}

/// Message of the last failing call on this thread; empty string if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gpc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gpc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn trap_from(kind: i32, strength: f64) -> Result<Trap> {
    match kind {
        0 => Ok(Trap::Harmonic { strength }),
        1 => Ok(Trap::Quartic { strength }),
        _ => Err(Error::InvalidConfig(format!(
            "trap kind {kind} unknown (0 harmonic, 1 quartic)"
        ))),
    }
}

/// pair_kind 0: no interaction (a, b, c ignored). 1: gaussian with amplitude
/// a, width b, cutoff c (c <= 0 takes 6 widths). 2: square well with depth a,
/// radius b (c ignored).
fn pair_from(kind: i32, a: f64, b: f64, c: f64) -> Result<PairPotential> {
    match kind {
        0 => Ok(PairPotential::zero()),
        1 => PairPotential::gaussian(a, b, if c > 0.0 { c } else { 6.0 * b }),
        2 => PairPotential::square_well(a, b),
        _ => Err(Error::InvalidConfig(format!(
            "pair kind {kind} unknown (0 zero, 1 gaussian, 2 square well)"
        ))),
    }
}

unsafe fn in_slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn density_from(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    values: *const f64,
    len: usize,
) -> Result<ScalarField> {
    let grid = Grid::new(dim, points_per_axis, half_width)?;
    if len != grid.len() {
        return Err(Error::SizeMismatch(format!(
            "field buffer holds {len} values, the grid needs {}",
            grid.len()
        )));
    }
    let values = in_slice(values, len)
        .ok_or_else(|| Error::InvalidConfig("null field buffer".into()))?;
    ScalarField::from_values(grid, values.to_vec())?.into_density()
}

unsafe fn write_out(out: *mut f64, value: f64) -> i32 {
    if out.is_null() {
        return fail(GPC_MISUSE, "null output pointer");
    }
    *out = value;
    GPC_OK
}

/// Zero-energy scattering of a square well: scattering length, the kinetic
/// fraction s-hat, and the linear-tail fit residual.
///
/// # Safety
/// Output pointers must be valid for one f64 write or null is rejected.
#[no_mangle]
pub unsafe extern "C" fn gpc_scatter_square_well(
    depth: f64,
    radius: f64,
    r_max: f64,
    n_r: usize,
    out_a: *mut f64,
    out_s_hat: *mut f64,
    out_tail_residual: *mut f64,
) -> i32 {
    guarded(|| {
        if out_a.is_null() || out_s_hat.is_null() || out_tail_residual.is_null() {
            return fail(GPC_MISUSE, "null output pointer");
        }
        let pot = match PairPotential::square_well(depth, radius) {
            Ok(p) => p,
            Err(e) => return fail_error(&e),
        };
        match scattering_report(&pot, r_max, n_r) {
            Ok((sol, s_hat)) => {
                *out_a = sol.a;
                *out_s_hat = s_hat;
                *out_tail_residual = sol.tail_residual;
                GPC_OK
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// Solved ground state of the one-body energy functional.
pub struct GpcGp {
    solution: GpSolution,
}

/// Minimizes the one-body functional with quartic coupling g on a uniform
/// grid. On GPC_OK, *out owns the solution and must go to gpc_gp_free.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_solve(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    trap_kind: i32,
    trap_strength: f64,
    g: f64,
    tol: f64,
    max_iters: usize,
    out: *mut *mut GpcGp,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(GPC_MISUSE, "null output pointer");
        }
        let run = || -> Result<GpSolution> {
            let grid = Grid::new(dim, points_per_axis, half_width)?;
            let problem = GpProblem::new(grid, trap_from(trap_kind, trap_strength)?, g)?;
            let params = FlowParams { tol, max_iters, ..FlowParams::default() };
            minimize_gp(&problem, &params)
        };
        match run() {
            Ok(solution) => {
                *out = Box::into_raw(Box::new(GpcGp { solution }));
                GPC_OK
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// # Safety
/// `handle` must come from gpc_gp_solve and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_lambda(handle: *const GpcGp, out: *mut f64) -> i32 {
    guarded(|| match handle.as_ref() {
        None => fail(GPC_MISUSE, "null handle"),
        Some(h) => write_out(out, h.solution.lambda),
    })
}

/// # Safety
/// As for gpc_gp_lambda; all four output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_energy(
    handle: *const GpcGp,
    out_kinetic: *mut f64,
    out_trap: *mut f64,
    out_interaction: *mut f64,
    out_total: *mut f64,
) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if [out_kinetic, out_trap, out_interaction, out_total].iter().any(|p| p.is_null()) {
            return fail(GPC_MISUSE, "null output pointer");
        }
        let e = h.solution.energy;
        *out_kinetic = e.kinetic;
        *out_trap = e.trap;
        *out_interaction = e.interaction;
        *out_total = e.total;
        GPC_OK
    })
}

/// # Safety
/// As for gpc_gp_lambda.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_residual(handle: *const GpcGp, out: *mut f64) -> i32 {
    guarded(|| match handle.as_ref() {
        None => fail(GPC_MISUSE, "null handle"),
        Some(h) => write_out(out, h.solution.residual),
    })
}

/// # Safety
/// As for gpc_gp_lambda.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_iterations(handle: *const GpcGp, out: *mut usize) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if out.is_null() {
            return fail(GPC_MISUSE, "null output pointer");
        }
        *out = h.solution.iterations;
        GPC_OK
    })
}

/// Grid geometry of the solution, for sizing the density buffer:
/// the density holds points_per_axis^dim values.
///
/// # Safety
/// As for gpc_gp_lambda; all three output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_grid(
    handle: *const GpcGp,
    out_dim: *mut usize,
    out_points_per_axis: *mut usize,
    out_half_width: *mut f64,
) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if out_dim.is_null() || out_points_per_axis.is_null() || out_half_width.is_null() {
            return fail(GPC_MISUSE, "null output pointer");
        }
        let grid = h.solution.phi.grid();
        *out_dim = grid.dim();
        *out_points_per_axis = grid.points_per_axis();
        *out_half_width = grid.half_width();
        GPC_OK
    })
}

/// Copies the ground-state density, row-major, into `buf` (len must equal
/// the grid size from gpc_gp_grid).
///
/// # Safety
/// `buf` must be valid for `len` f64 writes.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_density(handle: *const GpcGp, buf: *mut f64, len: usize) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if buf.is_null() {
            return fail(GPC_MISUSE, "null buffer");
        }
        let rho = match h.solution.density() {
            Ok(rho) => rho,
            Err(e) => return fail_error(&e),
        };
        if len != rho.values().len() {
            return fail(GPC_MISUSE, "buffer length does not match the grid");
        }
        std::ptr::copy_nonoverlapping(rho.values().as_ptr(), buf, len);
        GPC_OK
    })
}

/// # Safety
/// `handle` must come from gpc_gp_solve; passing it again afterwards is
/// undefined. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gpc_gp_free(handle: *mut GpcGp) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Solved few-body ground state with its problem definition.
pub struct GpcNbody {
    problem: NBodyProblem,
    state: NBodyGroundState,
}

/// Exact ground state of n_particles in `dim` dimensions with a scaled pair
/// interaction. scaling 0 divides the pair strength by N; scaling 1 length-
/// rescales it so its scattering length is g/(4 pi N) (g must be > 0 there).
/// On GPC_OK, *out owns the result and must go to gpc_nbody_free.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_solve(
    n_particles: usize,
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    trap_kind: i32,
    trap_strength: f64,
    pair_kind: i32,
    pair_a: f64,
    pair_b: f64,
    pair_c: f64,
    scaling: i32,
    g: f64,
    tol: f64,
    max_iters: usize,
    out: *mut *mut GpcNbody,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(GPC_MISUSE, "null output pointer");
        }
        let run = || -> Result<GpcNbody> {
            let bare = pair_from(pair_kind, pair_a, pair_b, pair_c)?;
            let pair = match scaling {
                0 => bare.strength_scaled(1.0 / n_particles.max(1) as f64)?,
                1 => {
                    let (sol, _) =
                        scattering_report(&bare, 4.0 * bare.range().max(1.0), 4001)?;
                    gp_scaled_potential(&sol, n_particles, g)?
                }
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "scaling {scaling} unknown (0 mean field, 1 scattering length)"
                    )))
                }
            };
            let problem =
                NBodyProblem::new(n_particles, dim, points_per_axis, half_width,
                    trap_from(trap_kind, trap_strength)?, pair)?;
            let state = ground_state(&problem, tol, max_iters)?;
            Ok(GpcNbody { problem, state })
        };
        match run() {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                GPC_OK
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// # Safety
/// `handle` must come from gpc_nbody_solve and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_energy(handle: *const GpcNbody, out: *mut f64) -> i32 {
    guarded(|| match handle.as_ref() {
        None => fail(GPC_MISUSE, "null handle"),
        Some(h) => write_out(out, h.state.energy),
    })
}

/// Per-particle energy split (kinetic, trap, half the pair interaction);
/// the three sum to the energy over N.
///
/// # Safety
/// As for gpc_nbody_energy; all four output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_components(
    handle: *const GpcNbody,
    out_kinetic: *mut f64,
    out_trap: *mut f64,
    out_interaction: *mut f64,
    out_total: *mut f64,
) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if [out_kinetic, out_trap, out_interaction, out_total].iter().any(|p| p.is_null()) {
            return fail(GPC_MISUSE, "null output pointer");
        }
        match energy_components(&h.state, &h.problem) {
            Ok(e) => {
                *out_kinetic = e.kinetic;
                *out_trap = e.trap;
                *out_interaction = e.interaction;
                *out_total = e.total;
                GPC_OK
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// # Safety
/// As for gpc_nbody_energy.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_residual(handle: *const GpcNbody, out: *mut f64) -> i32 {
    guarded(|| match handle.as_ref() {
        None => fail(GPC_MISUSE, "null handle"),
        Some(h) => write_out(out, h.state.residual),
    })
}

/// Copies the joint density of the first `particles` particles, row-major,
/// into `buf`; len must equal points_per_axis^(particles * dim).
///
/// # Safety
/// `buf` must be valid for `len` f64 writes.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_marginal(
    handle: *const GpcNbody,
    particles: usize,
    buf: *mut f64,
    len: usize,
) -> i32 {
    guarded(|| {
        let Some(h) = handle.as_ref() else {
            return fail(GPC_MISUSE, "null handle");
        };
        if buf.is_null() {
            return fail(GPC_MISUSE, "null buffer");
        }
        match h.state.marginal(particles) {
            Ok(m) => {
                if len != m.values().len() {
                    return fail(GPC_MISUSE, "buffer length does not match the marginal grid");
                }
                std::ptr::copy_nonoverlapping(m.values().as_ptr(), buf, len);
                GPC_OK
            }
            Err(e) => fail_error(&e),
        }
    })
}

/// # Safety
/// `handle` must come from gpc_nbody_solve; passing it again afterwards is
/// undefined. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gpc_nbody_free(handle: *mut GpcNbody) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Entropy of a density given on a uniform grid, with the k-moment finiteness
/// check. The buffer may be unnormalized.
///
/// # Safety
/// `values` must hold `len` f64s; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_entropy(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    values: *const f64,
    len: usize,
    moment_k: f64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let rho = density_from(dim, points_per_axis, half_width, values, len)?;
            entropy(&rho, moment_k)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

/// Fisher information of a density given on a uniform grid.
///
/// # Safety
/// As for gpc_entropy.
#[no_mangle]
pub unsafe extern "C" fn gpc_fisher_information(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let rho = density_from(dim, points_per_axis, half_width, values, len)?;
            fisher_information(&rho)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

/// Relative entropy of p against q on a shared grid, divided by n_particles.
///
/// # Safety
/// `p` and `q` must each hold `len` f64s; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_relative_entropy(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    p: *const f64,
    q: *const f64,
    len: usize,
    n_particles: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let rho = density_from(dim, points_per_axis, half_width, p, len)?;
            let reference = density_from(dim, points_per_axis, half_width, q, len)?;
            relative_entropy(&rho, &reference, n_particles)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

/// Relative Fisher information of p against q on a shared grid, divided by
/// n_particles.
///
/// # Safety
/// As for gpc_relative_entropy.
#[no_mangle]
pub unsafe extern "C" fn gpc_relative_fisher(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    p: *const f64,
    q: *const f64,
    len: usize,
    n_particles: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let rho = density_from(dim, points_per_axis, half_width, p, len)?;
            let reference = density_from(dim, points_per_axis, half_width, q, len)?;
            relative_fisher(&rho, &reference, n_particles)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

/// Total variation distance between two densities on a shared grid.
///
/// # Safety
/// As for gpc_relative_entropy.
#[no_mangle]
pub unsafe extern "C" fn gpc_total_variation(
    dim: usize,
    points_per_axis: usize,
    half_width: f64,
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let rho = density_from(dim, points_per_axis, half_width, p, len)?;
            let reference = density_from(dim, points_per_axis, half_width, q, len)?;
            total_variation(&rho, &reference)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

/// Empirical Wasserstein distance between two sample sets of equal size by
/// exact assignment. Points are row-major (count x dim). order is 1 or 2;
/// truncation > 0 truncates the order-1 ground distance (per particle block
/// of size dim / n_particles), truncation <= 0 means untruncated Euclidean.
///
/// # Safety
/// `xs` and `ys` must hold count * dim f64s each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpc_wasserstein(
    dim: usize,
    xs: *const f64,
    ys: *const f64,
    count: usize,
    order: i32,
    truncation: f64,
    n_particles: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let run = || -> Result<f64> {
            let total = count.checked_mul(dim).ok_or_else(|| {
                Error::InvalidConfig("sample buffer size overflows".into())
            })?;
            let xs = in_slice(xs, total)
                .ok_or_else(|| Error::InvalidConfig("null sample buffer".into()))?;
            let ys = in_slice(ys, total)
                .ok_or_else(|| Error::InvalidConfig("null sample buffer".into()))?;
            let order = match order {
                1 => Order::One,
                2 => Order::Two,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "order {order} unknown (1 or 2)"
                    )))
                }
            };
            let metric = if truncation > 0.0 {
                Metric::truncated(truncation)?.per_particle(n_particles)
            } else {
                Metric::euclidean().per_particle(n_particles)
            };
            let a = SampleSet::new(dim, xs.to_vec())?;
            let b = SampleSet::new(dim, ys.to_vec())?;
            wasserstein_samples(&a, &b, order, metric)
        };
        match run() {
            Ok(v) => write_out(out, v),
            Err(e) => fail_error(&e),
        }
    })
}

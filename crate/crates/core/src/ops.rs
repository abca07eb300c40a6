//! Finite-difference operators on grid fields.
//!
//! The Laplacian uses the 4th-order five-point stencil per axis with zero
//! (Dirichlet) padding outside the box; ground states decay fast enough that
//! the reduced order in the two boundary layers does not matter. First
//! derivatives use 2nd-order central differences, one-sided at the faces.

use crate::error::{Error, Result};
use crate::grid::{det_sum_by, Grid, ScalarField, VectorField};

/// What to do where a density falls under its floor eps = 1e-12 * max(rho).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorPolicy {
    /// Divide by max(rho, eps).
    #[default]
    Clamp,
    /// Drift is 0 where rho < eps.
    Zero,
    /// Refuse to divide: error out if min(rho) < eps.
    Strict,
}

pub const DENSITY_FLOOR_REL: f64 = 1e-12;

pub fn density_floor(rho: &ScalarField) -> f64 {
    DENSITY_FLOOR_REL * rho.max_value()
}

/// -(phi_xx + ...) would be the physical kinetic operator; this returns the
/// plain Laplacian sum_a d²/dx_a². Coefficients (-1, 16, -30, 16, -1)/12h².
/// Applied as one line sweep per axis: lines along axis `a` are enumerated
/// by an outer block (stride n*s) and an inner offset (0..s), which keeps
/// the hot loop free of index arithmetic.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let axes: Vec<usize> = (0..f.grid().dim()).collect();
    laplacian_axes(f, &axes)
}

/// Laplacian restricted to a subset of axes (the per-particle kinetic term
/// on a joint grid sums only that particle's axes).
pub fn laplacian_axes(f: &ScalarField, axes: &[usize]) -> ScalarField {
    let grid = *f.grid();
    let vals = f.values();
    let n = grid.points_per_axis();
    let inv12h2 = 1.0 / (12.0 * grid.spacing() * grid.spacing());
    let mut out = ScalarField::zeros(grid);
    let ov = out.values_mut();
    for &axis in axes {
        let s = grid.stride(axis);
        let super_s = s * n;
        for q in 0..grid.len() / super_s {
            for r in 0..s {
                let base = q * super_s + r;
                let at = |i: isize| -> f64 {
                    if (0..n as isize).contains(&i) {
                        vals[base + i as usize * s]
                    } else {
                        0.0
                    }
                };
                for i in 0..n {
                    let c = vals[base + i * s];
                    let (m2, m1, p1, p2) = if i >= 2 && i + 2 < n {
                        (
                            vals[base + (i - 2) * s],
                            vals[base + (i - 1) * s],
                            vals[base + (i + 1) * s],
                            vals[base + (i + 2) * s],
                        )
                    } else {
                        let i = i as isize;
                        (at(i - 2), at(i - 1), at(i + 1), at(i + 2))
                    };
                    ov[base + i * s] +=
                        (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) * inv12h2;
                }
            }
        }
    }
    out
}

/// Largest eigenvalue of -laplacian on this grid (per the stencil symbol);
/// used to bound explicit step sizes.
pub fn laplacian_bound(grid: &Grid) -> f64 {
    16.0 * grid.dim() as f64 / (3.0 * grid.spacing() * grid.spacing())
}

/// d/dx_axis by central differences, 2nd-order one-sided at the faces.
pub fn derivative_axis(f: &ScalarField, axis: usize) -> Vec<f64> {
    let grid = *f.grid();
    let vals = f.values();
    let n = grid.points_per_axis();
    let s = grid.stride(axis);
    let super_s = s * n;
    let inv2h = 1.0 / (2.0 * grid.spacing());
    let mut out = vec![0.0; vals.len()];
    for q in 0..grid.len() / super_s {
        for r in 0..s {
            let base = q * super_s + r;
            out[base] =
                (-3.0 * vals[base] + 4.0 * vals[base + s] - vals[base + 2 * s]) * inv2h;
            for i in 1..n - 1 {
                out[base + i * s] =
                    (vals[base + (i + 1) * s] - vals[base + (i - 1) * s]) * inv2h;
            }
            let last = base + (n - 1) * s;
            out[last] =
                (3.0 * vals[last] - 4.0 * vals[last - s] + vals[last - 2 * s]) * inv2h;
        }
    }
    out
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let comps: Vec<Vec<f64>> = (0..f.grid().dim())
        .map(|a| derivative_axis(f, a))
        .collect();
    VectorField::new(*f.grid(), comps).expect("components match grid by construction")
}

/// Drift of the measure-preserving diffusion of `rho` with unit noise:
/// b = (1/2) grad(rho)/rho, componentwise on the grid.
pub fn grad_log_density(rho: &ScalarField, policy: FloorPolicy) -> Result<VectorField> {
    let eps = density_floor(rho);
    if policy == FloorPolicy::Strict {
        let min = rho.values().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < eps {
            return Err(Error::DensityFloor(format!(
                "min(rho) = {min:.3e} under floor {eps:.3e} with clamping disabled"
            )));
        }
    }
    let vals = rho.values();
    let comps: Vec<Vec<f64>> = (0..rho.grid().dim())
        .map(|a| {
            let mut d = derivative_axis(rho, a);
            for (v, &r) in d.iter_mut().zip(vals) {
                *v = match policy {
                    FloorPolicy::Zero if r < eps => 0.0,
                    _ => 0.5 * *v / r.max(eps),
                };
            }
            d
        })
        .collect();
    VectorField::new(*rho.grid(), comps)
}

/// Quadrature inner product <f, g>.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    debug_assert_eq!(f.grid(), g.grid());
    let grid = *f.grid();
    let (a, b) = (f.values(), g.values());
    det_sum_by(a.len(), |i| a[i] * b[i] * grid.weight(i))
}

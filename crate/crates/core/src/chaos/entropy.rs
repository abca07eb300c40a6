//! Entropy, relative entropy, Fisher information, and total variation by
//! grid quadrature. All joint quantities are unnormalized unless the call
//! takes an explicit particle count; fields do not carry particle structure.

use crate::error::{Error, Result};
use crate::grid::{det_sum_by, ScalarField};
use crate::ops::{density_floor, gradient};

/// Flags a k-th moment whose quadrature is still growing at the box edge:
/// the outermost shell must contribute less than the one inside it. A fixed
/// field cannot be grid-refined, so this stands in for a refinement check.
fn tail_moment_check(rho: &ScalarField, k: f64) -> Result<()> {
    let g = *rho.grid();
    let n = g.points_per_axis();
    let v = rho.values();
    let shell = |target: usize| -> f64 {
        det_sum_by(v.len(), |i| {
            let mut depth = usize::MAX;
            let mut r2 = 0.0;
            for axis in 0..g.dim() {
                let idx = g.axis_index(i, axis);
                depth = depth.min(idx.min(n - 1 - idx));
                let c = g.coord(idx);
                r2 += c * c;
            }
            if depth != target {
                return 0.0;
            }
            r2.powf(0.5 * k) * v[i] * g.weight(i)
        })
    };
    let outer = shell(0);
    let inner = shell(1);
    if outer > inner {
        return Err(Error::MomentDiverged(format!(
            "k = {k} moment rises at the box edge: outer shell {outer:.3e} > {inner:.3e}"
        )));
    }
    Ok(())
}

/// Quadrature of rho log rho with 0 log 0 := 0, guarded by the k-th moment
/// tail check.
pub fn entropy(rho: &ScalarField, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidConfig(format!("moment order k must be > 0, got {k}")));
    }
    rho.assert_density()?;
    tail_moment_check(rho, k)?;
    let g = *rho.grid();
    let v = rho.values();
    let w = g.weights();
    Ok(det_sum_by(v.len(), |i| {
        let p = v[i];
        if p > 0.0 {
            p * p.ln() * w[i]
        } else {
            0.0
        }
    }))
}

fn check_same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::DimensionMismatch("fields live on different grids".into()));
    }
    Ok(())
}

/// Largest rho-mass allowed on points where the reference sits at its
/// numerical floor. Smooth densities with mismatched tail decay leave at
/// most ~1e-6 there on our boxes, while a genuine support defect leaves
/// O(1); this cut separates the two with headroom on both sides.
const AC_MASS_TOL: f64 = 1e-4;

/// Guards absolute continuity: points where the reference is floored drop
/// out of the relative quadratures, which is only sound when rho puts
/// negligible mass there.
fn check_dominated(rho: &ScalarField, reference: &ScalarField) -> Result<()> {
    let p = rho.values();
    let q = reference.values();
    let floor_q = density_floor(reference);
    let g = *rho.grid();
    let w = g.weights();
    let excluded = det_sum_by(p.len(), |i| {
        if q[i] <= floor_q {
            p[i].max(0.0) * w[i]
        } else {
            0.0
        }
    });
    if excluded > AC_MASS_TOL {
        return Err(Error::AbsoluteContinuity(format!(
            "rho mass {excluded:.3e} where the reference vanishes"
        )));
    }
    Ok(())
}

/// (1/N) quadrature of rho log(rho/reference). The divisor is explicit
/// because the joint structure is the caller's, not the field's.
pub fn relative_entropy(
    rho: &ScalarField,
    reference: &ScalarField,
    n_particles: usize,
) -> Result<f64> {
    check_same_grid(rho, reference)?;
    if n_particles == 0 {
        return Err(Error::InvalidConfig("n_particles must be >= 1".into()));
    }
    check_dominated(rho, reference)?;
    let p = rho.values();
    let q = reference.values();
    let floor_p = density_floor(rho);
    let floor_q = density_floor(reference);
    let g = *rho.grid();
    let w = g.weights();
    let total = det_sum_by(p.len(), |i| {
        if p[i] > floor_p && q[i] > floor_q {
            p[i] * (p[i] / q[i]).ln() * w[i]
        } else {
            0.0
        }
    });
    Ok(total / n_particles as f64)
}

/// Quadrature of |grad rho|^2 / rho. Points under the density floor
/// contribute nothing; their true share is of the floor's order.
pub fn fisher_information(rho: &ScalarField) -> Result<f64> {
    rho.assert_density()?;
    let grads = gradient(rho);
    let v = rho.values();
    let floor = density_floor(rho);
    let g = *rho.grid();
    let w = g.weights();
    let dim = g.dim();
    Ok(det_sum_by(v.len(), |i| {
        if v[i] <= floor {
            return 0.0;
        }
        let mut s = 0.0;
        for a in 0..dim {
            let d = grads.component(a)[i];
            s += d * d;
        }
        s / v[i] * w[i]
    }))
}

/// (1/N) quadrature of |grad log(rho/reference)|^2 rho.
pub fn relative_fisher(
    rho: &ScalarField,
    reference: &ScalarField,
    n_particles: usize,
) -> Result<f64> {
    check_same_grid(rho, reference)?;
    if n_particles == 0 {
        return Err(Error::InvalidConfig("n_particles must be >= 1".into()));
    }
    check_dominated(rho, reference)?;
    let p = rho.values();
    let q = reference.values();
    let floor_p = density_floor(rho);
    let floor_q = density_floor(reference);
    let gp = gradient(rho);
    let gq = gradient(reference);
    let g = *rho.grid();
    let w = g.weights();
    let dim = g.dim();
    let total = det_sum_by(p.len(), |i| {
        if p[i] <= floor_p || q[i] <= floor_q {
            return 0.0;
        }
        let mut s = 0.0;
        for a in 0..dim {
            let diff = gp.component(a)[i] / p[i] - gq.component(a)[i] / q[i];
            s += diff * diff;
        }
        s * p[i] * w[i]
    });
    Ok(total / n_particles as f64)
}

/// Half the L1 quadrature distance between two densities on one grid.
pub fn total_variation(rho: &ScalarField, reference: &ScalarField) -> Result<f64> {
    check_same_grid(rho, reference)?;
    rho.assert_density()?;
    reference.assert_density()?;
    let p = rho.values();
    let q = reference.values();
    let g = *rho.grid();
    let w = g.weights();
    Ok(0.5 * det_sum_by(p.len(), |i| (p[i] - q[i]).abs() * w[i]))
}

/// Both sides of the reference-measure splitting of the entropy against
/// H_k = C_k exp(-sum_j |r_j|^k): the direct quadrature and
/// int ((s log s - s + 1) H_k) + int (rho log H_k) with s = rho/H_k.
/// They agree up to quadrature normalization error.
pub fn entropy_decomposition(
    rho: &ScalarField,
    k: f64,
    particle_dim: usize,
) -> Result<(f64, f64)> {
    let g = *rho.grid();
    if particle_dim == 0 || g.dim() % particle_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "grid dim {} does not split into blocks of {particle_dim}",
            g.dim()
        )));
    }
    let direct = entropy(rho, k)?;
    let v = rho.values();
    let w = g.weights();
    let blocks = g.dim() / particle_dim;
    let radial = |i: usize| -> f64 {
        let mut x = [0.0; 8];
        g.point(i, &mut x[..g.dim()]);
        let mut acc = 0.0;
        for b in 0..blocks {
            let r2: f64 = x[b * particle_dim..(b + 1) * particle_dim]
                .iter()
                .map(|c| c * c)
                .sum();
            acc += r2.powf(0.5 * k);
        }
        acc
    };
    let mass = det_sum_by(v.len(), |i| (-radial(i)).exp() * w[i]);
    let log_m = mass.ln();
    // log H_k = -radial - log m; the ratio rho/H_k never forms directly, so
    // underflowed reference tails cost nothing
    let bregman = det_sum_by(v.len(), |i| {
        let h = (-radial(i)).exp() / mass;
        let p = v[i];
        let p_log_s = if p > 0.0 { p * (p.ln() + radial(i) + log_m) } else { 0.0 };
        (p_log_s - p + h) * w[i]
    });
    let cross = det_sum_by(v.len(), |i| {
        if v[i] > 0.0 {
            v[i] * (-radial(i) - log_m) * w[i]
        } else {
            0.0
        }
    });
    Ok((direct, bregman + cross))
}

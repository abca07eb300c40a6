//! The HWI and entropy-distance inequality reports for a joint density
//! against a product reference, plus the log-concavity diagnostic the HWI
//! route leans on.
//!
//! All quantities are per particle: H and I carry an explicit 1/N, and W2
//! uses the (1/N)-normalized quadratic cost, which absorbs the 1/sqrt(N)
//! prefactor of the joint-space inequality.

use crate::chaos::entropy::{entropy, fisher_information, relative_entropy, relative_fisher};
use crate::chaos::wasserstein::{density_distance, Metric, Order};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::ops::density_floor;
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HwiReport {
    pub n_particles: usize,
    /// Normalized relative entropy H(rho_N | reference).
    pub relative_entropy: f64,
    /// Per-particle W2 between the joint densities.
    pub w2: f64,
    pub w2_stderr: f64,
    /// Normalized relative Fisher information.
    pub relative_fisher: f64,
    /// W2 sqrt(I_rel) - H; nonnegative up to Monte Carlo noise on W2.
    pub hwi_slack: f64,
    /// W2 (sqrt(I/N) + sqrt(I_ref/N)) - |H/N - H_ref/N|; same caveat.
    pub entropy_distance_slack: f64,
    /// |H(rho_N) - H(reference)| per particle.
    pub entropy_gap: f64,
}

/// Runs both inequality checks between a joint density and the product
/// reference on the same grid. The HWI direction assumes the reference is
/// log-concave (convex trap); `neg_log_convexity` is the diagnostic.
pub fn hwi_report(
    rho_n: &ScalarField,
    reference: &ScalarField,
    n_particles: usize,
    moment_k: f64,
    n_samples: usize,
    seed: u64,
) -> Result<HwiReport> {
    if n_particles == 0 || rho_n.grid().dim() % n_particles != 0 {
        return Err(Error::DimensionMismatch(format!(
            "joint dim {} does not split into {n_particles} particles",
            rho_n.grid().dim()
        )));
    }
    let h = relative_entropy(rho_n, reference, n_particles)?;
    let i_rel = relative_fisher(rho_n, reference, n_particles)?;
    let metric = Metric::euclidean().per_particle(n_particles);
    let w2 = density_distance(rho_n, reference, Order::Two, metric, n_samples, seed)?;
    let hwi_slack = w2.value * i_rel.sqrt() - h;

    let np = n_particles as f64;
    let h_joint = entropy(rho_n, moment_k)? / np;
    let h_ref = entropy(reference, moment_k)? / np;
    let entropy_gap = (h_joint - h_ref).abs();
    let i_joint = fisher_information(rho_n)? / np;
    let i_ref = fisher_information(reference)? / np;
    let entropy_distance_slack = w2.value * (i_joint.sqrt() + i_ref.sqrt()) - entropy_gap;

    Ok(HwiReport {
        n_particles,
        relative_entropy: h,
        w2: w2.value,
        w2_stderr: w2.stderr,
        relative_fisher: i_rel,
        hwi_slack,
        entropy_distance_slack,
        entropy_gap,
    })
}

/// Smallest second difference of -log rho over interior nodes and axes,
/// scaled by 1/h^2. Nonnegative means the density is log-concave on the
/// grid, which is what the HWI reference requires.
pub fn neg_log_convexity(rho: &ScalarField) -> Result<f64> {
    rho.assert_density()?;
    let g = *rho.grid();
    let v = rho.values();
    let floor = density_floor(rho);
    let n = g.points_per_axis();
    let inv_h2 = 1.0 / (g.spacing() * g.spacing());
    let mut min_curv = f64::INFINITY;
    for axis in 0..g.dim() {
        let s = g.stride(axis);
        for i in 0..v.len() {
            let idx = g.axis_index(i, axis);
            if idx == 0 || idx == n - 1 {
                continue;
            }
            let (lo, mid, hi) = (v[i - s], v[i], v[i + s]);
            if lo <= floor || mid <= floor || hi <= floor {
                continue;
            }
            // second difference of -log rho
            let curv = -(lo.ln() - 2.0 * mid.ln() + hi.ln()) * inv_h2;
            min_curv = min_curv.min(curv);
        }
    }
    if min_curv == f64::INFINITY {
        return Err(Error::DensityFloor(
            "no interior points above the floor".into(),
        ));
    }
    Ok(min_curv)
}

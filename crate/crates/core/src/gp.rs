//! Gross-Pitaevskii ground states on a box.
//!
//! The functional (hbar = 2m = 1) is
//!     E[phi] = int |grad phi|² + V phi² + g phi⁴,   int phi² = 1,
//! and its minimizer solves -lap phi + V phi + 2 g phi³ = lambda phi with
//! lambda = E + g int phi⁴. Minimization runs the normalized imaginary-time
//! flow phi <- normalize(phi - step (-lap phi + V phi + 2 g phi³)); the
//! energy must decrease every step or the run aborts.

use crate::error::{Error, Result};
use crate::grid::{det_sum_by, Grid, ScalarField, VectorField};
use crate::ops::{self, FloorPolicy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Trap {
    /// V = strength |x|²
    Harmonic { strength: f64 },
    /// V = strength |x|⁴
    Quartic { strength: f64 },
}

impl Trap {
    pub fn harmonic() -> Trap {
        Trap::Harmonic { strength: 1.0 }
    }

    pub fn quartic() -> Trap {
        Trap::Quartic { strength: 1.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        match *self {
            Trap::Harmonic { strength } => strength * r2,
            Trap::Quartic { strength } => strength * r2 * r2,
        }
    }

    /// Convex in x? (Both shapes are; kept explicit for transport checks.)
    pub fn is_convex(&self) -> bool {
        true
    }

    pub fn strength(&self) -> f64 {
        match *self {
            Trap::Harmonic { strength } | Trap::Quartic { strength } => strength,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpProblem {
    pub grid: Grid,
    pub trap: Trap,
    pub g: f64,
}

impl GpProblem {
    pub fn new(grid: Grid, trap: Trap, g: f64) -> Result<GpProblem> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::InvalidConfig(format!("coupling g must be >= 0, got {g}")));
        }
        if !(trap.strength() > 0.0) {
            return Err(Error::InvalidConfig("trap strength must be > 0".into()));
        }
        Ok(GpProblem { grid, trap, g })
    }

    pub fn trap_values(&self) -> Vec<f64> {
        let grid = self.grid;
        let mut v = vec![0.0; grid.len()];
        v.par_chunks_mut(4096).enumerate().for_each(|(b, chunk)| {
            let mut x = vec![0.0; grid.dim()];
            for (k, val) in chunk.iter_mut().enumerate() {
                grid.point(b * 4096 + k, &mut x);
                *val = self.trap.eval(&x);
            }
        });
        v
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct GpSolution {
    pub phi: ScalarField,
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    pub residual: f64,
    pub iterations: usize,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Explicit step; None picks 0.8/(bound on the largest eigenvalue of the
    /// linearized operator), refreshed as the iterate changes.
    pub step: Option<f64>,
    /// Convergence when ||H phi - lambda phi|| < tol * max(1, |lambda|).
    pub tol: f64,
    pub max_iters: usize,
    /// Width of the Gaussian seed (ignored when `init` is given).
    pub seed_width: f64,
    pub init: Option<ScalarField>,
}

impl Default for FlowParams {
    fn default() -> FlowParams {
        FlowParams { step: None, tol: 1e-8, max_iters: 500_000, seed_width: 1.0, init: None }
    }
}

const ENERGY_SLACK_REL: f64 = 1e-11;

/// One application of H = -lap + V + 2 g phi²  (the linearization the flow
/// steps with; its Rayleigh quotient is lambda, not the energy).
fn apply_h(phi: &ScalarField, vvals: &[f64], g: f64) -> ScalarField {
    let mut h = ops::laplacian(phi);
    let pv = phi.values();
    h.values_mut().par_iter_mut().enumerate().for_each(|(i, hv)| {
        let p = pv[i];
        *hv = -*hv + vvals[i] * p + 2.0 * g * p * p * p;
    });
    h
}

/// Energy functional from its three parts; kinetic is the quadrature form
/// <phi, -lap phi>, which matches int |grad phi|² for decaying states.
pub fn gp_energy(phi: &ScalarField, problem: &GpProblem) -> Result<EnergyBreakdown> {
    if phi.grid() != &problem.grid {
        return Err(Error::DimensionMismatch("phi grid != problem grid".into()));
    }
    let w = problem.grid.weights();
    let norm = det_sum_by(phi.values().len(), {
        let pv = phi.values();
        let w = &w;
        move |i| pv[i] * pv[i] * w[i]
    });
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(format!("int phi² = {norm}")));
    }
    let lap = ops::laplacian(phi);
    let pv = phi.values();
    let kinetic = det_sum_by(pv.len(), |i| -pv[i] * lap.values()[i] * w[i]);
    let vvals = problem.trap_values();
    let trap = det_sum_by(pv.len(), |i| vvals[i] * pv[i] * pv[i] * w[i]);
    let interaction = problem.g
        * det_sum_by(pv.len(), |i| {
            let p2 = pv[i] * pv[i];
            p2 * p2 * w[i]
        });
    Ok(EnergyBreakdown { kinetic, trap, interaction, total: kinetic + trap + interaction })
}

pub fn minimize_gp(problem: &GpProblem, params: &FlowParams) -> Result<GpSolution> {
    let grid = problem.grid;
    let vvals = problem.trap_values();
    let w = grid.weights();
    let vmax = vvals.iter().cloned().fold(0.0, f64::max);
    let lap_bound = ops::laplacian_bound(&grid);

    let mut phi = match &params.init {
        Some(f) => {
            if f.grid() != &grid {
                return Err(Error::DimensionMismatch("init grid != problem grid".into()));
            }
            f.clone()
        }
        None => {
            let w2 = params.seed_width * params.seed_width;
            ScalarField::from_fn(grid, |x| {
                (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * w2)).exp()
            })
        }
    };
    quad_normalize(&mut phi, &w)?;

    let mut energy_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut last_step = 0.0;
    for iter in 0..params.max_iters {
        let mut h = apply_h(&phi, &vvals, problem.g);
        let pv = phi.values();
        let hv = h.values();
        let lambda = det_sum_by(pv.len(), |i| pv[i] * hv[i] * w[i]);
        let quartic = det_sum_by(pv.len(), |i| {
            let p2 = pv[i] * pv[i];
            p2 * p2 * w[i]
        });
        let energy = lambda - problem.g * quartic;
        if energy > energy_prev + ENERGY_SLACK_REL * energy_prev.abs().max(1.0) {
            return Err(Error::EnergyIncreased { iteration: iter, from: energy_prev, to: energy });
        }
        energy_prev = energy;
        residual = det_sum_by(pv.len(), |i| {
            let r = hv[i] - lambda * pv[i];
            r * r * w[i]
        })
        .sqrt();
        if residual < params.tol * lambda.abs().max(1.0) {
            let energy = gp_energy(&phi, problem)?;
            return Ok(GpSolution {
                phi,
                lambda,
                energy,
                residual,
                iterations: iter,
                step: last_step,
            });
        }
        let rho_max = pv.iter().map(|p| p * p).fold(0.0, f64::max);
        let step = params
            .step
            .unwrap_or(0.8 / (lap_bound + vmax + 2.0 * problem.g * rho_max));
        last_step = step;
        // the H buffer becomes the next iterate in place
        for (hv, &p) in h.values_mut().iter_mut().zip(pv) {
            *hv = p - step * *hv;
        }
        quad_normalize(&mut h, &w)?;
        phi = h;
    }
    Err(Error::NoConvergence { iterations: params.max_iters, residual })
}

/// Rescales to unit quadrature norm against precomputed weights. Shared by
/// every imaginary-time flow in the crate.
pub(crate) fn quad_normalize(phi: &mut ScalarField, w: &[f64]) -> Result<()> {
    let pv = phi.values();
    let n2 = det_sum_by(pv.len(), |i| pv[i] * pv[i] * w[i]);
    if !(n2.is_finite() && n2 > 0.0) {
        return Err(Error::NotNormalized(format!("flow iterate has mass {n2}")));
    }
    let inv = 1.0 / n2.sqrt();
    phi.values_mut().iter_mut().for_each(|p| *p *= inv);
    Ok(())
}

impl GpSolution {
    /// rho = phi², flagged as density.
    pub fn density(&self) -> Result<ScalarField> {
        let mut rho = self.phi.clone();
        rho.values_mut().par_iter_mut().for_each(|v| *v = *v * *v);
        rho.into_density()
    }

    /// Drift of the ground-state diffusion: (1/2) grad rho / rho.
    pub fn drift(&self, policy: FloorPolicy) -> Result<VectorField> {
        ops::grad_log_density(&self.density()?, policy)
    }
}

/// Thomas-Fermi profile (lambda - V)_+ / (2g), the g -> inf limit shape,
/// normalized on the grid. Used as a strong-coupling reference.
pub fn thomas_fermi_density(problem: &GpProblem) -> Result<ScalarField> {
    if problem.g <= 0.0 {
        return Err(Error::InvalidConfig("Thomas-Fermi needs g > 0".into()));
    }
    // quadratic trap in d=1: normalization fixes lambda = (3g/2)^(2/3)
    let lambda = match (problem.trap, problem.grid.dim()) {
        (Trap::Harmonic { strength }, 1) => {
            (1.5 * problem.g).powf(2.0 / 3.0) * strength.powf(1.0 / 3.0)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "analytic Thomas-Fermi profile implemented for the 1d harmonic trap".into(),
            ))
        }
    };
    let trap = problem.trap;
    let g = problem.g;
    ScalarField::density_from_fn(problem.grid, move |x| {
        (lambda - trap.eval(x)).max(0.0) / (2.0 * g)
    })
}

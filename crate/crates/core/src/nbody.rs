//! Exact small-N ground states on tensor-product grids.
//!
//! The Hamiltonian is H = sum_j (-lap_j + V(x_j)) + sum_{j<k} v(|x_j - x_k|)
//! acting on the joint grid of dimension N*d (particle j owns axes
//! j*d..(j+1)*d). The operator is linear, so the imaginary-time flow is plain
//! projected power iteration on I - step*H. Feasible sizes are tiny by
//! construction; that is the point: these states are exact references for the
//! mean-field approximations, not a many-body solver.

use crate::error::{Error, Result};
use crate::gp::{quad_normalize, EnergyBreakdown, GpSolution};
use crate::grid::{det_sum_by, Grid, ScalarField, VectorField};
use crate::ops::{self, FloorPolicy};
use crate::scattering::PairPotential;
use crate::gp::Trap;

/// Cap on the joint dimension N*d. Memory grows as n^(N*d); six axes is
/// already the practical ceiling for quadrature-exact work.
pub const DIM_CAP: usize = 6;

#[derive(Debug, Clone)]
pub struct NBodyProblem {
    pub n_particles: usize,
    /// Per-particle dimension.
    pub dim: usize,
    /// Joint grid, dim = n_particles * dim.
    pub grid: Grid,
    pub trap: Trap,
    pub pair: PairPotential,
}

impl NBodyProblem {
    pub fn new(
        n_particles: usize,
        dim: usize,
        points_per_axis: usize,
        half_width: f64,
        trap: Trap,
        pair: PairPotential,
    ) -> Result<NBodyProblem> {
        if n_particles == 0 {
            return Err(Error::InvalidConfig("need at least one particle".into()));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidConfig(format!("particle dimension {dim} not in 1..=3")));
        }
        if n_particles * dim > DIM_CAP {
            return Err(Error::CapExceeded(format!(
                "joint dimension {} exceeds cap {DIM_CAP}",
                n_particles * dim
            )));
        }
        if !(trap.strength() > 0.0) {
            return Err(Error::InvalidConfig("trap strength must be > 0".into()));
        }
        let grid = Grid::new(n_particles * dim, points_per_axis, half_width)?;
        Ok(NBodyProblem { n_particles, dim, grid, trap, pair })
    }

    /// Single-particle grid with the same axis geometry.
    pub fn axis_grid(&self) -> Grid {
        self.grid.with_dim(self.dim).expect("dim <= joint dim")
    }

    /// W = sum_j V(x_j) + sum_{j<k} v(|x_j - x_k|) over the joint grid.
    pub fn potential_values(&self) -> Vec<f64> {
        let grid = self.grid;
        let nd = grid.dim();
        let n = grid.points_per_axis();
        let d = self.dim;
        let coords: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
        let mut w = vec![0.0; grid.len()];
        let mut m = vec![0usize; nd];
        let skip_pairs = self.pair.is_zero();
        for slot in w.iter_mut() {
            let mut acc = 0.0;
            for j in 0..self.n_particles {
                let mut x = [0.0; 3];
                for c in 0..d {
                    x[c] = coords[m[j * d + c]];
                }
                acc += self.trap.eval(&x[..d]);
            }
            if !skip_pairs {
                for j in 0..self.n_particles {
                    for k in j + 1..self.n_particles {
                        let mut dist2 = 0.0;
                        for c in 0..d {
                            let dx = coords[m[j * d + c]] - coords[m[k * d + c]];
                            dist2 += dx * dx;
                        }
                        acc += self.pair.evaluate(dist2.sqrt());
                    }
                }
            }
            *slot = acc;
            for a in (0..nd).rev() {
                m[a] += 1;
                if m[a] < n {
                    break;
                }
                m[a] = 0;
            }
        }
        w
    }
}

#[derive(Debug, Clone)]
pub struct NBodyGroundState {
    /// Quadrature-normalized, symmetrized, positive wave function.
    pub psi: ScalarField,
    /// psi², flagged as density.
    pub rho: ScalarField,
    /// Rayleigh quotient of `psi`, recomputed after symmetrization.
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    n_particles: usize,
    dim: usize,
}

impl NBodyGroundState {
    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_particle_energy(&self) -> f64 {
        self.energy / self.n_particles as f64
    }

    /// Joint density of the first `particles` particles (any block works, by
    /// exchange symmetry).
    pub fn marginal(&self, particles: usize) -> Result<ScalarField> {
        if particles == 0 || particles > self.n_particles {
            return Err(Error::DimensionMismatch(format!(
                "cannot keep {particles} of {} particles",
                self.n_particles
            )));
        }
        self.rho.marginalize(particles * self.dim)
    }

    /// Nelson drift (1/2) grad rho / rho on the joint grid.
    pub fn drift(&self, policy: FloorPolicy) -> Result<VectorField> {
        ops::grad_log_density(&self.rho, policy)
    }
}

/// Ground state by normalized imaginary-time iteration. Converges when the
/// eigen-residual ||H psi - E psi|| drops under tol * max(1, |E|); that bound
/// also pins the Rayleigh quotient: one further step changes E by at most
/// O(step * residual²), far below tol.
pub fn ground_state(
    problem: &NBodyProblem,
    tol: f64,
    max_iter: usize,
) -> Result<NBodyGroundState> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidConfig(format!("tolerance must be > 0, got {tol}")));
    }
    let grid = problem.grid;
    let wvals = problem.potential_values();
    let qw = grid.weights();
    let wmax = wvals.iter().cloned().fold(0.0, f64::max);
    let step = 0.8 / (ops::laplacian_bound(&grid) + wmax);

    let mut psi = ScalarField::from_fn(grid, |x| {
        (-x.iter().map(|c| c * c).sum::<f64>() / 2.0).exp()
    });
    quad_normalize(&mut psi, &qw)?;

    let mut lambda_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut converged = None;
    for iter in 0..max_iter {
        let mut h = ops::laplacian(&psi);
        {
            let pv = psi.values();
            let hv = h.values_mut();
            for i in 0..pv.len() {
                hv[i] = -hv[i] + wvals[i] * pv[i];
            }
        }
        let pv = psi.values();
        let hv = h.values();
        let lambda = det_sum_by(pv.len(), |i| pv[i] * hv[i] * qw[i]);
        if lambda > lambda_prev + 1e-11 * lambda_prev.abs().max(1.0) {
            return Err(Error::EnergyIncreased { iteration: iter, from: lambda_prev, to: lambda });
        }
        lambda_prev = lambda;
        residual = det_sum_by(pv.len(), |i| {
            let r = hv[i] - lambda * pv[i];
            r * r * qw[i]
        })
        .sqrt();
        if residual < tol * lambda.abs().max(1.0) {
            converged = Some(iter);
            break;
        }
        for (hv, &p) in h.values_mut().iter_mut().zip(pv) {
            *hv = p - step * *hv;
        }
        quad_normalize(&mut h, &qw)?;
        psi = h;
    }
    let Some(iterations) = converged else {
        return Err(Error::NoConvergence { iterations: max_iter, residual });
    };

    // The flow preserves exchange symmetry only up to rounding; project back
    // onto the symmetric sector and recompute everything on the final state.
    let mut psi = symmetrize(&psi, problem.n_particles, problem.dim)?;
    quad_normalize(&mut psi, &qw)?;
    let mut h = ops::laplacian(&psi);
    {
        let pv = psi.values();
        let hv = h.values_mut();
        for i in 0..pv.len() {
            hv[i] = -hv[i] + wvals[i] * pv[i];
        }
    }
    let pv = psi.values();
    let hv = h.values();
    let energy = det_sum_by(pv.len(), |i| pv[i] * hv[i] * qw[i]);
    let residual = det_sum_by(pv.len(), |i| {
        let r = hv[i] - energy * pv[i];
        r * r * qw[i]
    })
    .sqrt();
    let mut rho = psi.clone();
    rho.values_mut().iter_mut().for_each(|v| *v = *v * *v);
    let rho = rho.into_density()?;
    Ok(NBodyGroundState {
        psi,
        rho,
        energy,
        residual,
        iterations,
        n_particles: problem.n_particles,
        dim: problem.dim,
    })
}

/// Average of a joint field over all particle-block permutations.
pub fn symmetrize(psi: &ScalarField, n_particles: usize, dim: usize) -> Result<ScalarField> {
    let grid = *psi.grid();
    if grid.dim() != n_particles * dim {
        return Err(Error::DimensionMismatch(format!(
            "grid dim {} != {n_particles} particles x {dim}",
            grid.dim()
        )));
    }
    if n_particles == 1 {
        return Ok(psi.clone());
    }
    let nd = grid.dim();
    let n = grid.points_per_axis();
    let vals = psi.values();
    let mut acc = vec![0.0; vals.len()];
    let perms = permutations(n_particles);
    let mut src_stride = vec![0usize; nd];
    for p in &perms {
        // out(..., x_q, ...) reads psi at the point whose block q holds x_{p(q)}
        for q in 0..n_particles {
            for c in 0..dim {
                src_stride[p[q] * dim + c] = grid.stride(q * dim + c);
            }
        }
        let mut m = vec![0usize; nd];
        let mut src = 0usize;
        for slot in acc.iter_mut() {
            *slot += vals[src];
            for a in (0..nd).rev() {
                m[a] += 1;
                if m[a] < n {
                    src += src_stride[a];
                    break;
                }
                m[a] = 0;
                src -= (n - 1) * src_stride[a];
            }
        }
    }
    let inv = 1.0 / perms.len() as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    ScalarField::from_values(grid, acc)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heaps(k: usize, arr: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(arr.clone());
            return;
        }
        for i in 0..k {
            heaps(k - 1, arr, out);
            if k % 2 == 0 {
                arr.swap(i, k - 1);
            } else {
                arr.swap(0, k - 1);
            }
        }
    }
    let mut arr: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heaps(n, &mut arr, &mut out);
    out
}

/// Per-particle energy split: kinetic of particle 1, trap of particle 1,
/// half the interaction of particle 1 with everyone else. By exchange
/// symmetry the three sum to E0 / N.
pub fn energy_components(
    state: &NBodyGroundState,
    problem: &NBodyProblem,
) -> Result<EnergyBreakdown> {
    if state.psi.grid() != &problem.grid {
        return Err(Error::DimensionMismatch("state grid != problem grid".into()));
    }
    let grid = problem.grid;
    let d = problem.dim;
    let n = grid.points_per_axis();
    let qw = grid.weights();
    let pv = state.psi.values();

    let first_axes: Vec<usize> = (0..d).collect();
    let lap1 = ops::laplacian_axes(&state.psi, &first_axes);
    let kinetic = det_sum_by(pv.len(), |i| -pv[i] * lap1.values()[i] * qw[i]);

    let axis_grid = problem.axis_grid();
    let block_stride = grid.len() / axis_grid.len();
    let v1: Vec<f64> = {
        let mut v = vec![0.0; axis_grid.len()];
        let mut x = vec![0.0; d];
        for (b, slot) in v.iter_mut().enumerate() {
            axis_grid.point(b, &mut x);
            *slot = problem.trap.eval(&x);
        }
        v
    };
    let trap = det_sum_by(pv.len(), |i| v1[i / block_stride] * pv[i] * pv[i] * qw[i]);

    let coords: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
    let mut interaction = 0.0;
    if !problem.pair.is_zero() {
        for j in 1..problem.n_particles {
            interaction += det_sum_by(pv.len(), |i| {
                let mut dist2 = 0.0;
                for c in 0..d {
                    let a0 = (i / grid.stride(c)) % n;
                    let aj = (i / grid.stride(j * d + c)) % n;
                    let dx = coords[a0] - coords[aj];
                    dist2 += dx * dx;
                }
                problem.pair.evaluate(dist2.sqrt()) * pv[i] * pv[i] * qw[i]
            });
        }
        interaction *= 0.5;
    }

    Ok(EnergyBreakdown { kinetic, trap, interaction, total: kinetic + trap + interaction })
}

/// Interaction-ball radius N^(-1/3 - delta). The exponent window is the
/// three-dimensional one; other dimensions pass an explicit radius instead.
pub fn interaction_ball_radius(n_particles: usize, delta: f64) -> Result<f64> {
    if n_particles < 2 {
        return Err(Error::InvalidConfig("ball radius needs at least 2 particles".into()));
    }
    if !(delta > 0.0 && delta <= 4.0 / 51.0) {
        return Err(Error::InvalidConfig(format!(
            "delta = {delta} outside (0, 4/51]"
        )));
    }
    Ok((n_particles as f64).powf(-(1.0 / 3.0) - delta))
}

/// Quadrature of ||b1 - u(r1)||² rho over the joint grid, with the first
/// particle's points excluded inside `radius` of any other particle. b1 is
/// the first block of the exact drift, u the reference drift on the same
/// per-particle grid. radius = 0 disables the exclusion.
pub fn localized_drift_distance(
    state: &NBodyGroundState,
    gp: &GpSolution,
    radius: f64,
) -> Result<f64> {
    let grid = *state.rho.grid();
    let d = state.dim;
    if gp.phi.grid().dim() != d || !gp.phi.grid().same_axis_geometry(&grid) {
        return Err(Error::DimensionMismatch(
            "reference drift grid must match the per-particle axes".into(),
        ));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("radius must be >= 0, got {radius}")));
    }
    let b = state.drift(FloorPolicy::Clamp)?;
    let u = gp.drift(FloorPolicy::Clamp)?;
    let n = grid.points_per_axis();
    let block_stride = grid.len() / gp.phi.grid().len();
    let coords: Vec<f64> = (0..n).map(|i| grid.coord(i)).collect();
    let rho = state.rho.values();
    let qw = grid.weights();
    let n_particles = state.n_particles;
    Ok(det_sum_by(rho.len(), |i| {
        if radius > 0.0 {
            for j in 1..n_particles {
                let mut dist2 = 0.0;
                for c in 0..d {
                    let a0 = (i / grid.stride(c)) % n;
                    let aj = (i / grid.stride(j * d + c)) % n;
                    let dx = coords[a0] - coords[aj];
                    dist2 += dx * dx;
                }
                if dist2.sqrt() < radius {
                    return 0.0;
                }
            }
        }
        let b1 = i / block_stride;
        let mut s = 0.0;
        for c in 0..d {
            let diff = b.component(c)[i] - u.component(c)[b1];
            s += diff * diff;
        }
        s * rho[i] * qw[i]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{minimize_gp, FlowParams, GpProblem};
    use nalgebra::DMatrix;

    fn harmonic_problem(
        n_particles: usize,
        n: usize,
        l: f64,
        pair: PairPotential,
    ) -> NBodyProblem {
        NBodyProblem::new(n_particles, 1, n, l, Trap::harmonic(), pair).unwrap()
    }

    /// Dense assembly of the same discretization: explicit matrix with the
    /// five-point coefficients, diagonal W. Independent of the stencil code.
    fn dense_ground(problem: &NBodyProblem) -> (f64, Vec<f64>) {
        let grid = problem.grid;
        let len = grid.len();
        let n = grid.points_per_axis();
        let wv = problem.potential_values();
        let inv12h2 = 1.0 / (12.0 * grid.spacing() * grid.spacing());
        let mut a = DMatrix::<f64>::zeros(len, len);
        for i in 0..len {
            a[(i, i)] = wv[i];
            for axis in 0..grid.dim() {
                let s = grid.stride(axis);
                let k = grid.axis_index(i, axis);
                a[(i, i)] += 30.0 * inv12h2;
                if k >= 1 {
                    a[(i, i - s)] -= 16.0 * inv12h2;
                }
                if k + 1 < n {
                    a[(i, i + s)] -= 16.0 * inv12h2;
                }
                if k >= 2 {
                    a[(i, i - 2 * s)] += inv12h2;
                }
                if k + 2 < n {
                    a[(i, i + 2 * s)] += inv12h2;
                }
            }
        }
        let eig = a.symmetric_eigen();
        let mut min_idx = 0;
        for i in 1..len {
            if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
                min_idx = i;
            }
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(min_idx).iter().cloned().collect();
        // quadrature-normalize and fix the sign
        let n2: f64 = v.iter().enumerate().map(|(i, x)| x * x * grid.weight(i)).sum();
        let mut peak = 0.0f64;
        let mut peak_sign = 1.0;
        for &x in &v {
            if x.abs() > peak {
                peak = x.abs();
                peak_sign = x.signum();
            }
        }
        let scale = peak_sign / n2.sqrt();
        v.iter_mut().for_each(|x| *x *= scale);
        (eig.eigenvalues[min_idx], v)
    }

    #[test]
    fn single_particle_matches_gp_solver() {
        let problem = harmonic_problem(1, 64, 6.0, PairPotential::zero());
        let state = ground_state(&problem, 1e-10, 200_000).unwrap();
        let gp_problem = GpProblem::new(problem.grid, Trap::harmonic(), 0.0).unwrap();
        let gp = minimize_gp(&gp_problem, &FlowParams { tol: 1e-10, ..Default::default() })
            .unwrap();
        assert!((state.energy - gp.energy.total).abs() < 1e-6);
    }

    #[test]
    fn single_particle_3d_energy_near_three() {
        let problem = NBodyProblem::new(1, 3, 24, 5.0, Trap::harmonic(), PairPotential::zero())
            .unwrap();
        let state = ground_state(&problem, 1e-8, 100_000).unwrap();
        assert!((state.energy - 3.0).abs() < 5e-3, "E = {}", state.energy);
    }

    #[test]
    fn noninteracting_pair_factorizes() {
        let single = harmonic_problem(1, 48, 6.0, PairPotential::zero());
        let s1 = ground_state(&single, 1e-10, 200_000).unwrap();
        let pairp = harmonic_problem(2, 48, 6.0, PairPotential::zero());
        let s2 = ground_state(&pairp, 1e-10, 200_000).unwrap();
        assert!((s2.energy - 2.0 * s1.energy).abs() < 1e-6);

        // TV(rho2, rho1 x rho1) directly by quadrature
        let n = 48;
        let g2 = pairp.grid;
        let r1 = s1.rho.values();
        let r2 = s2.rho.values();
        let mut tv = 0.0;
        for i in 0..n {
            for j in 0..n {
                let flat = i * n + j;
                tv += (r2[flat] - r1[i] * r1[j]).abs() * g2.weight(flat);
            }
        }
        tv *= 0.5;
        assert!(tv < 1e-6, "TV = {tv:.3e}");
    }

    #[test]
    fn pair_energy_and_components_match_dense_oracle() {
        let pair = PairPotential::gaussian(4.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(2, 32, 6.0, pair);
        let (e_oracle, v_oracle) = dense_ground(&problem);
        let state = ground_state(&problem, 1e-11, 300_000).unwrap();
        assert!(
            (state.energy - e_oracle).abs() <= 1e-8 * e_oracle.abs().max(1.0),
            "flow E = {:.12}, dense E = {:.12}",
            state.energy,
            e_oracle
        );

        // component oracle: direct quadratures on the dense eigenvector
        let grid = problem.grid;
        let n = 32;
        let h = grid.spacing();
        let inv12h2 = 1.0 / (12.0 * h * h);
        let at = |v: &[f64], i: isize, j: usize| -> f64 {
            if (0..n as isize).contains(&i) {
                v[i as usize * n + j]
            } else {
                0.0
            }
        };
        let mut kin = 0.0;
        let mut trap = 0.0;
        let mut inter = 0.0;
        for i in 0..n {
            for j in 0..n {
                let flat = i * n + j;
                let w = grid.weight(flat);
                let ii = i as isize;
                let lap1 = (-at(&v_oracle, ii - 2, j) + 16.0 * at(&v_oracle, ii - 1, j)
                    - 30.0 * at(&v_oracle, ii, j)
                    + 16.0 * at(&v_oracle, ii + 1, j)
                    - at(&v_oracle, ii + 2, j))
                    * inv12h2;
                let p = v_oracle[flat];
                let (x, y) = (grid.coord(i), grid.coord(j));
                kin += -p * lap1 * w;
                trap += x * x * p * p * w;
                inter += 0.5 * problem.pair.evaluate((x - y).abs()) * p * p * w;
            }
        }
        let comps = energy_components(&state, &problem).unwrap();
        assert!((comps.kinetic - kin).abs() <= 1e-8 * kin.abs().max(1.0));
        assert!((comps.trap - trap).abs() <= 1e-8 * trap.abs().max(1.0));
        assert!((comps.interaction - inter).abs() <= 1e-8 * inter.abs().max(1.0));
    }

    #[test]
    fn components_sum_to_per_particle_energy() {
        let pair = PairPotential::gaussian(2.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(3, 24, 5.5, pair);
        let state = ground_state(&problem, 1e-10, 300_000).unwrap();
        let comps = energy_components(&state, &problem).unwrap();
        let per = state.per_particle_energy();
        assert!(
            (comps.total - per).abs() <= 1e-8 * per.abs().max(1.0),
            "components {} vs E0/N {}",
            comps.total,
            per
        );
        assert!(comps.interaction > 0.0);
    }

    #[test]
    fn density_is_exchange_symmetric() {
        let pair = PairPotential::gaussian(2.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(3, 20, 5.5, pair);
        let state = ground_state(&problem, 1e-9, 300_000).unwrap();
        let n = 20;
        let r = state.rho.values();
        let max = state.rho.max_value();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let base = (i * n + j) * n + k;
                    let swapped = (j * n + i) * n + k; // particles 1 <-> 2
                    let cycled = (k * n + i) * n + j; // cycle 1 -> 2 -> 3
                    worst = worst
                        .max((r[base] - r[swapped]).abs())
                        .max((r[base] - r[cycled]).abs());
                }
            }
        }
        assert!(worst <= 1e-8 * max, "asymmetry {worst:.3e} of peak {max:.3e}");
    }

    #[test]
    fn symmetrize_averages_block_permutations() {
        let grid = Grid::new(2, 16, 3.0).unwrap();
        let f = |x: f64| (-x * x).exp();
        let g = |x: f64| 1.0 / (1.0 + x * x);
        let field = ScalarField::from_fn(grid, |x| f(x[0]) * g(x[1]));
        let sym = symmetrize(&field, 2, 1).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let (x, y) = (grid.coord(i), grid.coord(j));
                let want = 0.5 * (f(x) * g(y) + f(y) * g(x));
                let got = sym.values()[i * 16 + j];
                assert!((got - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn marginal_of_noninteracting_triple_matches_single_density() {
        let triple = harmonic_problem(3, 24, 5.0, PairPotential::zero());
        let s3 = ground_state(&triple, 1e-10, 300_000).unwrap();
        let single = harmonic_problem(1, 24, 5.0, PairPotential::zero());
        let s1 = ground_state(&single, 1e-10, 200_000).unwrap();
        let m1 = s3.marginal(1).unwrap();
        let g = *m1.grid();
        let l1 = det_sum_by(m1.values().len(), |i| {
            (m1.values()[i] - s1.rho.values()[i]).abs() * g.weight(i)
        });
        assert!(l1 < 1e-5, "L1 distance {l1:.3e}");
    }

    #[test]
    fn ground_energy_monotone_in_repulsion() {
        let base = PairPotential::gaussian(2.0, 0.5, 2.5).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for factor in [0.0, 1.0, 2.0] {
            let pair = base.strength_scaled(factor).unwrap();
            let problem = harmonic_problem(2, 24, 5.0, pair);
            let state = ground_state(&problem, 1e-9, 200_000).unwrap();
            assert!(
                state.energy >= prev - 1e-10,
                "E({factor}) = {} under previous {prev}",
                state.energy
            );
            prev = state.energy;
        }
    }

    #[test]
    fn localized_drift_vanishes_for_free_particles() {
        let problem = harmonic_problem(2, 48, 6.0, PairPotential::zero());
        let state = ground_state(&problem, 1e-10, 200_000).unwrap();
        let gp_problem = GpProblem::new(problem.axis_grid(), Trap::harmonic(), 0.0).unwrap();
        let gp = minimize_gp(&gp_problem, &FlowParams { tol: 1e-10, ..Default::default() })
            .unwrap();
        let dist = localized_drift_distance(&state, &gp, 0.0).unwrap();
        assert!(dist < 1e-6, "drift distance {dist:.3e}");
    }

    #[test]
    fn zero_radius_matches_direct_quadrature() {
        let pair = PairPotential::gaussian(3.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(2, 32, 6.0, pair);
        let state = ground_state(&problem, 1e-10, 300_000).unwrap();
        let gp_problem = GpProblem::new(problem.axis_grid(), Trap::harmonic(), 0.5).unwrap();
        let gp = minimize_gp(&gp_problem, &FlowParams { tol: 1e-9, ..Default::default() })
            .unwrap();
        let got = localized_drift_distance(&state, &gp, 0.0).unwrap();

        // unrestricted integral, plain loop
        let b = state.drift(FloorPolicy::Clamp).unwrap();
        let u = gp.drift(FloorPolicy::Clamp).unwrap();
        let grid = problem.grid;
        let n = 32;
        let mut want = 0.0;
        for i in 0..n {
            for j in 0..n {
                let flat = i * n + j;
                let diff = b.component(0)[flat] - u.component(0)[i];
                want += diff * diff * state.rho.values()[flat] * grid.weight(flat);
            }
        }
        assert!(
            (got - want).abs() <= 1e-12 * want.abs().max(1e-12),
            "got {got:.15e} want {want:.15e}"
        );
    }

    #[test]
    fn drift_distance_monotone_in_exclusion_radius() {
        let pair = PairPotential::gaussian(3.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(2, 32, 6.0, pair);
        let state = ground_state(&problem, 1e-9, 300_000).unwrap();
        let gp_problem = GpProblem::new(problem.axis_grid(), Trap::harmonic(), 0.0).unwrap();
        let gp = minimize_gp(&gp_problem, &FlowParams { tol: 1e-8, ..Default::default() })
            .unwrap();
        let mut prev = f64::INFINITY;
        for radius in [0.0, 0.1, 0.3, 0.6] {
            let d = localized_drift_distance(&state, &gp, radius).unwrap();
            assert!(d <= prev + 1e-15, "distance grew at radius {radius}");
            prev = d;
        }
        assert!(prev < localized_drift_distance(&state, &gp, 0.0).unwrap());
    }

    #[test]
    fn ball_radius_formula_and_bounds() {
        let r = interaction_ball_radius(1000, 4.0 / 51.0).unwrap();
        assert!((r - 0.05817091329374359).abs() < 1e-15);
        assert!(interaction_ball_radius(1000, 0.0).is_err());
        assert!(interaction_ball_radius(1000, 4.0 / 51.0 + 1e-9).is_err());
        assert!(interaction_ball_radius(1, 0.05).is_err());
    }

    #[test]
    fn rayleigh_is_stationary_at_convergence() {
        let pair = PairPotential::gaussian(2.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(2, 24, 5.0, pair);
        let tol = 1e-10;
        let state = ground_state(&problem, tol, 200_000).unwrap();
        // one more flow step by hand
        let wvals = problem.potential_values();
        let qw = problem.grid.weights();
        let wmax = wvals.iter().cloned().fold(0.0, f64::max);
        let step = 0.8 / (ops::laplacian_bound(&problem.grid) + wmax);
        let mut h = ops::laplacian(&state.psi);
        {
            let pv = state.psi.values();
            let hv = h.values_mut();
            for i in 0..pv.len() {
                hv[i] = pv[i] - step * (-hv[i] + wvals[i] * pv[i]);
            }
        }
        quad_normalize(&mut h, &qw).unwrap();
        let mut h2 = ops::laplacian(&h);
        {
            let pv = h.values();
            let hv = h2.values_mut();
            for i in 0..pv.len() {
                hv[i] = -hv[i] + wvals[i] * pv[i];
            }
        }
        let pv = h.values();
        let hv = h2.values();
        let lambda = det_sum_by(pv.len(), |i| pv[i] * hv[i] * qw[i]);
        assert!(
            (lambda - state.energy).abs() < tol * state.energy.abs().max(1.0),
            "one step moved E by {:.3e}",
            (lambda - state.energy).abs()
        );
    }

    #[test]
    fn density_positive_in_interior() {
        let pair = PairPotential::gaussian(4.0, 0.5, 2.5).unwrap();
        let problem = harmonic_problem(2, 32, 6.0, pair);
        let state = ground_state(&problem, 1e-10, 300_000).unwrap();
        let n = 32;
        let mut min_interior = f64::INFINITY;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                min_interior = min_interior.min(state.rho.values()[i * n + j]);
            }
        }
        assert!(min_interior > 0.0, "interior minimum {min_interior:.3e}");
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let zero = PairPotential::zero();
        assert!(matches!(
            NBodyProblem::new(4, 2, 16, 5.0, Trap::harmonic(), zero),
            Err(Error::CapExceeded(_))
        ));
        assert!(NBodyProblem::new(0, 1, 16, 5.0, Trap::harmonic(), zero).is_err());
        assert!(NBodyProblem::new(2, 4, 16, 5.0, Trap::harmonic(), zero).is_err());
        let problem = harmonic_problem(2, 16, 5.0, zero);
        assert!(ground_state(&problem, 0.0, 10).is_err());
        assert!(matches!(
            ground_state(&problem, 1e-12, 3),
            Err(Error::NoConvergence { .. })
        ));
    }
}

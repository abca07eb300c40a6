//! Euler-Maruyama ensembles for ground-state diffusions with unit noise.
//!
//! X_{k+1} = X_k + b(X_k) dt + sqrt(dt) xi_k, xi standard normal per
//! component. Each path owns an RNG stream keyed by (seed, path index), so
//! ensembles are bit-identical however the paths are scheduled. Paths are
//! reflected at the box walls; a run that reflects too often is reporting a
//! box that is too small, and fails.

use crate::error::{Error, Result};
use crate::grid::{SampleSet, ScalarField, VectorField};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fraction of steps allowed to hit the walls before the run is declared
/// out of domain.
const ESCAPE_BUDGET: f64 = 1e-3;

pub trait Drift: Sync {
    fn dim(&self) -> usize;
    /// Writes b(x) into `out` (len = dim).
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

pub struct ZeroDrift {
    pub dim: usize,
}

impl Drift for ZeroDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// b = -rate * x, the Ornstein-Uhlenbeck drift. With unit noise its
/// stationary variance is 1/(2 rate) per component.
pub struct OuDrift {
    pub dim: usize,
    pub rate: f64,
}

impl Drift for OuDrift {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, &c) in out.iter_mut().zip(x) {
            *o = -self.rate * c;
        }
    }
}

/// Drift sampled from a grid field by multilinear interpolation (the ground
/// state drifts live on grids).
pub struct GridDrift {
    field: VectorField,
}

impl GridDrift {
    pub fn new(field: VectorField) -> GridDrift {
        GridDrift { field }
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }
}

impl Drift for GridDrift {
    fn dim(&self) -> usize {
        self.field.grid().dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.field.interp(x, out);
    }
}

/// One d-dimensional drift applied independently to every particle block of
/// an N*d-dimensional state: the product/mean-field reference dynamics.
pub struct PerParticleDrift<D: Drift> {
    pub inner: D,
    pub n_particles: usize,
}

impl<D: Drift> Drift for PerParticleDrift<D> {
    fn dim(&self) -> usize {
        self.inner.dim() * self.n_particles
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let d = self.inner.dim();
        for q in 0..self.n_particles {
            self.inner.eval(&x[q * d..(q + 1) * d], &mut out[q * d..(q + 1) * d]);
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimParams {
    /// Number of steps; the horizon must sit on the step grid.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::InvalidConfig("horizon shorter than one step".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("need at least one path".into()));
        }
        let steps = (self.horizon / self.dt).round();
        if ((steps * self.dt - self.horizon) / self.horizon).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is not an integer number of dt = {} steps",
                self.horizon, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

pub enum InitialLaw<'a> {
    /// Draw X_0 from a grid density: inverse CDF in one dimension, rejection
    /// sampling against the density's peak otherwise.
    Density(&'a ScalarField),
    Point(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    dim: usize,
    times: Vec<f64>,
    /// n_paths x (n_steps + 1) x dim, row-major.
    positions: Vec<f64>,
    /// Drift evaluated at every stored position, same shape.
    drift_samples: Vec<f64>,
    params: SimParams,
    reflected_steps: usize,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.params.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn reflected_steps(&self) -> usize {
        self.reflected_steps
    }

    pub fn position(&self, path: usize, step: usize) -> &[f64] {
        let base = (path * self.times.len() + step) * self.dim;
        &self.positions[base..base + self.dim]
    }

    pub fn drift_sample(&self, path: usize, step: usize) -> &[f64] {
        let base = (path * self.times.len() + step) * self.dim;
        &self.drift_samples[base..base + self.dim]
    }

    /// All path positions at one time slice.
    pub fn positions_at(&self, step: usize) -> SampleSet {
        let mut data = Vec::with_capacity(self.n_paths() * self.dim);
        for p in 0..self.n_paths() {
            data.extend_from_slice(self.position(p, step));
        }
        SampleSet::new(self.dim, data).expect("slice shape is consistent")
    }

    pub fn final_positions(&self) -> SampleSet {
        self.positions_at(self.n_steps())
    }
}

/// Piecewise-linear CDF of a one-dimensional grid density; the sampler and
/// the KS test both use this object, so they agree about discretization.
#[derive(Debug, Clone)]
pub struct Cdf1d {
    xs: Vec<f64>,
    cs: Vec<f64>,
}

impl Cdf1d {
    pub fn new(rho: &ScalarField) -> Result<Cdf1d> {
        if rho.grid().dim() != 1 {
            return Err(Error::DimensionMismatch("CDF needs a 1d density".into()));
        }
        let g = *rho.grid();
        let v = rho.values();
        let h = g.spacing();
        let mut cs = vec![0.0; v.len()];
        for i in 1..v.len() {
            cs[i] = cs[i - 1] + 0.5 * (v[i - 1] + v[i]) * h;
        }
        let total = cs[v.len() - 1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NotNormalized(format!("CDF mass {total} not positive")));
        }
        cs.iter_mut().for_each(|c| *c /= total);
        let xs = (0..v.len()).map(|i| g.coord(i)).collect();
        Ok(Cdf1d { xs, cs })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = self.xs.partition_point(|&t| t <= x) - 1;
        let frac = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.cs[i] + frac * (self.cs[i + 1] - self.cs[i])
    }

    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cs.partition_point(|&c| c <= u).min(self.cs.len() - 1);
        if i == 0 {
            return self.xs[0];
        }
        let (c0, c1) = (self.cs[i - 1], self.cs[i]);
        if c1 <= c0 {
            return self.xs[i];
        }
        self.xs[i - 1] + (u - c0) / (c1 - c0) * (self.xs[i] - self.xs[i - 1])
    }
}

/// Kolmogorov-Smirnov statistic of samples against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    d
}

enum Sampler<'a> {
    InverseCdf(Cdf1d),
    Rejection { rho: &'a ScalarField, bound: f64 },
    Fixed(&'a [f64]),
}

impl Sampler<'_> {
    fn draw(&self, rng: &mut ChaCha12Rng, out: &mut [f64]) {
        match self {
            Sampler::InverseCdf(cdf) => out[0] = cdf.inverse(rng.gen::<f64>()),
            Sampler::Rejection { rho, bound } => {
                let g = rho.grid();
                let l = g.half_width();
                loop {
                    for o in out.iter_mut() {
                        *o = rng.gen_range(-l..=l);
                    }
                    let u: f64 = rng.gen();
                    if u * bound <= rho.interp(out) {
                        return;
                    }
                }
            }
            Sampler::Fixed(x) => out.copy_from_slice(x),
        }
    }
}

/// Draws configurations from a grid density: inverse CDF in one dimension,
/// rejection sampling otherwise. One sequential stream, so the output
/// depends only on (rho, n, seed).
pub fn sample_density(rho: &ScalarField, n: usize, seed: u64) -> Result<SampleSet> {
    rho.assert_density()?;
    let dim = rho.grid().dim();
    let sampler = if dim == 1 {
        Sampler::InverseCdf(Cdf1d::new(rho)?)
    } else {
        Sampler::Rejection { rho, bound: rho.max_value() }
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * dim];
    for chunk in data.chunks_mut(dim) {
        sampler.draw(&mut rng, chunk);
    }
    SampleSet::new(dim, data)
}

/// Simulates the ensemble in the box [-half_width, half_width]^dim.
pub fn simulate<D: Drift + ?Sized>(
    drift: &D,
    half_width: f64,
    init: &InitialLaw,
    params: &SimParams,
) -> Result<PathEnsemble> {
    let steps = params.n_steps()?;
    let dim = drift.dim();
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("box half width {half_width} must be > 0")));
    }
    let sampler = match init {
        InitialLaw::Density(rho) => {
            if rho.grid().dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "initial density dim {} != drift dim {dim}",
                    rho.grid().dim()
                )));
            }
            if rho.grid().half_width() > half_width + 1e-12 {
                return Err(Error::InvalidConfig(
                    "initial density extends beyond the simulation box".into(),
                ));
            }
            rho.assert_density()?;
            if dim == 1 {
                Sampler::InverseCdf(Cdf1d::new(rho)?)
            } else {
                Sampler::Rejection { rho, bound: rho.max_value() }
            }
        }
        InitialLaw::Point(x) => {
            if x.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "initial point dim {} != drift dim {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|c| c.abs() > half_width) {
                return Err(Error::InvalidConfig("initial point outside the box".into()));
            }
            Sampler::Fixed(x)
        }
    };

    let path_len = (steps + 1) * dim;
    let mut positions = vec![0.0; params.n_paths * path_len];
    let mut drift_samples = vec![0.0; params.n_paths * path_len];
    let sqrt_dt = params.dt.sqrt();

    let reflected: usize = positions
        .par_chunks_mut(path_len)
        .zip(drift_samples.par_chunks_mut(path_len))
        .enumerate()
        .map(|(p, (pos, bs))| -> Result<usize> {
            let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
            rng.set_stream(p as u64);
            let mut x = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            sampler.draw(&mut rng, &mut x);
            pos[..dim].copy_from_slice(&x);
            drift.eval(&x, &mut b);
            bs[..dim].copy_from_slice(&b);
            let mut bounces = 0usize;
            for k in 0..steps {
                let mut bounced = false;
                for c in 0..dim {
                    let xi: f64 = rng.sample(StandardNormal);
                    let mut y = x[c] + b[c] * params.dt + sqrt_dt * xi;
                    if !y.is_finite() {
                        return Err(Error::DomainEscape(format!(
                            "path {p} left the reals at step {k}"
                        )));
                    }
                    while y.abs() > half_width {
                        bounced = true;
                        y = if y > half_width {
                            2.0 * half_width - y
                        } else {
                            -2.0 * half_width - y
                        };
                    }
                    x[c] = y;
                }
                if bounced {
                    bounces += 1;
                }
                let base = (k + 1) * dim;
                pos[base..base + dim].copy_from_slice(&x);
                drift.eval(&x, &mut b);
                bs[base..base + dim].copy_from_slice(&b);
            }
            Ok(bounces)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();

    let total_steps = params.n_paths * steps;
    if (reflected as f64) > ESCAPE_BUDGET * total_steps as f64 {
        return Err(Error::DomainEscape(format!(
            "{reflected} of {total_steps} steps hit the walls; the box is too small"
        )));
    }

    let times = (0..=steps).map(|k| k as f64 * params.dt).collect();
    Ok(PathEnsemble {
        dim,
        times,
        positions,
        drift_samples,
        params: *params,
        reflected_steps: reflected,
    })
}

#[derive(Debug, Clone)]
pub struct StoppingRecord {
    /// First grid time the tagged particle sits within `radius` of another;
    /// horizon + dt encodes "never".
    pub tau: Vec<f64>,
    pub radius: f64,
    pub horizon: f64,
    pub dt: f64,
}

/// First-entry times of particle 1 into the radius-neighborhood of any other
/// particle, evaluated on the time grid only.
pub fn stopping_times(
    ensemble: &PathEnsemble,
    n_particles: usize,
    dim: usize,
    radius: f64,
) -> Result<StoppingRecord> {
    if n_particles < 2 {
        return Err(Error::InvalidConfig("stopping needs at least 2 particles".into()));
    }
    if ensemble.dim() != n_particles * dim {
        return Err(Error::DimensionMismatch(format!(
            "ensemble dim {} != {n_particles} x {dim}",
            ensemble.dim()
        )));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("radius must be >= 0, got {radius}")));
    }
    let never = ensemble.params().horizon + ensemble.params().dt;
    let tau = (0..ensemble.n_paths())
        .map(|p| {
            for (k, &t) in ensemble.times().iter().enumerate() {
                let x = ensemble.position(p, k);
                for j in 1..n_particles {
                    let mut dist2 = 0.0;
                    for c in 0..dim {
                        let dx = x[c] - x[j * dim + c];
                        dist2 += dx * dx;
                    }
                    if dist2.sqrt() < radius {
                        return t;
                    }
                }
            }
            never
        })
        .collect();
    Ok(StoppingRecord {
        tau,
        radius,
        horizon: ensemble.params().horizon,
        dt: ensemble.params().dt,
    })
}

/// P(tau >= t) with its binomial standard error.
pub fn survival_probability(record: &StoppingRecord, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=record.horizon).contains(&t) {
        return Err(Error::InvalidConfig(format!(
            "t = {t} outside [0, {}]",
            record.horizon
        )));
    }
    let n = record.tau.len() as f64;
    let hits = record.tau.iter().filter(|&&tau| tau >= t).count() as f64;
    let p = hits / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathEntropy {
    pub total: f64,
    pub per_particle: f64,
    pub stderr: f64,
    pub per_particle_stderr: f64,
}

/// Girsanov relative-entropy functional (1/2) E int_0^t ||b - u||² ds by
/// left-endpoint quadrature along the stored paths. The ensemble must have
/// been simulated under b for the estimate to mean anything; `n_particles`
/// only sets the per-particle normalization.
pub fn path_relative_entropy<B: Drift + ?Sized, U: Drift + ?Sized>(
    ensemble: &PathEnsemble,
    b: &B,
    u: &U,
    t: f64,
    n_particles: usize,
) -> Result<PathEntropy> {
    let dim = ensemble.dim();
    if b.dim() != dim || u.dim() != dim {
        return Err(Error::DimensionMismatch("drift dims != ensemble dim".into()));
    }
    if n_particles == 0 {
        return Err(Error::InvalidConfig("n_particles must be >= 1".into()));
    }
    let dt = ensemble.params().dt;
    if !(t > 0.0 && t <= ensemble.params().horizon + 1e-12) {
        return Err(Error::InvalidConfig(format!("t = {t} outside (0, horizon]")));
    }
    let steps = (t / dt).round();
    if ((steps * dt - t) / t).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "t = {t} is not an integer number of dt = {dt} steps"
        )));
    }
    let steps = steps as usize;
    let per_path: Vec<f64> = (0..ensemble.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut bv = vec![0.0; dim];
            let mut uv = vec![0.0; dim];
            let mut acc = 0.0;
            for k in 0..steps {
                let x = ensemble.position(p, k);
                b.eval(x, &mut bv);
                u.eval(x, &mut uv);
                let mut s = 0.0;
                for c in 0..dim {
                    let diff = bv[c] - uv[c];
                    s += diff * diff;
                }
                acc += s;
            }
            0.5 * acc * dt
        })
        .collect();
    let n = per_path.len() as f64;
    let mean = per_path.iter().sum::<f64>() / n;
    let var = per_path.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let stderr = (var / n).sqrt();
    let np = n_particles as f64;
    Ok(PathEntropy {
        total: mean,
        per_particle: mean / np,
        stderr,
        per_particle_stderr: stderr / np,
    })
}

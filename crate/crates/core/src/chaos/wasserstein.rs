//! Transport distances between empirical measures and grid densities.
//!
//! Configurations of n particles carry the normalized metrics: order 1 costs
//! (1/n) sum of a bounded per-particle ground distance, order 2 costs
//! (1/n) sum of squared Euclidean block distances (the truncation never
//! applies there), with the square root taken at the end so W1 <= W2.

use crate::chaos::assignment::min_cost_assignment;
use crate::diffusion::{sample_density, Cdf1d};
use crate::error::{Error, Result};
use crate::grid::{SampleSet, ScalarField};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Exact assignment is cubic; above this many samples it is not worth it.
pub const ASSIGNMENT_CAP: usize = 1024;

const QUANTILE_NODES: usize = 8192;
const BOOTSTRAP_RESAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    TruncatedEuclidean,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    One,
    Two,
}

/// Ground metric on configurations: a per-particle distance averaged over
/// the particle blocks of the vector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub truncation: f64,
    pub n_particles: usize,
}

impl Metric {
    pub fn truncated(truncation: f64) -> Result<Metric> {
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "truncation must be positive, got {truncation}"
            )));
        }
        Ok(Metric { kind: MetricKind::TruncatedEuclidean, truncation, n_particles: 1 })
    }

    pub fn euclidean() -> Metric {
        Metric { kind: MetricKind::Euclidean, truncation: 1.0, n_particles: 1 }
    }

    pub fn per_particle(mut self, n_particles: usize) -> Metric {
        self.n_particles = n_particles.max(1);
        self
    }

    fn block_dim(&self, dim: usize) -> Result<usize> {
        if self.n_particles == 0 || dim % self.n_particles != 0 {
            return Err(Error::DimensionMismatch(format!(
                "dim {dim} does not split into {} particle blocks",
                self.n_particles
            )));
        }
        Ok(dim / self.n_particles)
    }

    /// Order-1 configuration distance: (1/n) sum of per-block distances,
    /// each truncated when the kind asks for it.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = x.len() / self.n_particles;
        let mut acc = 0.0;
        for q in 0..self.n_particles {
            let mut r2 = 0.0;
            for c in q * d..(q + 1) * d {
                let diff = x[c] - y[c];
                r2 += diff * diff;
            }
            let r = r2.sqrt();
            acc += match self.kind {
                MetricKind::TruncatedEuclidean => r.min(self.truncation),
                MetricKind::Euclidean => r,
            };
        }
        acc / self.n_particles as f64
    }

    /// Order-2 configuration cost: (1/n) sum of squared block distances.
    pub fn cost2(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for (a, b) in x.iter().zip(y) {
            let diff = a - b;
            r2 += diff * diff;
        }
        r2 / self.n_particles as f64
    }
}

impl Default for Metric {
    fn default() -> Metric {
        Metric { kind: MetricKind::TruncatedEuclidean, truncation: 1.0, n_particles: 1 }
    }
}

fn check_pair(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "sample dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(format!(
            "exact assignment needs equal counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() == 0 {
        return Err(Error::SizeMismatch("empty sample sets".into()));
    }
    if a.len() > ASSIGNMENT_CAP {
        return Err(Error::CapExceeded(format!(
            "{} samples over the exact-assignment cap {ASSIGNMENT_CAP}",
            a.len()
        )));
    }
    Ok(())
}

fn optimal_mean_cost(a: &SampleSet, b: &SampleSet, cost: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let n = a.len();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        let xi = a.point(i);
        for j in 0..n {
            matrix[i * n + j] = cost(xi, b.point(j));
        }
    }
    let assign = min_cost_assignment(&matrix, n);
    let total: f64 = (0..n).map(|i| matrix[i * n + assign[i]]).sum();
    total / n as f64
}

/// Exact W1/W2 between equal-size empirical measures. The cost is symmetric
/// in the arguments, and they are ordered canonically before solving so the
/// returned value is bit-identical under swapping.
pub fn wasserstein_samples(
    a: &SampleSet,
    b: &SampleSet,
    order: Order,
    metric: Metric,
) -> Result<f64> {
    check_pair(a, b)?;
    metric.block_dim(a.dim())?;
    let (a, b) = if a
        .data()
        .iter()
        .zip(b.data())
        .find_map(|(x, y)| match x.total_cmp(y) {
            std::cmp::Ordering::Equal => None,
            ord => Some(ord),
        })
        .unwrap_or(std::cmp::Ordering::Equal)
        == std::cmp::Ordering::Greater
    {
        (b, a)
    } else {
        (a, b)
    };
    match order {
        Order::One => Ok(optimal_mean_cost(a, b, |x, y| metric.distance(x, y))),
        Order::Two => Ok(optimal_mean_cost(a, b, |x, y| metric.cost2(x, y)).sqrt()),
    }
}

/// Exact W1/W2 between one-dimensional densities by the quantile coupling.
pub fn wasserstein_1d_densities(
    a: &ScalarField,
    b: &ScalarField,
    order: Order,
    metric: Metric,
) -> Result<f64> {
    if a.grid().dim() != 1 || b.grid().dim() != 1 {
        return Err(Error::DimensionMismatch(
            "quantile coupling needs one-dimensional densities".into(),
        ));
    }
    if metric.n_particles != 1 {
        return Err(Error::DimensionMismatch(
            "1d quantile route is single-particle".into(),
        ));
    }
    let fa = Cdf1d::new(a)?;
    let fb = Cdf1d::new(b)?;
    let m = QUANTILE_NODES;
    let mut acc = 0.0;
    for j in 0..m {
        let u = (j as f64 + 0.5) / m as f64;
        let gap = (fa.inverse(u) - fb.inverse(u)).abs();
        acc += match order {
            Order::One => match metric.kind {
                MetricKind::TruncatedEuclidean => gap.min(metric.truncation),
                MetricKind::Euclidean => gap,
            },
            Order::Two => gap * gap,
        };
    }
    let mean = acc / m as f64;
    Ok(match order {
        Order::One => mean,
        Order::Two => mean.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Transport distance between densities of any dimension: exact quantile
/// coupling in 1d (stderr 0), otherwise equal-count sampling with exact
/// assignment and a bootstrap stderr over resampled index sets.
pub fn density_distance(
    a: &ScalarField,
    b: &ScalarField,
    order: Order,
    metric: Metric,
    n_samples: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    if a.grid().dim() != b.grid().dim() {
        return Err(Error::DimensionMismatch(format!(
            "density dims {} and {}",
            a.grid().dim(),
            b.grid().dim()
        )));
    }
    if a.grid().dim() == 1 {
        let value = wasserstein_1d_densities(a, b, order, metric)?;
        return Ok(DistanceEstimate { value, stderr: 0.0 });
    }
    if n_samples == 0 || n_samples > ASSIGNMENT_CAP {
        return Err(Error::CapExceeded(format!(
            "n_samples {n_samples} outside 1..={ASSIGNMENT_CAP}"
        )));
    }
    let xs = sample_density(a, n_samples, seed)?;
    let ys = sample_density(b, n_samples, seed.wrapping_add(1))?;
    let value = wasserstein_samples(&xs, &ys, order, metric)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(2));
    let dim = xs.dim();
    let mut replicates = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf_x = vec![0.0; n_samples * dim];
    let mut buf_y = vec![0.0; n_samples * dim];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for i in 0..n_samples {
            let px = rng.gen_range(0..n_samples);
            let py = rng.gen_range(0..n_samples);
            buf_x[i * dim..(i + 1) * dim].copy_from_slice(xs.point(px));
            buf_y[i * dim..(i + 1) * dim].copy_from_slice(ys.point(py));
        }
        let rx = SampleSet::new(dim, buf_x.clone())?;
        let ry = SampleSet::new(dim, buf_y.clone())?;
        replicates.push(wasserstein_samples(&rx, &ry, order, metric)?);
    }
    let mean = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let var = replicates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / (replicates.len() - 1) as f64;
    Ok(DistanceEstimate { value, stderr: var.sqrt() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundCheck {
    pub w1: f64,
    pub w2: f64,
    pub moment_sum: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// W2 against the moment interpolation bound
/// W2 <= 2^{3/2} M_k^{1/k} W1^{1/2 - 1/k}, plus W1 <= W2, for k > 2.
/// M_k pools the k-th moments of the per-particle blocks of both sets.
pub fn w1_w2_bound_check(
    f: &SampleSet,
    g: &SampleSet,
    k: f64,
    metric: Metric,
) -> Result<BoundCheck> {
    if !(k > 2.0) {
        return Err(Error::InvalidConfig(format!("need k > 2, got {k}")));
    }
    let block = metric.block_dim(f.dim())?;
    let w1 = wasserstein_samples(f, g, Order::One, metric)?;
    let w2 = wasserstein_samples(f, g, Order::Two, metric)?;
    let block_moment = |s: &SampleSet| -> f64 {
        let mut acc = 0.0;
        for i in 0..s.len() {
            let x = s.point(i);
            for q in 0..metric.n_particles {
                let r2: f64 = x[q * block..(q + 1) * block].iter().map(|c| c * c).sum();
                acc += r2.powf(0.5 * k);
            }
        }
        acc / (s.len() * metric.n_particles) as f64
    };
    let moment_sum = block_moment(f) + block_moment(g);
    let rhs = 2.0f64.powf(1.5) * moment_sum.powf(1.0 / k) * w1.powf(0.5 - 1.0 / k);
    Ok(BoundCheck { w1, w2, moment_sum, rhs, holds: w2 <= rhs && w1 <= w2 })
}

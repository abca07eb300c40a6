//! Concentration of empirical measures: Monte Carlo estimates of
//! E[(<mu^N - G, phi>)^2] over a fixed library of bounded test functions.

use crate::error::{Error, Result};
use crate::grid::{det_sum_by, SampleSet, ScalarField};
use serde::Serialize;

/// Bounded test functions on the single-particle space.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFn {
    Gaussian { center: Vec<f64>, width: f64 },
    Sigmoid { axis: usize, center: f64, scale: f64 },
    Clamp { axis: usize, bound: f64 },
    Constant { value: f64 },
}

impl TestFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFn::Gaussian { center, width } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(c, m)| (c - m) * (c - m))
                    .sum();
                (-r2 / (2.0 * width * width)).exp()
            }
            TestFn::Sigmoid { axis, center, scale } => {
                1.0 / (1.0 + (-(x[*axis] - center) / scale).exp())
            }
            TestFn::Clamp { axis, bound } => x[*axis].clamp(-bound, *bound),
            TestFn::Constant { value } => *value,
        }
    }
}

/// The fixed library used by the sweep: Gaussian bumps along the first
/// axis, two sigmoids, a coordinate clamp, and a constant control.
pub fn test_function_library(dim: usize) -> Vec<TestFn> {
    let centered = |c: f64| {
        let mut center = vec![0.0; dim];
        center[0] = c;
        center
    };
    vec![
        TestFn::Gaussian { center: centered(0.0), width: 1.0 },
        TestFn::Gaussian { center: centered(1.0), width: 0.7 },
        TestFn::Gaussian { center: centered(-1.0), width: 0.7 },
        TestFn::Sigmoid { axis: 0, center: 0.0, scale: 0.5 },
        TestFn::Sigmoid { axis: 0, center: 0.8, scale: 0.3 },
        TestFn::Clamp { axis: 0, bound: 1.0 },
        TestFn::Constant { value: 1.0 },
    ]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConcentrationEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Quadrature mean int phi G the empirical averages are centered on.
    pub reference_mean: f64,
}

/// E[(<mu^N - G, phi>)^2] for each phi: the empirical measure runs over the
/// particle blocks of one configuration, the expectation over samples.
pub fn empirical_concentration(
    samples: &SampleSet,
    n_particles: usize,
    g: &ScalarField,
    phis: &[TestFn],
) -> Result<Vec<ConcentrationEstimate>> {
    let d = g.grid().dim();
    if n_particles == 0 || samples.dim() != n_particles * d {
        return Err(Error::DimensionMismatch(format!(
            "sample dim {} != {n_particles} particles x {d}",
            samples.dim()
        )));
    }
    if samples.len() == 0 {
        return Err(Error::SizeMismatch("no samples".into()));
    }
    g.assert_density()?;
    let grid = *g.grid();
    let gv = g.values();
    let m = samples.len() as f64;
    phis.iter()
        .map(|phi| {
            let reference_mean = det_sum_by(gv.len(), |i| {
                let mut x = [0.0; 8];
                grid.point(i, &mut x[..d]);
                phi.eval(&x[..d]) * gv[i] * grid.weight(i)
            });
            let mut mean = 0.0;
            let mut sq = 0.0;
            for s in 0..samples.len() {
                let conf = samples.point(s);
                let mut emp = 0.0;
                for q in 0..n_particles {
                    emp += phi.eval(&conf[q * d..(q + 1) * d]);
                }
                emp /= n_particles as f64;
                let dev = emp - reference_mean;
                let dev2 = dev * dev;
                mean += dev2;
                sq += dev2 * dev2;
            }
            mean /= m;
            sq /= m;
            let var = (sq - mean * mean).max(0.0);
            Ok(ConcentrationEstimate {
                value: mean,
                stderr: (var / m).sqrt(),
                reference_mean,
            })
        })
        .collect()
}

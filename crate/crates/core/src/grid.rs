//! Uniform cube grids on [-L, L]^dim and fields living on them.
//!
//! Conventions used throughout the crate:
//! - row-major flat indexing, axis 0 slowest;
//! - trapezoidal quadrature (half weights on the box faces);
//! - reductions run in a fixed pairwise order so results do not depend on
//!   the worker thread count.

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// Total-point cap for freshly constructed grids. Joint N-body grids grow as
/// n^(N*d), so the constructor refuses anything that would not fit in memory.
pub const DEFAULT_POINT_CAP: usize = 1 << 26;

const MIN_POINTS_PER_AXIS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    l: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, l: f64) -> Result<Grid> {
        Grid::with_cap(dim, n, l, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(dim: usize, n: usize, l: f64, cap: usize) -> Result<Grid> {
        if dim == 0 {
            return Err(Error::InvalidConfig("grid dim must be >= 1".into()));
        }
        if n < MIN_POINTS_PER_AXIS {
            return Err(Error::InvalidConfig(format!(
                "points per axis must be >= {MIN_POINTS_PER_AXIS}, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidConfig(format!("half-width must be positive, got {l}")));
        }
        let mut total: usize = 1;
        for _ in 0..dim {
            total = total
                .checked_mul(n)
                .filter(|&t| t <= cap)
                .ok_or_else(|| {
                    Error::CapExceeded(format!("{n}^{dim} points exceed the cap of {cap}"))
                })?;
        }
        Ok(Grid { dim, n, l, h: 2.0 * l / (n as f64 - 1.0) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride of `axis` in the flat row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + self.h * i as f64
    }

    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.n
    }

    /// Writes the coordinates of the flat index into `out`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = self.coord(rest % self.n);
            rest /= self.n;
        }
    }

    /// Trapezoidal quadrature weight of a point: h^dim, halved once per axis
    /// that sits on the box face.
    pub fn weight(&self, flat: usize) -> f64 {
        let mut w = self.h.powi(self.dim as i32);
        let mut rest = flat;
        for _ in 0..self.dim {
            let i = rest % self.n;
            if i == 0 || i == self.n - 1 {
                w *= 0.5;
            }
            rest /= self.n;
        }
        w
    }

    /// All quadrature weights as a vector, for loops hot enough that the
    /// per-point index arithmetic in `weight` shows up.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Grid with the same per-axis geometry but a different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.n, self.l)
    }

    pub fn same_axis_geometry(&self, other: &Grid) -> bool {
        self.n == other.n && self.l == other.l
    }
}

/// Pairwise (cascade) summation; the fixed tree makes the result independent
/// of chunking done by callers.
fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

/// Same cascade over i in lo..hi without materializing the terms.
fn pairwise_by<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
    if hi - lo <= 32 {
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        return s;
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_by(lo, mid, f) + pairwise_by(mid, hi, f)
}

const SUM_BLOCK: usize = 4096;

/// Deterministic sum of `f(i)` for i in 0..len: fixed-size blocks are summed
/// pairwise (possibly on different threads) and combined in index order.
pub fn det_sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len <= SUM_BLOCK {
        return pairwise_by(0, len, &f);
    }
    let blocks = len.div_ceil(SUM_BLOCK);
    let partials: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * SUM_BLOCK;
            let hi = (lo + SUM_BLOCK).min(len);
            pairwise_by(lo, hi, &f)
        })
        .collect();
    pairwise(&partials)
}

pub fn det_sum(xs: &[f64]) -> f64 {
    det_sum_by(xs.len(), |i| xs[i])
}

/// Scalar samples on a grid. `density` marks fields that have been checked
/// to be nonnegative and quadrature-normalized to 1.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    density: bool,
}

const DENSITY_NORM_TOL: f64 = 1e-10;

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField { grid, values: vec![0.0; grid.len()], density: false }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("field values must be finite".into()));
        }
        Ok(ScalarField { grid, values, density: false })
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut values = vec![0.0; grid.len()];
        values
            .par_chunks_mut(SUM_BLOCK)
            .enumerate()
            .for_each(|(b, chunk)| {
                let mut x = vec![0.0; grid.dim()];
                for (k, v) in chunk.iter_mut().enumerate() {
                    grid.point(b * SUM_BLOCK + k, &mut x);
                    *v = f(&x);
                }
            });
        ScalarField { grid, values, density: false }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.density = false;
        &mut self.values
    }

    pub fn is_density(&self) -> bool {
        self.density
    }

    /// Trapezoidal quadrature of the field over the box.
    pub fn integrate(&self) -> f64 {
        let g = self.grid;
        det_sum_by(self.values.len(), |i| self.values[i] * g.weight(i))
    }

    /// Rescales to unit quadrature mass and flags the field as a density.
    /// Fails on negative values or vanishing mass.
    pub fn into_density(mut self) -> Result<ScalarField> {
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::NotNormalized("negative values in density".into()));
        }
        let mass = self.integrate();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::NotNormalized(format!("mass {mass} not positive")));
        }
        let inv = 1.0 / mass;
        self.values.par_iter_mut().for_each(|v| *v *= inv);
        self.density = true;
        Ok(self)
    }

    /// Checks (without rescaling) that the field is a density within 1e-10.
    pub fn assert_density(&self) -> Result<()> {
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::NotNormalized("negative values in density".into()));
        }
        let mass = self.integrate();
        if (mass - 1.0).abs() > DENSITY_NORM_TOL {
            return Err(Error::NotNormalized(format!("quadrature mass {mass} is not 1")));
        }
        Ok(())
    }

    pub fn density_from_fn<F>(grid: Grid, f: F) -> Result<ScalarField>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        ScalarField::from_fn(grid, f).into_density()
    }

    /// k-th radial moment: quadrature of |x|^k * field.
    pub fn moment(&self, k: f64) -> f64 {
        let g = self.grid;
        det_sum_by(self.values.len(), |i| {
            let mut x = [0.0; 8];
            g.point(i, &mut x[..g.dim()]);
            let r2: f64 = x[..g.dim()].iter().map(|c| c * c).sum();
            r2.powf(0.5 * k) * self.values[i] * g.weight(i)
        })
    }

    /// n-fold product field on the joint grid with the same axis geometry.
    /// Weights factorize over axes, so the power of a density stays a
    /// density to rounding.
    pub fn tensor_power(&self, copies: usize) -> Result<ScalarField> {
        if copies == 0 {
            return Err(Error::DimensionMismatch("need at least one factor".into()));
        }
        let d = self.grid.dim();
        let n = self.grid.points_per_axis();
        let joint = Grid::new(d * copies, n, self.grid.half_width())?;
        let values = (0..joint.len())
            .map(|i| {
                let mut acc = 1.0;
                for b in 0..copies {
                    let mut flat = 0usize;
                    for a in 0..d {
                        flat = flat * n + joint.axis_index(i, b * d + a);
                    }
                    acc *= self.values[flat];
                }
                acc
            })
            .collect();
        ScalarField::from_values(joint, values)
    }

    /// Integrates out the trailing axes, keeping the first `keep`. Quadrature
    /// weights factorize over axes, so the marginal of a density stays a
    /// density exactly.
    pub fn marginalize(&self, keep: usize) -> Result<ScalarField> {
        let dim = self.grid.dim();
        if keep == 0 || keep > dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot keep {keep} of {dim} axes"
            )));
        }
        if keep == dim {
            return Ok(self.clone());
        }
        let out_grid = self.grid.with_dim(keep)?;
        let rest = Grid::with_cap(dim - keep, self.grid.n, self.grid.l, usize::MAX)?;
        let m = rest.len();
        let rest_w: Vec<f64> = (0..m).map(|r| rest.weight(r)).collect();
        let mut out = vec![0.0; out_grid.len()];
        out.par_iter_mut().enumerate().for_each(|(j, o)| {
            let base = j * m;
            *o = pairwise_by(0, m, &|r| self.values[base + r] * rest_w[r]);
        });
        Ok(ScalarField { grid: out_grid, values: out, density: self.density })
    }

    /// Multilinear interpolation at an arbitrary point (clamped to the box).
    pub fn interp(&self, x: &[f64]) -> f64 {
        interp_multilinear(&self.grid, &self.values, x)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Binary dump: header (dim, n as u64 LE, L as f64 LE) then the values
    /// row-major as f64 LE.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(24 + 8 * self.values.len());
        buf.extend_from_slice(&(self.grid.dim() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.grid.points_per_axis() as u64).to_le_bytes());
        buf.extend_from_slice(&self.grid.half_width().to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        crate::cli::atomic_write(path, &buf)
    }

    pub fn read_binary(path: &Path) -> Result<ScalarField> {
        let mut file = std::fs::File::open(path)?;
        let mut header = [0u8; 24];
        file.read_exact(&mut header)?;
        let dim = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let l = f64::from_le_bytes(header[16..24].try_into().unwrap());
        let grid = Grid::new(dim, n, l)?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        if raw.len() != 8 * grid.len() {
            return Err(Error::Serialization(format!(
                "expected {} value bytes, got {}",
                8 * grid.len(),
                raw.len()
            )));
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ScalarField::from_values(grid, values)
    }

    /// CSV export: one row per point, index tuple then the value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.grid.dim();
        for a in 0..dim {
            write!(w, "i{a},")?;
        }
        writeln!(w, "value")?;
        let mut idx = vec![0usize; dim];
        for (flat, v) in self.values.iter().enumerate() {
            let mut rest = flat;
            for a in (0..dim).rev() {
                idx[a] = rest % self.grid.n;
                rest /= self.grid.n;
            }
            for i in &idx {
                write!(w, "{i},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// One scalar component per axis, each on the common grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, comps: Vec<Vec<f64>>) -> Result<VectorField> {
        if comps.len() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} components, got {}",
                grid.dim(),
                comps.len()
            )));
        }
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::SizeMismatch("component length != grid size".into()));
            }
        }
        Ok(VectorField { grid, comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn interp(&self, x: &[f64], out: &mut [f64]) {
        for (axis, o) in out.iter_mut().enumerate() {
            *o = interp_multilinear(&self.grid, &self.comps[axis], x);
        }
    }
}

fn interp_multilinear(grid: &Grid, values: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), grid.dim());
    let n = grid.points_per_axis();
    let mut cell = [0usize; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..grid.dim() {
        let t = ((x[a] + grid.half_width()) / grid.spacing()).clamp(0.0, (n - 1) as f64);
        let mut i = t.floor() as usize;
        if i >= n - 1 {
            i = n - 2;
        }
        cell[a] = i;
        frac[a] = t - i as f64;
    }
    let corners = 1usize << grid.dim();
    let mut acc = 0.0;
    for corner in 0..corners {
        let mut w = 1.0;
        let mut flat = 0usize;
        for a in 0..grid.dim() {
            let hi = (corner >> a) & 1;
            w *= if hi == 1 { frac[a] } else { 1.0 - frac[a] };
            flat = flat * n + cell[a] + hi;
        }
        acc += w * values[flat];
    }
    acc
}

/// Flat list of dim-dimensional points with uniform weights.
#[derive(Debug, Clone)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<SampleSet> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::SizeMismatch(format!(
                "data length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(SampleSet { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

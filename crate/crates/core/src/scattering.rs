//! Zero-energy two-body scattering for repulsive, compactly supported pair
//! potentials.
//!
//! With hbar = 2m = 1 the relative motion at zero energy reduces to
//!     u'' = (1/2) v(r) u,   u(0) = 0, u'(0) = 1,
//! and u(r) = c (r - a) beyond the support; a is the scattering length and
//! phi0 = u/(c r) the scattering profile normalized to 1 at infinity. The
//! hardness fraction s = int |grad phi0|^2 / (4 pi a) lies in (0, 1] and
//! measures how much of the interaction energy is kinetic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellShape {
    Zero,
    /// v = depth on [0, radius).
    Square { depth: f64 },
    /// v = amplitude exp(-r²/(2 width²)), truncated at the stored range.
    Gaussian { amplitude: f64, width: f64 },
}

/// Repulsive pair potential with compact support. `scale` applies the
/// zero-energy rescale v(r) -> v(r/scale)/scale²; `strength` multiplies the
/// profile (mean-field weakening).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPotential {
    shape: WellShape,
    base_range: f64,
    scale: f64,
    strength: f64,
}

impl PairPotential {
    pub fn zero() -> PairPotential {
        PairPotential { shape: WellShape::Zero, base_range: 0.0, scale: 1.0, strength: 1.0 }
    }

    pub fn square_well(depth: f64, radius: f64) -> Result<PairPotential> {
        if !(depth >= 0.0 && depth.is_finite()) {
            return Err(Error::InvalidConfig(format!("well depth must be >= 0, got {depth}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("well radius must be > 0, got {radius}")));
        }
        Ok(PairPotential {
            shape: WellShape::Square { depth },
            base_range: radius,
            scale: 1.0,
            strength: 1.0,
        })
    }

    /// Gaussian bump truncated at `cutoff` (compact support is assumed all
    /// over the crate; the tail that is cut is exp(-cutoff²/2width²) small).
    pub fn gaussian(amplitude: f64, width: f64, cutoff: f64) -> Result<PairPotential> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(width > 0.0 && cutoff > width) {
            return Err(Error::InvalidConfig(
                "gaussian needs width > 0 and cutoff > width".into(),
            ));
        }
        Ok(PairPotential {
            shape: WellShape::Gaussian { amplitude, width },
            base_range: cutoff,
            scale: 1.0,
            strength: 1.0,
        })
    }

    /// Support radius after rescaling.
    pub fn range(&self) -> f64 {
        self.base_range * self.scale
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.range() {
            return 0.0;
        }
        let rb = r / self.scale;
        let base = match self.shape {
            WellShape::Zero => 0.0,
            WellShape::Square { depth } => depth,
            WellShape::Gaussian { amplitude, width } => {
                amplitude * (-rb * rb / (2.0 * width * width)).exp()
            }
        };
        self.strength * base / (self.scale * self.scale)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, WellShape::Zero) || self.strength == 0.0
    }

    /// v(r) -> v(r/beta)/beta02; shrinks the support and raises the core,
    /// keeping the scattering length proportional to beta.
    pub fn length_rescaled(&self, beta: f64) -> Result<PairPotential> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("rescale factor must be > 0, got {beta}")));
        }
        Ok(PairPotential { scale: self.scale * beta, ..*self })
    }

    /// Mean-field weakening v -> v/n (support unchanged).
    pub fn strength_scaled(&self, factor: f64) -> Result<PairPotential> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("strength factor must be >= 0, got {factor}")));
        }
        Ok(PairPotential { strength: self.strength * factor, ..*self })
    }
}

/// Zero-energy radial solution. The profile is stored in the scale reached
/// at r_max; early samples of a hard wall underflow to 0, which is exactly
/// their weight in every integral we take.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub potential: PairPotential,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// Slope of the fitted asymptote u = c (r - a).
    pub c: f64,
    pub a: f64,
    /// Relative rms residual of the tail fit.
    pub tail_residual: f64,
}

const TAIL_FIT_TOL: f64 = 1e-6;
/// Rescale the linear ODE solution whenever it outgrows this.
const RENORM_LIMIT: f64 = 1e120;

/// Integrates u'' = v u / 2 outward by RK4 and fits the free tail.
pub fn solve_zero_energy(v: &PairPotential, r_max: f64, n_r: usize) -> Result<ScatteringSolution> {
    if n_r < 64 {
        return Err(Error::InvalidConfig(format!("need at least 64 radial points, got {n_r}")));
    }
    if !(r_max > v.range() * 1.2 + 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "r_max = {r_max} leaves no free tail beyond the support {}",
            v.range()
        )));
    }
    let h = r_max / (n_r - 1) as f64;
    let mut u = vec![0.0; n_r];
    let mut du = vec![0.0; n_r];
    // log of the factor this sample still has to be multiplied by
    let mut logscale = vec![0.0; n_r];
    let (mut y, mut dy) = (0.0f64, 1.0f64);
    let mut ls = 0.0f64;
    u[0] = y;
    du[0] = dy;
    let f = |r: f64, y: f64| 0.5 * v.evaluate(r) * y;
    // endpoint samples are nudged into the step interior so that a support
    // edge sitting on a grid point is integrated with the correct branch on
    // both sides (the potentials are only piecewise continuous)
    let eta = 1e-9 * h;
    for k in 1..n_r {
        let r = (k - 1) as f64 * h;
        let (k1y, k1d) = (dy, f(r + eta, y));
        let (k2y, k2d) = (dy + 0.5 * h * k1d, f(r + 0.5 * h, y + 0.5 * h * k1y));
        let (k3y, k3d) = (dy + 0.5 * h * k2d, f(r + 0.5 * h, y + 0.5 * h * k2y));
        let (k4y, k4d) = (dy + h * k3d, f(r + h - eta, y + h * k3y));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        let m = y.abs().max(dy.abs());
        if m > RENORM_LIMIT {
            y /= m;
            dy /= m;
            ls += m.ln();
        }
        u[k] = y;
        du[k] = dy;
        logscale[k] = ls;
    }
    // bring every sample to the final frame
    for k in 0..n_r {
        let factor = (logscale[k] - ls).exp();
        u[k] *= factor;
        du[k] *= factor;
    }
    let r: Vec<f64> = (0..n_r).map(|k| k as f64 * h).collect();

    // least squares u = alpha r + beta over the free region
    let tail: Vec<usize> = (0..n_r).filter(|&k| r[k] > v.range() + 1e-12).collect();
    if tail.len() < 8 {
        return Err(Error::InvalidConfig("free tail has fewer than 8 samples".into()));
    }
    let m = tail.len() as f64;
    let sx: f64 = tail.iter().map(|&k| r[k]).sum();
    let sy: f64 = tail.iter().map(|&k| u[k]).sum();
    let sxx: f64 = tail.iter().map(|&k| r[k] * r[k]).sum();
    let sxy: f64 = tail.iter().map(|&k| r[k] * u[k]).sum();
    let denom = m * sxx - sx * sx;
    let alpha = (m * sxy - sx * sy) / denom;
    let beta = (sy * sxx - sx * sxy) / denom;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::NoConvergence { iterations: n_r, residual: f64::NAN });
    }
    let rms_u = (tail.iter().map(|&k| u[k] * u[k]).sum::<f64>() / m).sqrt();
    let rms_res = (tail
        .iter()
        .map(|&k| {
            let e = u[k] - (alpha * r[k] + beta);
            e * e
        })
        .sum::<f64>()
        / m)
        .sqrt();
    let tail_residual = rms_res / rms_u.max(f64::MIN_POSITIVE);
    if tail_residual > TAIL_FIT_TOL {
        return Err(Error::FitResidual { residual: tail_residual, tolerance: TAIL_FIT_TOL });
    }
    Ok(ScatteringSolution {
        potential: *v,
        r,
        u,
        du,
        c: alpha,
        a: -beta / alpha,
        tail_residual,
    })
}

const ZERO_LENGTH_TOL: f64 = 1e-10;

/// Hardness fraction s = int_0^inf (phi0')² r² dr / a for phi0 = u/(c r).
/// The analytic tail beyond r_max contributes a²/r_max. Always in (0, 1]
/// for repulsive potentials; tiny overshoots from quadrature are clipped.
pub fn s_hat(sol: &ScatteringSolution) -> Result<f64> {
    if sol.a <= ZERO_LENGTH_TOL {
        return Err(Error::ZeroScatteringLength);
    }
    let n = sol.r.len();
    let h = sol.r[1] - sol.r[0];
    // (phi0' r)² = ((u' r - u)/(c r))²; finite at 0 where it vanishes
    let integrand: Vec<f64> = (0..n)
        .map(|k| {
            let r = sol.r[k];
            if r == 0.0 {
                return 0.0;
            }
            let t = (sol.du[k] * r - sol.u[k]) / (sol.c * r);
            t * t
        })
        .collect();
    let mut integral = 0.0;
    for k in 1..n {
        integral += 0.5 * h * (integrand[k - 1] + integrand[k]);
    }
    let r_max = sol.r[n - 1];
    integral += sol.a * sol.a / r_max;
    let s = integral / sol.a;
    if !(0.0..=1.0 + 1e-3).contains(&s) {
        return Err(Error::NoConvergence { iterations: n, residual: s });
    }
    Ok(s.min(1.0))
}

/// Re-solves at doublings of n_r until s changes by less than 1e-5.
pub fn scattering_report(
    v: &PairPotential,
    r_max: f64,
    n_r: usize,
) -> Result<(ScatteringSolution, f64)> {
    let mut n = n_r;
    let mut sol = solve_zero_energy(v, r_max, n)?;
    let mut s = s_hat(&sol)?;
    for _ in 0..4 {
        n = 2 * n - 1;
        let sol2 = solve_zero_energy(v, r_max, n)?;
        let s2 = s_hat(&sol2)?;
        let done = (s2 - s).abs() < 1e-5;
        sol = sol2;
        s = s2;
        if done {
            break;
        }
    }
    Ok((sol, s))
}

/// Pair potential for N particles at coupling g: the rescale beta is chosen
/// so the scattering length of the output is exactly g/(4 pi N), the
/// dilute-limit relation between the coupling and the two-body problem
/// (for the canonical g = 4 pi a(v1) this is the a/N scaling of v1).
pub fn gp_scaled_potential(
    sol: &ScatteringSolution,
    n_particles: usize,
    g: f64,
) -> Result<PairPotential> {
    if sol.a <= ZERO_LENGTH_TOL {
        return Err(Error::ZeroScatteringLength);
    }
    if n_particles == 0 || !(g > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need n_particles >= 1 and g > 0, got {n_particles}, {g}"
        )));
    }
    let target = g / (4.0 * std::f64::consts::PI * n_particles as f64);
    sol.potential.length_rescaled(target / sol.a)
}

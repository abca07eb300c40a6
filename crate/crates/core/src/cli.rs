//! Experiment configs, provenance, and output plumbing for the `gpchaos` binary.
//!
//! Every run is named by the sha256 of its canonical config serialization:
//! output files carry the first 12 hex digits in their names and the full
//! hash in a provenance block, so runs with different configs never
//! overwrite each other and identical reruns produce byte-identical files.
//! Nothing here writes timestamps or machine state into outputs.

use crate::chaos::sweep::{run_sweep, SweepConfig};
use crate::diffusion::{
    path_relative_entropy, simulate, stopping_times, survival_probability, GridDrift, InitialLaw,
    OuDrift, PathEnsemble, PathEntropy, PerParticleDrift, SimParams, StoppingRecord, ZeroDrift,
};
use crate::error::{Error, Result};
use crate::gp::{minimize_gp, FlowParams, GpProblem, Trap};
use crate::grid::{Grid, ScalarField};
use crate::nbody::{energy_components, ground_state, interaction_ball_radius, NBodyProblem};
use crate::ops::{grad_log_density, FloorPolicy};
use crate::scattering::{gp_scaled_potential, scattering_report, PairPotential};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the output layout: file naming, JSON shapes, CSV columns.
pub const FORMAT_VERSION: &str = "1";

pub fn version_string() -> String {
    format!("{ARTIFACT_VERSION} (output format {FORMAT_VERSION})")
}

/// Largest joint grid the diffuse command will materialize for a product
/// initial law.
const JOINT_INIT_CAP: usize = 1 << 22;

/// Caps the global worker pool from GPCHAOS_THREADS. Results never depend
/// on the pool size (all reductions use fixed summation trees); the cap only
/// bounds resource use. Call once, before any parallel work.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GPCHAOS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&k| k >= 1)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "GPCHAOS_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    500_000
}

fn default_g() -> f64 {
    1.0
}

fn default_ou_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub well_depth: f64,
    pub well_radius: f64,
    pub rmax: f64,
    pub nr: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    pub dim: usize,
    pub trap: Trap,
    pub g: f64,
    pub grid_n: usize,
    pub grid_l: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Also dump the ground-state density in the binary field format.
    #[serde(default)]
    pub dump_field: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Bare pair-potential shape, before any N-dependent scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    Gaussian {
        amplitude: f64,
        width: f64,
        /// Support radius; defaults to 6 widths.
        #[serde(default)]
        cutoff: Option<f64>,
    },
    SquareWell {
        depth: f64,
        radius: f64,
    },
    Zero,
}

impl PairSpec {
    pub fn build(&self) -> Result<PairPotential> {
        match self {
            PairSpec::Gaussian { amplitude, width, cutoff } => {
                PairPotential::gaussian(*amplitude, *width, cutoff.unwrap_or(6.0 * width))
            }
            PairSpec::SquareWell { depth, radius } => PairPotential::square_well(*depth, *radius),
            PairSpec::Zero => Ok(PairPotential::zero()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// v/N: every pair weakened by the particle number.
    Meanfield,
    /// Length rescale of the bare pair so its scattering length is g/(4 pi N).
    Gp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbodyConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub trap: Trap,
    pub pair: PairSpec,
    pub scaling: Scaling,
    pub grid_n: usize,
    pub grid_l: f64,
    /// Target coupling for gp scaling; unused under meanfield.
    #[serde(default = "default_g")]
    pub g: f64,
    /// Radial box for the zero-energy scattering solve under gp scaling;
    /// defaults to 4x the bare support.
    #[serde(default)]
    pub scatter_rmax: Option<f64>,
    #[serde(default)]
    pub scatter_nr: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Also dump the joint density in the binary field format.
    #[serde(default)]
    pub dump_density: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseConfig {
    /// "zero", "ou", or a path to a binary density field; a field is read as
    /// a per-particle density, drives the Nelson drift of each particle, and
    /// supplies the product initial law. "zero"/"ou" start at the origin.
    pub drift_from: String,
    pub n_particles: usize,
    pub dim: usize,
    pub dt: f64,
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    /// Contact-radius exponent knob, three dimensions only: radius is then
    /// N^(-1/3 - delta).
    #[serde(default)]
    pub delta: Option<f64>,
    /// Explicit contact radius for dimensions other than three, where no
    /// exponent law is singled out; a free parameter.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Simulation box for "zero"/"ou"; a field's own box wins otherwise.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default = "default_ou_rate")]
    pub ou_rate: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    pub sweep: SweepConfig,
    /// Also write the long-format (metric, N, value, stderr) series table.
    #[serde(default)]
    pub emit_plot_data: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Scatter(ScatterConfig),
    Gp(GpConfig),
    Nbody(NbodyConfig),
    Diffuse(DiffuseConfig),
    Chaos(ChaosConfig),
}

fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(what.into()))
    }
}

impl ExperimentConfig {
    pub fn command(&self) -> &'static str {
        match self {
            ExperimentConfig::Scatter(_) => "scatter",
            ExperimentConfig::Gp(_) => "gp",
            ExperimentConfig::Nbody(_) => "nbody",
            ExperimentConfig::Diffuse(_) => "diffuse",
            ExperimentConfig::Chaos(_) => "chaos",
        }
    }

    /// Canonical serialization: struct fields in declaration order, shortest
    /// round-trip floats. The hash below is taken over these bytes.
    pub fn canonical_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json()?.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        Ok(hex)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Scatter(c) => {
                require(
                    c.well_depth.is_finite() && c.well_depth >= 0.0,
                    "well_depth must be finite and >= 0",
                )?;
                require(
                    c.well_radius.is_finite() && c.well_radius > 0.0,
                    "well_radius must be finite and > 0",
                )?;
                require(c.rmax.is_finite() && c.rmax > c.well_radius, "rmax must exceed the well")?;
                require(c.nr >= 64, "nr must be at least 64")
            }
            ExperimentConfig::Gp(c) => {
                require(c.g.is_finite() && c.g >= 0.0, "g must be finite and >= 0")?;
                require(c.tol.is_finite() && c.tol > 0.0, "tol must be finite and > 0")?;
                require(c.max_iters >= 1, "max_iters must be >= 1")
            }
            ExperimentConfig::Nbody(c) => {
                require(c.g.is_finite() && c.g >= 0.0, "g must be finite and >= 0")?;
                if c.scaling == Scaling::Gp {
                    require(c.g > 0.0, "gp scaling needs g > 0")?;
                }
                require(c.tol.is_finite() && c.tol > 0.0, "tol must be finite and > 0")?;
                require(c.max_iters >= 1, "max_iters must be >= 1")
            }
            ExperimentConfig::Diffuse(c) => {
                require(!c.drift_from.is_empty(), "drift_from must not be empty")?;
                require(c.n_particles >= 1, "n_particles must be >= 1")?;
                require(c.dim >= 1, "dim must be >= 1")?;
                require(c.dt.is_finite() && c.dt > 0.0, "dt must be finite and > 0")?;
                require(
                    c.horizon.is_finite() && c.horizon >= c.dt,
                    "horizon must be finite and >= dt",
                )?;
                require(c.paths >= 1, "paths must be >= 1")?;
                require(
                    c.ou_rate.is_finite() && c.ou_rate >= 0.0,
                    "ou_rate must be finite and >= 0",
                )?;
                if let Some(h) = c.half_width {
                    require(h.is_finite() && h > 0.0, "half_width must be finite and > 0")?;
                }
                if c.n_particles == 1 {
                    require(
                        c.delta.is_none() && c.radius.is_none(),
                        "one particle has no contact set; drop delta and radius",
                    )
                } else if c.dim == 3 {
                    require(
                        c.delta.is_some(),
                        "three dimensions take the radius from delta; set delta",
                    )?;
                    require(c.radius.is_none(), "radius is derived from delta when dim = 3")
                } else {
                    require(
                        c.radius.map_or(false, |r| r.is_finite() && r > 0.0),
                        "dimensions other than three need an explicit radius > 0",
                    )?;
                    require(c.delta.is_none(), "delta only applies when dim = 3")
                }
            }
            ExperimentConfig::Chaos(c) => c.sweep.validate(),
        }
    }
}

/// Provenance block copied into every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub artifact_version: String,
    pub format_version: String,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Result<Provenance> {
        Ok(Provenance {
            config_hash: config.hash()?,
            artifact_version: ARTIFACT_VERSION.into(),
            format_version: FORMAT_VERSION.into(),
        })
    }
}

fn csv_preamble(hash: &str) -> String {
    format!("# config_hash {hash}\n# gpchaos {ARTIFACT_VERSION} output-format {FORMAT_VERSION}\n")
}

fn write_json(dir: &Path, name: &str, body: &serde_json::Value) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text =
        serde_json::to_string_pretty(body).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

/// Runs one experiment and returns the files it wrote.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let provenance = Provenance::of(config)?;
    let stem = format!("{}-{}", config.command(), &provenance.config_hash[..12]);
    match config {
        ExperimentConfig::Scatter(c) => run_scatter(c, config, &provenance, &stem),
        ExperimentConfig::Gp(c) => run_gp(c, config, &provenance, &stem),
        ExperimentConfig::Nbody(c) => run_nbody(c, config, &provenance, &stem),
        ExperimentConfig::Diffuse(c) => run_diffuse(c, config, &provenance, &stem),
        ExperimentConfig::Chaos(c) => run_chaos(c, config, &provenance, &stem),
    }
}

fn run_scatter(
    c: &ScatterConfig,
    config: &ExperimentConfig,
    provenance: &Provenance,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let pot = PairPotential::square_well(c.well_depth, c.well_radius)?;
    let (sol, s_hat) = scattering_report(&pot, c.rmax, c.nr)?;
    let body = serde_json::json!({
        "provenance": provenance,
        "config": config,
        "a": sol.a,
        "s_hat": s_hat,
        "tail_residual": sol.tail_residual,
    });
    Ok(vec![write_json(&c.output_dir, &format!("{stem}.json"), &body)?])
}

fn run_gp(
    c: &GpConfig,
    config: &ExperimentConfig,
    provenance: &Provenance,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let grid = Grid::new(c.dim, c.grid_n, c.grid_l)?;
    let problem = GpProblem::new(grid, c.trap, c.g)?;
    let params = FlowParams { tol: c.tol, max_iters: c.max_iters, ..FlowParams::default() };
    let sol = minimize_gp(&problem, &params)?;
    let body = serde_json::json!({
        "provenance": provenance,
        "config": config,
        "lambda": sol.lambda,
        "energy": sol.energy,
        "residual": sol.residual,
        "iterations": sol.iterations,
    });
    let mut files = vec![write_json(&c.output_dir, &format!("{stem}.json"), &body)?];
    if c.dump_field {
        let path = c.output_dir.join(format!("{stem}-rho.bin"));
        sol.density()?.write_binary(&path)?;
        files.push(path);
    }
    Ok(files)
}

fn run_nbody(
    c: &NbodyConfig,
    config: &ExperimentConfig,
    provenance: &Provenance,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let bare = c.pair.build()?;
    let pair = match c.scaling {
        Scaling::Meanfield => bare.strength_scaled(1.0 / c.n_particles as f64)?,
        Scaling::Gp => {
            let rmax = c.scatter_rmax.unwrap_or(4.0 * bare.range().max(1.0));
            let nr = c.scatter_nr.unwrap_or(4001);
            let (sol, _) = scattering_report(&bare, rmax, nr)?;
            gp_scaled_potential(&sol, c.n_particles, c.g)?
        }
    };
    let problem = NBodyProblem::new(c.n_particles, c.dim, c.grid_n, c.grid_l, c.trap, pair)?;
    let state = ground_state(&problem, c.tol, c.max_iters)?;
    let components = energy_components(&state, &problem)?;
    let body = serde_json::json!({
        "provenance": provenance,
        "config": config,
        "energy": state.energy,
        "per_particle_energy": state.per_particle_energy(),
        "components": components,
        "residual": state.residual,
        "iterations": state.iterations,
    });
    let mut files = vec![write_json(&c.output_dir, &format!("{stem}.json"), &body)?];
    if c.dump_density {
        let path = c.output_dir.join(format!("{stem}-rho.bin"));
        state.rho.write_binary(&path)?;
        files.push(path);
    }
    Ok(files)
}

fn run_diffuse(
    c: &DiffuseConfig,
    config: &ExperimentConfig,
    provenance: &Provenance,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let n = c.n_particles;
    let joint_dim = n * c.dim;
    let params = SimParams { dt: c.dt, horizon: c.horizon, n_paths: c.paths, seed: c.seed };
    let origin = vec![0.0; joint_dim];
    let box_half_width = c.half_width.unwrap_or(6.0);

    // Path relative entropy is always taken against the driftless Brownian
    // motion on the same box, the base measure of the Girsanov functional.
    let free = ZeroDrift { dim: joint_dim };
    let (ensemble, entropy): (PathEnsemble, PathEntropy) = match c.drift_from.as_str() {
        "zero" => {
            let ens = simulate(&free, box_half_width, &InitialLaw::Point(&origin), &params)?;
            let re = path_relative_entropy(&ens, &free, &free, c.horizon, n)?;
            (ens, re)
        }
        "ou" => {
            let drift = OuDrift { dim: joint_dim, rate: c.ou_rate };
            let ens = simulate(&drift, box_half_width, &InitialLaw::Point(&origin), &params)?;
            let re = path_relative_entropy(&ens, &drift, &free, c.horizon, n)?;
            (ens, re)
        }
        field_path => {
            let rho = ScalarField::read_binary(Path::new(field_path))
                .map_err(|e| match e {
                    Error::Io(io) => {
                        Error::InvalidConfig(format!("drift_from {field_path}: {io}"))
                    }
                    other => other,
                })?
                .into_density()?;
            if rho.grid().dim() != c.dim {
                return Err(Error::DimensionMismatch(format!(
                    "field {} is {}-dimensional, config says dim = {}",
                    field_path,
                    rho.grid().dim(),
                    c.dim
                )));
            }
            let drift = PerParticleDrift {
                inner: GridDrift::new(grad_log_density(&rho, FloorPolicy::Clamp)?),
                n_particles: n,
            };
            let joint_len = rho.grid().len().checked_pow(n as u32);
            if joint_len.map_or(true, |l| l > JOINT_INIT_CAP) {
                return Err(Error::CapExceeded(format!(
                    "product initial law needs {}^{} grid points",
                    rho.grid().len(),
                    n
                )));
            }
            let joint = rho.tensor_power(n)?;
            let half_width = c.half_width.unwrap_or(rho.grid().half_width());
            let ens = simulate(&drift, half_width, &InitialLaw::Density(&joint), &params)?;
            let re = path_relative_entropy(&ens, &drift, &free, c.horizon, n)?;
            (ens, re)
        }
    };

    let record = if n >= 2 {
        let radius = match c.delta {
            Some(delta) => interaction_ball_radius(n, delta)?,
            None => c.radius.expect("validated"),
        };
        stopping_times(&ensemble, n, c.dim, radius)?
    } else {
        // No partners, so the contact set is empty and tau is never reached.
        StoppingRecord {
            tau: vec![c.horizon + c.dt; c.paths],
            radius: 0.0,
            horizon: c.horizon,
            dt: c.dt,
        }
    };

    let mut survival = Vec::with_capacity(8);
    for k in 1..=8u32 {
        let t = c.horizon * f64::from(k) / 8.0;
        let (p, stderr) = survival_probability(&record, t)?;
        survival.push(serde_json::json!({ "t": t, "p": p, "stderr": stderr }));
    }

    let mut tau_csv = csv_preamble(&provenance.config_hash);
    tau_csv.push_str("# tau = horizon + dt means the path never hit the contact set\n");
    tau_csv.push_str("path,tau\n");
    for (i, tau) in record.tau.iter().enumerate() {
        tau_csv.push_str(&format!("{i},{tau}\n"));
    }

    let body = serde_json::json!({
        "provenance": provenance,
        "config": config,
        "contact_radius": record.radius,
        "survival": survival,
        "relative_entropy": {
            "total": entropy.total,
            "per_particle": entropy.per_particle,
            "stderr": entropy.stderr,
            "per_particle_stderr": entropy.per_particle_stderr,
        },
    });
    Ok(vec![
        write_text(&c.output_dir, &format!("{stem}-tau.csv"), &tau_csv)?,
        write_json(&c.output_dir, &format!("{stem}.json"), &body)?,
    ])
}

fn run_chaos(
    c: &ChaosConfig,
    config: &ExperimentConfig,
    provenance: &Provenance,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let report = run_sweep(&c.sweep)?;
    let csv = format!("{}{}", csv_preamble(&provenance.config_hash), report.to_csv());
    let body = serde_json::json!({
        "provenance": provenance,
        "config": config,
        "report": report,
    });
    let mut files = vec![
        write_text(&c.output_dir, &format!("{stem}.csv"), &csv)?,
        write_json(&c.output_dir, &format!("{stem}.json"), &body)?,
    ];
    if c.emit_plot_data {
        let series =
            format!("{}{}", csv_preamble(&provenance.config_hash), report.plot_series_csv());
        files.push(write_text(&c.output_dir, &format!("{stem}-series.csv"), &series)?);
    }
    Ok(files)
}

/// 2 for anything wrong with inputs, 3 for a numerical invariant that failed
/// mid-run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DimensionMismatch(_)
        | Error::CapExceeded(_)
        | Error::InvalidConfig(_)
        | Error::NotNormalized(_)
        | Error::SizeMismatch(_)
        | Error::Io(_)
        | Error::Serialization(_) => 2,
        Error::DensityFloor(_)
        | Error::NoConvergence { .. }
        | Error::EnergyIncreased { .. }
        | Error::FitResidual { .. }
        | Error::ZeroScatteringLength
        | Error::MomentDiverged(_)
        | Error::AbsoluteContinuity(_)
        | Error::DomainEscape(_)
        | Error::NonFinite(_) => 3,
    }
}

pub fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::CapExceeded(_) => "cap_exceeded",
        Error::InvalidConfig(_) => "invalid_config",
        Error::NotNormalized(_) => "not_normalized",
        Error::DensityFloor(_) => "density_floor",
        Error::NoConvergence { .. } => "no_convergence",
        Error::EnergyIncreased { .. } => "energy_increased",
        Error::FitResidual { .. } => "fit_residual",
        Error::ZeroScatteringLength => "zero_scattering_length",
        Error::SizeMismatch(_) => "size_mismatch",
        Error::MomentDiverged(_) => "moment_diverged",
        Error::AbsoluteContinuity(_) => "absolute_continuity",
        Error::DomainEscape(_) => "domain_escape",
        Error::NonFinite(_) => "non_finite",
        Error::Io(_) => "io",
        Error::Serialization(_) => "serialization",
    }
}

/// Machine-readable error body; the message names the failing invariant.
pub fn error_body(err: &Error) -> String {
    serde_json::json!({
        "error": {
            "kind": error_kind(err),
            "exit_code": exit_code(err),
            "message": err.to_string(),
        }
    })
    .to_string()
}

/// Writes through a temp file in the target directory and renames into place,
/// so readers never observe partial output.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

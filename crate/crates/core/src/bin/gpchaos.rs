//! Batch driver: parse one subcommand into an ExperimentConfig, run it,
//! print the written files. Errors leave as JSON on stderr with exit 2
//! (bad input) or 3 (numerical failure).

use clap::{Parser, Subcommand};
use gpchaos::chaos::SweepConfig;
use gpchaos::cli::{
    self, ChaosConfig, DiffuseConfig, ExperimentConfig, GpConfig, NbodyConfig, PairSpec,
    ScatterConfig, Scaling,
};
use gpchaos::gp::Trap;
use gpchaos::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gpchaos", version = cli::version_string(), about = "Dilute-gas ground states, their diffusions, and chaos metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-energy scattering length and kinetic fraction of a square well
    Scatter {
        #[arg(long)]
        well_depth: f64,
        #[arg(long)]
        well_radius: f64,
        /// Radial box for the ODE solve
        #[arg(long)]
        rmax: f64,
        /// Radial points (refined internally until s-hat settles)
        #[arg(long)]
        nr: usize,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Ground state of the one-body energy functional with quartic coupling g
    Gp {
        #[arg(long)]
        dim: usize,
        /// harmonic|quartic, optionally with :strength
        #[arg(long, value_parser = parse_trap)]
        trap: Trap,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        grid_n: usize,
        #[arg(long = "grid-L")]
        grid_l: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 500_000)]
        max_iters: usize,
        /// Dump the density in the binary field format
        #[arg(long)]
        dump_field: bool,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Exact few-body ground state with a scaled pair interaction
    Nbody {
        #[arg(long = "N")]
        n_particles: usize,
        #[arg(long = "d")]
        dim: usize,
        /// harmonic|quartic, optionally with :strength
        #[arg(long, value_parser = parse_trap)]
        trap: Trap,
        /// gaussian:amp,width[,cutoff] | square:depth,radius | zero
        #[arg(long, value_parser = parse_pair)]
        pair: PairSpec,
        /// meanfield (v/N) | gp (length rescale to scattering length g/4piN)
        #[arg(long, value_parser = parse_scaling)]
        scaling: Scaling,
        #[arg(long)]
        grid_n: usize,
        #[arg(long = "grid-L")]
        grid_l: f64,
        /// Coupling target for gp scaling
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 500_000)]
        max_iters: usize,
        /// Dump the joint density in the binary field format
        #[arg(long)]
        dump_density: bool,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Euler-Maruyama ensemble with stopping times and path relative entropy
    Diffuse {
        /// zero | ou | path to a binary density field
        #[arg(long)]
        drift_from: String,
        #[arg(long = "N")]
        n_particles: usize,
        #[arg(long = "d")]
        dim: usize,
        #[arg(long)]
        dt: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        /// Contact-radius exponent for d = 3: radius = N^(-1/3 - delta)
        #[arg(long)]
        delta: Option<f64>,
        /// Explicit contact radius for d != 3
        #[arg(long)]
        radius: Option<f64>,
        /// Simulation box; defaults to 6, or to the field's own box
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        ou_rate: f64,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// N-sweep of every chaos metric against the fixed mean-field reference
    Chaos {
        /// JSON sweep parameters; missing keys take defaults, unknown keys fail
        #[arg(long)]
        config: PathBuf,
        /// Also write the long-format (metric, N, value, stderr) CSV
        #[arg(long)]
        emit_plot_data: bool,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
}

fn parse_trap(s: &str) -> std::result::Result<Trap, String> {
    let (kind, strength) = match s.split_once(':') {
        Some((k, v)) => (k, v.parse::<f64>().map_err(|e| format!("trap strength: {e}"))?),
        None => (s, 1.0),
    };
    match kind {
        "harmonic" => Ok(Trap::Harmonic { strength }),
        "quartic" => Ok(Trap::Quartic { strength }),
        other => Err(format!("unknown trap {other:?}, expected harmonic|quartic")),
    }
}

fn parse_pair(s: &str) -> std::result::Result<PairSpec, String> {
    if s == "zero" {
        return Ok(PairSpec::Zero);
    }
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("pair {s:?} needs kind:params"))?;
    let nums: Vec<f64> = rest
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("pair parameter {p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match (kind, nums.as_slice()) {
        ("gaussian", [amplitude, width]) => {
            Ok(PairSpec::Gaussian { amplitude: *amplitude, width: *width, cutoff: None })
        }
        ("gaussian", [amplitude, width, cutoff]) => Ok(PairSpec::Gaussian {
            amplitude: *amplitude,
            width: *width,
            cutoff: Some(*cutoff),
        }),
        ("square", [depth, radius]) => {
            Ok(PairSpec::SquareWell { depth: *depth, radius: *radius })
        }
        _ => Err(format!(
            "pair {s:?} not recognized; use gaussian:amp,width[,cutoff], square:depth,radius, or zero"
        )),
    }
}

fn parse_scaling(s: &str) -> std::result::Result<Scaling, String> {
    match s {
        "meanfield" => Ok(Scaling::Meanfield),
        "gp" => Ok(Scaling::Gp),
        other => Err(format!("unknown scaling {other:?}, expected meanfield|gp")),
    }
}

fn build_config(command: Command) -> Result<ExperimentConfig> {
    Ok(match command {
        Command::Scatter { well_depth, well_radius, rmax, nr, output_dir } => {
            ExperimentConfig::Scatter(ScatterConfig {
                well_depth,
                well_radius,
                rmax,
                nr,
                output_dir,
            })
        }
        Command::Gp { dim, trap, g, grid_n, grid_l, tol, max_iters, dump_field, output_dir } => {
            ExperimentConfig::Gp(GpConfig {
                dim,
                trap,
                g,
                grid_n,
                grid_l,
                tol,
                max_iters,
                dump_field,
                output_dir,
            })
        }
        Command::Nbody {
            n_particles,
            dim,
            trap,
            pair,
            scaling,
            grid_n,
            grid_l,
            g,
            tol,
            max_iters,
            dump_density,
            output_dir,
        } => ExperimentConfig::Nbody(NbodyConfig {
            n_particles,
            dim,
            trap,
            pair,
            scaling,
            grid_n,
            grid_l,
            g,
            scatter_rmax: None,
            scatter_nr: None,
            tol,
            max_iters,
            dump_density,
            output_dir,
        }),
        Command::Diffuse {
            drift_from,
            n_particles,
            dim,
            dt,
            horizon,
            paths,
            seed,
            delta,
            radius,
            half_width,
            ou_rate,
            output_dir,
        } => ExperimentConfig::Diffuse(DiffuseConfig {
            drift_from,
            n_particles,
            dim,
            dt,
            horizon,
            paths,
            seed,
            delta,
            radius,
            half_width,
            ou_rate,
            output_dir,
        }),
        Command::Chaos { config, emit_plot_data, output_dir } => {
            let text = std::fs::read_to_string(&config)?;
            let sweep: SweepConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Serialization(format!("{}: {e}", config.display())))?;
            ExperimentConfig::Chaos(ChaosConfig { sweep, emit_plot_data, output_dir })
        }
    })
}

fn run(cli: Cli) -> Result<()> {
    cli::init_threads()?;
    let config = build_config(cli.command)?;
    for file in cli::run(&config)? {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", cli::error_body(&err));
        std::process::exit(cli::exit_code(&err));
    }
}

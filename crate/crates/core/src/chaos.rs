//! Chaos metrics and the inequality machinery built on them: transport
//! distances by exact assignment, entropies and Fisher informations by
//! quadrature, concentration of empirical measures, and the N-sweep report.

pub mod assignment;
pub mod concentration;
pub mod entropy;
pub mod hwi;
pub mod sweep;
pub mod wasserstein;

pub use concentration::{empirical_concentration, test_function_library, TestFn};
pub use entropy::{
    entropy, fisher_information, relative_entropy, relative_fisher, total_variation,
};
pub use hwi::{hwi_report, HwiReport};
pub use sweep::{run_sweep, ChaosReport, SweepConfig};
pub use wasserstein::{
    density_distance, w1_w2_bound_check, wasserstein_1d_densities, wasserstein_samples, Metric,
    MetricKind, Order,
};

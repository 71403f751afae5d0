//! Parameter sweeps over the code family, Pareto extraction and result files.

pub mod config;
pub mod emit;
pub mod pareto;
pub mod sweep;

pub use config::ScenarioConfig;
pub use emit::{emit, read_points, write_points, OutputFormat};
pub use pareto::{pareto_frontier, pareto_indices};
pub use sweep::{sweep_radius, sweep_region, RegionPoint, SweepResult, SweepVar};

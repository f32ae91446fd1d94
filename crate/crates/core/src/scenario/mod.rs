//! Scenario layer: file format, topology builders, the run loop, metrics,
//! CSV export and parameter sweeps.

pub mod build;
pub mod metrics;
pub mod output;
pub mod run;
pub mod spec;
pub mod sweep;

pub use metrics::{MetricsLog, ProbeRecord, Summary};
pub use run::{run_scenario, run_scenario_text, single_flow_equilibrium};
pub use spec::{BackgroundSpec, FlowSpec, MetricsSpec, ScenarioError, ScenarioSpec, TopologySpec};
pub use sweep::{sweep, sweep_csv, SweepRun};

//! Discrete-time multi-agent simulation of bid proposal development.
//!
//! A [`Scenario`] (organization, task networks, behavioral parameters and a
//! seed) is run tick by tick by [`engine::run`]; [`metrics::compute_metrics`]
//! turns the result into time, cost, productivity, quality, pressure and
//! effectiveness, and [`experiment`] sweeps goal congruence, dependence and
//! micro-management over many seeded replications.

pub mod behavior;
pub mod cli;
pub mod domain;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod netgen;
pub mod rng;

pub use domain::{
    AgentSpec, Role, Scenario, Task, TaskNetwork, TaskState, ValidationReport, ViolationCode,
};
pub use engine::{run, SimulationResult};
pub use error::{Error, Result};
pub use experiment::{run_sweep, summarize, ExperimentGrid, ResultTable};
pub use metrics::{compute_metrics, Metrics};
pub use netgen::{generate_case_study_org, generate_network, NetGenConfig};
pub use rng::SimRng;

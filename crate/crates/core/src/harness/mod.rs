//! Declarative experiment runner: Monte-Carlo replication, convergence
//! detection, scripted interventions, exploration sweeps and the
//! incumbent/newcomer entry scenarios.

pub mod config;
pub mod interventions;
pub mod metrics;
pub mod record;
pub mod runner;
pub mod scenarios;

pub use config::{
    AgentSpec, ConvergenceRule, DqnAgentSpec, EnvSpec, ExperimentConfig, GameEnv, MarketEnvSpec,
    MatrixEnvSpec, QInitSpec, TabularAgentSpec,
};
pub use interventions::{Forced, Intervention, Schedule};
pub use metrics::{profit_gain, ProfitGainMetric};
pub use record::{EpsReport, RunRecord};
pub use runner::{run_experiment, ConvergenceTracker, ExperimentOutput, Replica};
pub use scenarios::{
    incumbent_newcomer, response_scenario, sweep_exploration, train_incumbent, warmstart_comparison,
    IncumbentPolicy, NewcomerConfig, NewcomerOutput, NewcomerShock, ResponseConfig, ResponseOutput,
    SweepEntry, SweepOutput, TrainedIncumbent, WarmstartComparison, INCUMBENT, NEWCOMER,
};

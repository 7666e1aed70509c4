//! Declarative experiment descriptions and their validated, runnable form.

use crate::agents::dqn::DqnHyperparams;
use crate::agents::replay::DualBufferConfig;
use crate::agents::tabular::QTable;
use crate::agents::{AgentHyperparams, RewardSpec};
use crate::error::{Error, Result};
use crate::game::{MarketGame, StageGame};
use crate::matrix::MatrixGame;
use crate::harness::interventions::Intervention;
use crate::market::{MarketParams, PriceGrid};
use crate::matrix::PayoffMatrix;
use crate::memory::state_count;

/// Pricing-game environment description.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketEnvSpec {
    pub params: MarketParams,
    pub grid_size: usize,
    pub grid_extension: f64,
    /// Explicit (nash, monopoly) anchor prices for the grid. When omitted
    /// they are solved from the symmetric equilibria.
    pub grid_anchors: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEnvSpec {
    pub payoffs: PayoffMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Market(MarketEnvSpec),
    Matrix(MatrixEnvSpec),
}

/// A built environment.
pub enum GameEnv {
    Market(MarketGame),
    Matrix(MatrixGame),
}

impl GameEnv {
    pub fn game(&self) -> &dyn StageGame {
        match self {
            GameEnv::Market(g) => g,
            GameEnv::Matrix(g) => g,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.game().n_agents()
    }

    pub fn n_actions(&self) -> usize {
        self.game().n_actions()
    }

    pub fn grid(&self) -> Option<&PriceGrid> {
        match self {
            GameEnv::Market(g) => Some(g.grid()),
            GameEnv::Matrix(_) => None,
        }
    }

    pub fn market(&self) -> Option<&MarketGame> {
        match self {
            GameEnv::Market(g) => Some(g),
            GameEnv::Matrix(_) => None,
        }
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<GameEnv> {
        match self {
            EnvSpec::Market(spec) => {
                let grid = match spec.grid_anchors {
                    Some((nash, monopoly)) => {
                        PriceGrid::build(nash, monopoly, spec.grid_extension, spec.grid_size)?
                    }
                    None => PriceGrid::from_params(&spec.params, spec.grid_extension, spec.grid_size)?,
                };
                if grid.len() > u16::MAX as usize {
                    return Err(Error::Config("price grid exceeds 65535 points".into()));
                }
                Ok(GameEnv::Market(MarketGame::new(spec.params.clone(), grid)?))
            }
            EnvSpec::Matrix(spec) => {
                PayoffMatrix::new(
                    spec.payoffs.temptation,
                    spec.payoffs.cooperation,
                    spec.payoffs.defection,
                    spec.payoffs.loss,
                )?;
                Ok(GameEnv::Matrix(MatrixGame::new(spec.payoffs)))
            }
        }
    }
}

/// How tabular values are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QInitSpec {
    /// Draw directly from U(q_init_low, q_init_high).
    Raw,
    /// Map the U(q_init_low, q_init_high) draw onto the reward-bound
    /// interval [r_min/(1-γ), r_max/(1-γ)] of the environment.
    RewardScaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgentSpec {
    pub hp: AgentHyperparams,
    pub reward: RewardSpec,
    pub q_init: QInitSpec,
}

impl TabularAgentSpec {
    pub fn with_hp(hp: AgentHyperparams) -> Self {
        Self {
            hp,
            reward: RewardSpec::selfish(),
            q_init: QInitSpec::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnAgentSpec {
    pub hp: DqnHyperparams,
    pub reward: RewardSpec,
    /// Dual online/offline replay; `None` uses a single buffer.
    pub dual: Option<DualBufferConfig>,
    /// Profit baseline for the dual controller when no observation phase
    /// precedes training.
    pub baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Tabular(TabularAgentSpec),
    Dqn(DqnAgentSpec),
    /// Always plays one action.
    Fixed { action: usize },
    /// Cycles through a fixed sequence.
    Cycle { actions: Vec<usize> },
    /// Frozen greedy play from a table snapshot.
    Frozen { table: QTable, memory_len: usize },
}

/// Convergence rule: the run is converged once no agent's greedy action has
/// changed in any tracked state for `stability_count` consecutive periods.
/// `window` is the trailing span used for post-convergence statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvergenceRule {
    pub stability_count: usize,
    pub window: usize,
}

impl ConvergenceRule {
    pub fn tabular_default() -> Self {
        Self {
            stability_count: 25_000,
            window: 10_000,
        }
    }

    pub fn dqn_default() -> Self {
        Self {
            stability_count: 2_000,
            window: 1_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stability_count == 0 || self.window == 0 {
            return Err(Error::Config(
                "convergence stability count and window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Full declarative description of one experiment family.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    /// Maximum periods per replica.
    pub horizon: usize,
    pub n_monte_carlo: usize,
    pub convergence: ConvergenceRule,
    pub interventions: Vec<Intervention>,
    pub seed: u64,
    pub stop_on_convergence: bool,
    /// Pre-history seeding the shared memory, oldest first. When absent the
    /// first L periods are played uniformly at random to fill the memory.
    pub initial_memory: Option<Vec<Vec<usize>>>,
}

impl ExperimentConfig {
    /// Cross-validate agents against the environment before any run starts.
    pub fn validate(&self, env: &GameEnv) -> Result<()> {
        self.convergence.validate()?;
        let k = env.n_agents();
        let n_actions = env.n_actions();
        if self.agents.len() != k {
            return Err(Error::Config(format!(
                "{} agent specs for an environment with {k} agents",
                self.agents.len()
            )));
        }
        if self.n_monte_carlo == 0 {
            return Err(Error::Config("at least one Monte-Carlo replica is required".into()));
        }
        for (i, spec) in self.agents.iter().enumerate() {
            match spec {
                AgentSpec::Tabular(t) => {
                    t.hp.validate()?;
                    let states = state_count(k, n_actions, t.hp.memory_len)?;
                    let entries = states.checked_mul(n_actions as u128);
                    match entries {
                        Some(e) if e <= 100_000_000 => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "agent {i}: tabular state space of {states} states is too large"
                            )))
                        }
                    }
                    if t.q_init == QInitSpec::RewardScaled && env.market().is_none() {
                        return Err(Error::Config(format!(
                            "agent {i}: reward-scaled initialization requires a market environment"
                        )));
                    }
                }
                AgentSpec::Dqn(d) => {
                    d.hp.validate()?;
                    if env.grid().is_none() {
                        return Err(Error::Config(format!(
                            "agent {i}: function approximation requires a market environment"
                        )));
                    }
                    if let Some(dual) = &d.dual {
                        dual.validate()?;
                    }
                }
                AgentSpec::Fixed { action } => {
                    if *action >= n_actions {
                        return Err(Error::Config(format!(
                            "agent {i}: fixed action {action} out of range"
                        )));
                    }
                }
                AgentSpec::Cycle { actions } => {
                    if actions.is_empty() {
                        return Err(Error::Config(format!("agent {i}: empty action cycle")));
                    }
                    if actions.iter().any(|a| *a >= n_actions) {
                        return Err(Error::Config(format!(
                            "agent {i}: cycle action out of range"
                        )));
                    }
                }
                AgentSpec::Frozen { table, memory_len } => {
                    let states = state_count(k, n_actions, *memory_len)?;
                    if table.n_states() as u128 != states || table.n_actions() != n_actions {
                        return Err(Error::Config(format!(
                            "agent {i}: frozen table is {}x{}, environment needs {}x{}",
                            table.n_states(),
                            table.n_actions(),
                            states,
                            n_actions
                        )));
                    }
                }
            }
        }
        if let Some(init) = &self.initial_memory {
            let l_max = self.max_memory_len();
            if init.len() < l_max {
                return Err(Error::Config(format!(
                    "initial memory has {} periods, agents need {l_max}",
                    init.len()
                )));
            }
            for joint in init {
                if joint.len() != k || joint.iter().any(|a| *a >= n_actions) {
                    return Err(Error::Config("initial memory contains invalid joint actions".into()));
                }
            }
        }
        Ok(())
    }

    /// Longest memory any agent conditions on.
    pub fn max_memory_len(&self) -> usize {
        self.agents
            .iter()
            .map(|a| match a {
                AgentSpec::Tabular(t) => t.hp.memory_len,
                AgentSpec::Dqn(d) => d.hp.memory_len,
                AgentSpec::Frozen { memory_len, .. } => *memory_len,
                _ => 1,
            })
            .max()
            .unwrap_or(1)
    }
}

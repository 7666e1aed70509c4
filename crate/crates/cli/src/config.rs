//! Experiment configuration files: a versioned, human-editable TOML schema
//! that mirrors the runner's configuration. Unknown keys are rejected with
//! the parser's line/column diagnostics, and parsing materializes every
//! default so the echoed effective config is complete.

use std::path::Path;

use serde::{Deserialize, Serialize};

use pricegame_core::agents::dqn::DqnHyperparams;
use pricegame_core::agents::replay::DualBufferConfig;
use pricegame_core::agents::{AgentHyperparams, RewardSpec};
use pricegame_core::harness::{
    AgentSpec, ConvergenceRule, DqnAgentSpec, EnvSpec, ExperimentConfig, Forced, Intervention,
    MarketEnvSpec, MatrixEnvSpec, QInitSpec, TabularAgentSpec,
};
use pricegame_core::market::MarketParams;
use pricegame_core::matrix::PayoffMatrix;
use pricegame_core::snapshot;
use pricegame_core::Error;

pub const SCHEMA_VERSION: u32 = 1;

fn default_version() -> u32 {
    SCHEMA_VERSION
}
fn default_replicas() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_agents() -> usize {
    2
}
fn default_mu() -> f64 {
    0.25
}
fn default_quality() -> f64 {
    2.0
}
fn default_marginal_cost() -> f64 {
    1.0
}
fn default_grid_size() -> usize {
    15
}
fn default_grid_extension() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    0.125
}
fn default_gamma() -> f64 {
    0.95
}
fn default_beta() -> f64 {
    1e-5
}
fn default_q_init_high() -> f64 {
    1.0
}
fn default_memory() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_dqn_beta() -> f64 {
    2e-3
}
fn default_dqn_memory() -> usize {
    10
}
fn default_batch_size() -> usize {
    32
}
fn default_target_sync() -> u64 {
    500
}
fn default_replay_capacity() -> usize {
    10_000
}
fn default_updates_per_period() -> usize {
    1
}
fn default_offline_capacity() -> usize {
    4000
}
fn default_online_capacity() -> usize {
    400
}
fn default_offline_weight() -> f64 {
    0.5
}
fn default_rolling_window() -> usize {
    100
}
fn default_profit_threshold_frac() -> f64 {
    0.9
}
fn default_p_online_low() -> f64 {
    0.2
}
fn default_p_online_high() -> f64 {
    0.9
}
fn default_csv_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_true")]
    pub stop_on_convergence: bool,
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    pub agents: Vec<AgentSection>,
    #[serde(default)]
    pub interventions: Vec<InterventionSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSection {
    Market {
        #[serde(default = "default_agents")]
        agents: usize,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default)]
        a0: f64,
        /// Per-agent quality indexes; a single value is broadcast.
        #[serde(default)]
        quality: Option<Vec<f64>>,
        #[serde(default)]
        marginal_cost: Option<Vec<f64>>,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
        #[serde(default = "default_grid_extension")]
        grid_extension: f64,
        /// Explicit grid anchor prices (nash, monopoly); solved when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_anchors: Option<(f64, f64)>,
    },
    Matrix {
        #[serde(default)]
        temptation: f64,
        #[serde(default = "default_pd_cooperation")]
        cooperation: f64,
        #[serde(default = "default_pd_defection")]
        defection: f64,
        #[serde(default = "default_pd_loss")]
        loss: f64,
    },
}

fn default_pd_cooperation() -> f64 {
    -1.0
}
fn default_pd_defection() -> f64 {
    -2.0
}
fn default_pd_loss() -> f64 {
    -3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub stability_count: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSection {
    Tabular {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        q_init_low: f64,
        #[serde(default = "default_q_init_high")]
        q_init_high: f64,
        #[serde(default = "default_memory")]
        memory: usize,
        #[serde(default)]
        opponent_weight: f64,
        /// "raw" draws U(q_init_low, q_init_high); "reward_scaled" maps the
        /// draw onto the environment's reward-bound interval.
        #[serde(default)]
        q_init: Option<QInitSection>,
    },
    Dqn {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_dqn_beta")]
        beta: f64,
        #[serde(default = "default_dqn_memory")]
        memory: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_target_sync")]
        target_sync_every: u64,
        #[serde(default = "default_replay_capacity")]
        replay_capacity: usize,
        #[serde(default = "default_updates_per_period")]
        updates_per_period: usize,
        #[serde(default)]
        opponent_weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dual: Option<DualSection>,
        /// Controller baseline when training starts without an observation
        /// phase.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        baseline: Option<f64>,
    },
    Fixed {
        action: usize,
    },
    Cycle {
        actions: Vec<usize>,
    },
    Frozen {
        /// Path to a table snapshot, relative to the config file.
        snapshot: String,
        #[serde(default = "default_memory")]
        memory: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QInitSection {
    Raw,
    RewardScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSection {
    #[serde(default = "default_offline_capacity")]
    pub offline_capacity: usize,
    #[serde(default = "default_online_capacity")]
    pub online_capacity: usize,
    #[serde(default = "default_offline_weight")]
    pub offline_weight: f64,
    #[serde(default = "default_rolling_window")]
    pub rolling_window: usize,
    #[serde(default = "default_profit_threshold_frac")]
    pub profit_threshold_frac: f64,
    #[serde(default = "default_p_online_low")]
    pub p_online_low: f64,
    #[serde(default = "default_p_online_high")]
    pub p_online_high: f64,
}

impl Default for DualSection {
    fn default() -> Self {
        Self {
            offline_capacity: default_offline_capacity(),
            online_capacity: default_online_capacity(),
            offline_weight: default_offline_weight(),
            rolling_window: default_rolling_window(),
            profit_threshold_frac: default_profit_threshold_frac(),
            p_online_low: default_p_online_low(),
            p_online_high: default_p_online_high(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSection {
    pub agent: usize,
    pub start: usize,
    /// Forced periods; omit for a permanent override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Emit every n-th period to the results CSV.
    #[serde(default = "default_csv_every")]
    pub csv_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            csv_every: default_csv_every(),
        }
    }
}

impl ConfigFile {
    /// Parse a config document, rejecting unknown keys.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error:\n{e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.agents.is_empty() {
            return Err(Error::Config("at least one agent is required".into()));
        }
        for iv in &cfg.interventions {
            let chosen = iv.action.is_some() as u8 + iv.price.is_some() as u8 + iv.hold as u8;
            if chosen != 1 {
                return Err(Error::Config(format!(
                    "intervention on agent {} must set exactly one of `action`, `price`, `hold`",
                    iv.agent
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The effective config with every default materialized.
    pub fn effective(mut self) -> Self {
        if self.convergence.is_none() {
            let any_dqn = self
                .agents
                .iter()
                .any(|a| matches!(a, AgentSection::Dqn { .. }));
            let rule = if any_dqn {
                ConvergenceRule::dqn_default()
            } else {
                ConvergenceRule::tabular_default()
            };
            self.convergence = Some(ConvergenceSection {
                stability_count: rule.stability_count,
                window: rule.window,
            });
        }
        if let EnvironmentSection::Market {
            agents,
            quality,
            marginal_cost,
            ..
        } = &mut self.environment
        {
            if quality.is_none() {
                *quality = Some(vec![default_quality(); *agents]);
            }
            if marginal_cost.is_none() {
                *marginal_cost = Some(vec![default_marginal_cost(); *agents]);
            }
        }
        for agent in &mut self.agents {
            match agent {
                AgentSection::Tabular { q_init, .. } => {
                    if q_init.is_none() {
                        *q_init = Some(match &self.environment {
                            EnvironmentSection::Market { .. } => QInitSection::RewardScaled,
                            EnvironmentSection::Matrix { .. } => QInitSection::Raw,
                        });
                    }
                }
                AgentSection::Dqn { dual, .. } => {
                    // Leave `dual` as configured; absence means a single buffer.
                    let _ = dual;
                }
                _ => {}
            }
        }
        if self.output.is_none() {
            self.output = Some(OutputSection::default());
        }
        self
    }

    pub fn emit(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn csv_every(&self) -> usize {
        self.output.as_ref().map(|o| o.csv_every.max(1)).unwrap_or(1)
    }

    pub fn convergence_rule(&self) -> ConvergenceRule {
        match &self.convergence {
            Some(c) => ConvergenceRule {
                stability_count: c.stability_count,
                window: c.window,
            },
            None => ConvergenceRule::tabular_default(),
        }
    }

    /// Translate into the runner's configuration. `base_dir` anchors
    /// relative snapshot paths.
    pub fn to_experiment(&self, base_dir: &Path) -> Result<ExperimentConfig, Error> {
        let env = match &self.environment {
            EnvironmentSection::Market {
                agents,
                mu,
                a0,
                quality,
                marginal_cost,
                grid_size,
                grid_extension,
                grid_anchors,
            } => {
                let quality = match quality {
                    Some(q) if q.len() == 1 => vec![q[0]; *agents],
                    Some(q) => q.clone(),
                    None => vec![default_quality(); *agents],
                };
                let marginal_cost = match marginal_cost {
                    Some(c) if c.len() == 1 => vec![c[0]; *agents],
                    Some(c) => c.clone(),
                    None => vec![default_marginal_cost(); *agents],
                };
                if quality.len() != *agents || marginal_cost.len() != *agents {
                    return Err(Error::Config(format!(
                        "quality/marginal_cost must have {} entries",
                        agents
                    )));
                }
                EnvSpec::Market(MarketEnvSpec {
                    params: MarketParams::new(*mu, *a0, quality, marginal_cost)?,
                    grid_size: *grid_size,
                    grid_extension: *grid_extension,
                    grid_anchors: *grid_anchors,
                })
            }
            EnvironmentSection::Matrix {
                temptation,
                cooperation,
                defection,
                loss,
            } => EnvSpec::Matrix(MatrixEnvSpec {
                payoffs: PayoffMatrix::new(*temptation, *cooperation, *defection, *loss)?,
            }),
        };

        let mut agents = Vec::with_capacity(self.agents.len());
        for section in &self.agents {
            agents.push(match section {
                AgentSection::Tabular {
                    alpha,
                    gamma,
                    beta,
                    q_init_low,
                    q_init_high,
                    memory,
                    opponent_weight,
                    q_init,
                } => AgentSpec::Tabular(TabularAgentSpec {
                    hp: AgentHyperparams {
                        alpha: *alpha,
                        gamma: *gamma,
                        beta: *beta,
                        q_init_low: *q_init_low,
                        q_init_high: *q_init_high,
                        memory_len: *memory,
                    },
                    reward: RewardSpec::new(*opponent_weight)?,
                    q_init: match q_init {
                        Some(QInitSection::Raw) => QInitSpec::Raw,
                        Some(QInitSection::RewardScaled) => QInitSpec::RewardScaled,
                        None => match &self.environment {
                            EnvironmentSection::Market { .. } => QInitSpec::RewardScaled,
                            EnvironmentSection::Matrix { .. } => QInitSpec::Raw,
                        },
                    },
                }),
                AgentSection::Dqn {
                    hidden,
                    learning_rate,
                    gamma,
                    beta,
                    memory,
                    batch_size,
                    target_sync_every,
                    replay_capacity,
                    updates_per_period,
                    opponent_weight,
                    dual,
                    baseline,
                } => AgentSpec::Dqn(DqnAgentSpec {
                    hp: DqnHyperparams {
                        hidden: hidden.clone(),
                        learning_rate: *learning_rate,
                        gamma: *gamma,
                        beta: *beta,
                        memory_len: *memory,
                        batch_size: *batch_size,
                        target_sync_every: *target_sync_every,
                        replay_capacity: *replay_capacity,
                        updates_per_period: *updates_per_period,
                    },
                    reward: RewardSpec::new(*opponent_weight)?,
                    dual: dual.as_ref().map(|d| DualBufferConfig {
                        offline_capacity: d.offline_capacity,
                        online_capacity: d.online_capacity,
                        offline_weight: d.offline_weight,
                        rolling_window: d.rolling_window,
                        profit_threshold_frac: d.profit_threshold_frac,
                        p_online_low: d.p_online_low,
                        p_online_high: d.p_online_high,
                    }),
                    baseline: *baseline,
                }),
                AgentSection::Fixed { action } => AgentSpec::Fixed { action: *action },
                AgentSection::Cycle { actions } => AgentSpec::Cycle {
                    actions: actions.clone(),
                },
                AgentSection::Frozen { snapshot, memory } => {
                    let path = base_dir.join(snapshot);
                    let table = snapshot::load_qtable(&path)?;
                    AgentSpec::Frozen {
                        table,
                        memory_len: *memory,
                    }
                }
            });
        }

        let interventions = self
            .interventions
            .iter()
            .map(|iv| {
                let force = if let Some(a) = iv.action {
                    Forced::Action(a)
                } else if let Some(p) = iv.price {
                    Forced::Price(p)
                } else {
                    Forced::Hold
                };
                Intervention {
                    agent: iv.agent,
                    start: iv.start,
                    duration: iv.duration,
                    force,
                }
            })
            .collect();

        Ok(ExperimentConfig {
            env,
            agents,
            horizon: self.horizon,
            n_monte_carlo: self.replicas,
            convergence: self.convergence_rule(),
            interventions,
            seed: self.seed,
            stop_on_convergence: self.stop_on_convergence,
            initial_memory: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 42
horizon = 1000

[environment]
kind = "market"

[[agents]]
kind = "tabular"

[[agents]]
kind = "tabular"
beta = 1e-4
"#;

    #[test]
    fn defaults_materialize_and_round_trip() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap().effective();
        assert_eq!(cfg.schema_version, 1);
        assert_eq!(cfg.replicas, 20);
        assert!(cfg.convergence.is_some());
        assert!(cfg.output.is_some());
        let emitted = cfg.emit();
        let reparsed = ConfigFile::parse(&emitted).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let bad = format!("{SAMPLE}\nbogus_key = 3\n");
        let err = ConfigFile::parse(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key") || msg.contains("unknown field"), "{msg}");
    }

    #[test]
    fn schema_version_is_enforced() {
        let bad = SAMPLE.replace("seed = 42", "seed = 42\nschema_version = 99");
        assert!(ConfigFile::parse(&bad).is_err());
    }

    #[test]
    fn interventions_need_exactly_one_force() {
        let with = |body: &str| format!("{SAMPLE}\n[[interventions]]\nagent = 0\nstart = 1\n{body}\n");
        assert!(ConfigFile::parse(&with("action = 3")).is_ok());
        assert!(ConfigFile::parse(&with("price = 1.5")).is_ok());
        assert!(ConfigFile::parse(&with("hold = true")).is_ok());
        assert!(ConfigFile::parse(&with("")).is_err());
        assert!(ConfigFile::parse(&with("action = 3\nprice = 1.5")).is_err());
    }

    #[test]
    fn translates_to_runner_config() {
        let cfg = ConfigFile::parse(SAMPLE).unwrap().effective();
        let exp = cfg.to_experiment(Path::new(".")).unwrap();
        assert_eq!(exp.n_monte_carlo, 20);
        assert_eq!(exp.agents.len(), 2);
        assert_eq!(exp.seed, 42);
        match &exp.env {
            EnvSpec::Market(m) => {
                assert_eq!(m.params.n_agents, 2);
                assert_eq!(m.grid_size, 15);
            }
            _ => panic!("expected a market environment"),
        }
    }

    #[test]
    fn matrix_defaults_follow_the_standard_dilemma() {
        let text = r#"
seed = 7
horizon = 100
[environment]
kind = "matrix"
[[agents]]
kind = "tabular"
alpha = 0.05
[[agents]]
kind = "tabular"
alpha = 0.05
"#;
        let cfg = ConfigFile::parse(text).unwrap().effective();
        let exp = cfg.to_experiment(Path::new(".")).unwrap();
        match &exp.env {
            EnvSpec::Matrix(m) => {
                assert_eq!(m.payoffs.temptation, 0.0);
                assert_eq!(m.payoffs.loss, -3.0);
            }
            _ => panic!("expected a matrix environment"),
        }
        match &exp.agents[0] {
            AgentSpec::Tabular(t) => assert_eq!(t.q_init, QInitSpec::Raw),
            _ => panic!(),
        }
    }
}

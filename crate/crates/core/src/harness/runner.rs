//! The experiment runner: seeded replicas, the period loop, convergence
//! tracking and Monte-Carlo replication.

use rayon::prelude::*;

use crate::agents::dqn::DqnAgent;
use crate::agents::scripted::{CycleAgent, FixedAgent, GreedyTableAgent};
use crate::agents::tabular::TabularAgent;
use crate::agents::{shape_reward, Agent, RewardSpec, Transition};
use crate::error::{Error, Result};
use crate::harness::config::{AgentSpec, ExperimentConfig, GameEnv, QInitSpec};
use crate::harness::interventions::Schedule;
use crate::harness::record::{EpsReport, RecordBuilder, RunRecord};
use crate::memory::MemoryState;
use crate::seed;

/// Counts periods with no greedy-policy change anywhere.
pub struct ConvergenceTracker {
    stability_count: usize,
    streak: usize,
}

impl ConvergenceTracker {
    pub fn new(stability_count: usize) -> Self {
        Self {
            stability_count,
            streak: 0,
        }
    }

    /// Record one period; true once the streak reaches the stability count.
    pub fn observe(&mut self, any_policy_change: bool) -> bool {
        if any_policy_change {
            self.streak = 0;
        } else {
            self.streak += 1;
        }
        self.streak >= self.stability_count
    }
}

/// Everything a run produces: the environment (for recomputing prices and
/// rewards), per-agent reward shaping, and one record per replica.
pub struct ExperimentOutput {
    pub env: GameEnv,
    pub reward_specs: Vec<RewardSpec>,
    pub records: Vec<RunRecord>,
}

impl ExperimentOutput {
    /// The reward the agent actually optimized in one period.
    pub fn shaped_rewards_at(&self, record: &RunRecord, period: usize) -> Vec<f64> {
        let raw = record.rewards_at(&self.env, period);
        shaped(&self.reward_specs, &raw)
    }
}

pub(crate) fn shaped(specs: &[RewardSpec], raw: &[f64]) -> Vec<f64> {
    (0..raw.len())
        .map(|i| {
            let others: Vec<f64> = raw
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, r)| *r)
                .collect();
            shape_reward(&specs[i], raw[i], &others)
        })
        .collect()
}

/// One seeded replica with its agents and shared memory; scenario code runs
/// it in segments.
pub struct Replica<'e> {
    env: &'e GameEnv,
    pub agents: Vec<Box<dyn Agent>>,
    reward_specs: Vec<RewardSpec>,
    memory: MemoryState,
    l_max: usize,
    /// Global period index, drives exploration schedules.
    pub t: u64,
    last_effective: Option<Vec<usize>>,
    tracker: ConvergenceTracker,
    pub replica_index: usize,
    pub replica_seed: u64,
}

impl<'e> Replica<'e> {
    pub fn from_config(
        cfg: &ExperimentConfig,
        env: &'e GameEnv,
        replica_index: usize,
    ) -> Result<Self> {
        let replica_seed = seed::split(cfg.seed, replica_index as u64);
        let k = env.n_agents();
        let n_actions = env.n_actions();
        let l_max = cfg.max_memory_len();

        let mut agents: Vec<Box<dyn Agent>> = Vec::with_capacity(k);
        let mut reward_specs = Vec::with_capacity(k);
        for (i, spec) in cfg.agents.iter().enumerate() {
            let rng = seed::rng_for(replica_seed, 1 + i as u64);
            match spec {
                AgentSpec::Tabular(t) => {
                    let states = crate::memory::state_count(k, n_actions, t.hp.memory_len)?;
                    let (low, high) = match t.q_init {
                        QInitSpec::Raw => (t.hp.q_init_low, t.hp.q_init_high),
                        QInitSpec::RewardScaled => {
                            let market = env.market().ok_or_else(|| {
                                Error::Config("reward-scaled initialization needs a market".into())
                            })?;
                            let (r_min, r_max) = market.profit_bounds()?;
                            let lo = r_min / (1.0 - t.hp.gamma);
                            let hi = r_max / (1.0 - t.hp.gamma);
                            (
                                lo + t.hp.q_init_low * (hi - lo),
                                lo + t.hp.q_init_high * (hi - lo),
                            )
                        }
                    };
                    agents.push(Box::new(TabularAgent::new(
                        i,
                        t.hp.clone(),
                        states as usize,
                        n_actions,
                        low,
                        high,
                        rng,
                    )?));
                    reward_specs.push(t.reward);
                }
                AgentSpec::Dqn(d) => {
                    let grid = env
                        .grid()
                        .ok_or_else(|| Error::Config("function approximation needs a market".into()))?
                        .clone();
                    let mut agent = match &d.dual {
                        Some(dual) => DqnAgent::with_dual_buffers(
                            i,
                            d.hp.clone(),
                            dual.clone(),
                            grid,
                            k,
                            n_actions,
                            rng,
                        )?,
                        None => DqnAgent::new(i, d.hp.clone(), grid, k, n_actions, rng)?,
                    };
                    if let Some(baseline) = d.baseline {
                        agent.set_baseline(baseline);
                    }
                    agents.push(Box::new(agent));
                    reward_specs.push(d.reward);
                }
                AgentSpec::Fixed { action } => {
                    agents.push(Box::new(FixedAgent::new(*action)));
                    reward_specs.push(RewardSpec::selfish());
                }
                AgentSpec::Cycle { actions } => {
                    agents.push(Box::new(CycleAgent::new(actions.clone())?));
                    reward_specs.push(RewardSpec::selfish());
                }
                AgentSpec::Frozen { table, memory_len } => {
                    agents.push(Box::new(GreedyTableAgent::new(table.clone(), *memory_len, rng)));
                    reward_specs.push(RewardSpec::selfish());
                }
            }
        }

        let mut memory = MemoryState::new(k, n_actions, l_max)?;
        let mut last_effective = None;
        if let Some(init) = &cfg.initial_memory {
            for joint in init {
                memory.push(joint)?;
            }
            last_effective = init.last().cloned();
        }

        Ok(Self {
            env,
            agents,
            reward_specs,
            memory,
            l_max,
            t: 0,
            last_effective,
            tracker: ConvergenceTracker::new(cfg.convergence.stability_count),
            replica_index,
            replica_seed,
        })
    }

    pub fn memory(&self) -> &MemoryState {
        &self.memory
    }

    pub fn reward_specs(&self) -> &[RewardSpec] {
        &self.reward_specs
    }

    /// Per-agent dual-buffer flags, for record construction.
    pub fn dual_flags(&self) -> Vec<bool> {
        self.agents.iter().map(|a| a.p_online().is_some()).collect()
    }

    /// Exploration reporting specs derived from the agent specs.
    pub fn eps_reports(cfg: &ExperimentConfig) -> Vec<EpsReport> {
        cfg.agents
            .iter()
            .map(|spec| match spec {
                AgentSpec::Tabular(t) => EpsReport::Global { beta: t.hp.beta },
                AgentSpec::Dqn(d) => EpsReport::Offset {
                    beta: d.hp.beta,
                    start: cfg.max_memory_len(),
                },
                _ => EpsReport::None,
            })
            .collect()
    }

    /// Run `periods` more periods. The schedule is indexed relative to the
    /// start of this segment. Returns the global period at which convergence
    /// was first detected, if it happened in this segment.
    pub fn run_segment(
        &mut self,
        periods: usize,
        schedule: &Schedule,
        mut record: Option<&mut RecordBuilder>,
        stop_on_convergence: bool,
    ) -> Result<Option<usize>> {
        let k = self.env.n_agents();
        let n_actions = self.env.n_actions();
        let game = self.env.game();
        let mut converged_at = None;

        for rel in 0..periods {
            let warm = self.memory.is_warm(self.l_max);

            let mut effective = Vec::with_capacity(k);
            for (i, agent) in self.agents.iter_mut().enumerate() {
                // Fully forced agents skip their policy for the period.
                use crate::harness::interventions::ResolvedForce;
                let action = match schedule.forced(i, rel) {
                    Some(ResolvedForce::Action(a)) => a,
                    Some(ResolvedForce::Hold) => match &self.last_effective {
                        Some(last) => last[i],
                        None => {
                            if warm {
                                agent.act(&self.memory, self.t)?
                            } else {
                                agent.warmup_action(n_actions)
                            }
                        }
                    },
                    None => {
                        if warm {
                            agent.act(&self.memory, self.t)?
                        } else {
                            agent.warmup_action(n_actions)
                        }
                    }
                };
                effective.push(action);
            }

            let raw_rewards = game.rewards(&effective);
            let pre_states: Option<Vec<u128>> = if warm {
                Some(
                    self.agents
                        .iter()
                        .map(|a| self.memory.encode(a.memory_len()))
                        .collect::<Result<_>>()?,
                )
            } else {
                None
            };

            self.memory.push(&effective)?;

            let mut any_change = false;
            if let Some(pre) = pre_states {
                let shaped_rewards = shaped(&self.reward_specs, &raw_rewards);
                for (i, agent) in self.agents.iter_mut().enumerate() {
                    let tr = Transition {
                        state: pre[i],
                        joint_actions: effective.clone(),
                        reward: shaped_rewards[i],
                        next_state: self.memory.encode(agent.memory_len())?,
                    };
                    let changed = agent.learn(&tr, self.t).map_err(|e| {
                        Error::Numerical(format!(
                            "replica {} period {}: {e}",
                            self.replica_index, self.t
                        ))
                    })?;
                    any_change |= changed;
                }
            }

            if let Some(builder) = record.as_deref_mut() {
                let p_online: Vec<Option<f64>> =
                    self.agents.iter().map(|a| a.p_online()).collect();
                builder.push_period(&effective, &p_online);
            }

            self.last_effective = Some(effective);
            self.t += 1;

            if self.tracker.observe(any_change) && converged_at.is_none() {
                converged_at = Some(self.t as usize);
                if let Some(builder) = record.as_deref_mut() {
                    builder.set_convergence(self.t as usize);
                }
                if stop_on_convergence {
                    break;
                }
            }
        }
        Ok(converged_at)
    }

    pub fn snapshots(&self) -> Vec<Option<crate::snapshot::AgentSnapshot>> {
        self.agents.iter().map(|a| a.snapshot()).collect()
    }
}

/// Run all Monte-Carlo replicas of a configuration.
///
/// Replica seeds derive from the master seed through the documented
/// splitter, so identical configurations and seeds reproduce identical
/// records; replicas execute in parallel without sharing state.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let env = cfg.env.build()?;
    cfg.validate(&env)?;
    let schedule = Schedule::resolve(&cfg.interventions, &env, cfg.horizon.max(1))?;

    let records: Vec<RunRecord> = (0..cfg.n_monte_carlo)
        .into_par_iter()
        .map(|replica| -> Result<RunRecord> {
            let mut rep = Replica::from_config(cfg, &env, replica)?;
            let mut builder = RecordBuilder::new(
                replica,
                rep.replica_seed,
                env.n_agents(),
                &rep.dual_flags(),
                Replica::eps_reports(cfg),
            );
            rep.run_segment(
                cfg.horizon,
                &schedule,
                Some(&mut builder),
                cfg.stop_on_convergence,
            )?;
            let snapshots = rep.snapshots();
            Ok(builder.finish(snapshots))
        })
        .collect::<Result<_>>()?;

    let reward_specs = cfg
        .agents
        .iter()
        .map(|spec| match spec {
            AgentSpec::Tabular(t) => t.reward,
            AgentSpec::Dqn(d) => d.reward,
            _ => RewardSpec::selfish(),
        })
        .collect();

    Ok(ExperimentOutput {
        env,
        reward_specs,
        records,
    })
}

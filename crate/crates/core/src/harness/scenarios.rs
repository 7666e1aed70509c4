//! Composite experiment families: exploration-asymmetry sweeps, shock
//! responses of converged duopolies, and the incumbent/newcomer entry
//! scenarios with the dual-buffer learner.

use rayon::prelude::*;

use crate::agents::dqn::DqnHyperparams;
use crate::agents::replay::DualBufferConfig;
use crate::agents::tabular::QTable;
use crate::agents::{AgentHyperparams, RewardSpec};
use crate::error::{Error, Result};
use crate::harness::config::{
    AgentSpec, ConvergenceRule, DqnAgentSpec, EnvSpec, ExperimentConfig, GameEnv, MarketEnvSpec,
    QInitSpec, TabularAgentSpec,
};
use crate::harness::interventions::{Forced, Intervention, Schedule};
use crate::harness::metrics::{median, periods_to_fraction_of_final, profit_series, trailing_mean_profits};
use crate::harness::record::{EpsReport, RecordBuilder, RunRecord};
use crate::harness::runner::Replica;
use crate::market::equilibrium_profits;
use crate::memory::state_count;

/// Post-convergence profits for one exploration-decay setting of agent 1.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub beta2: f64,
    /// `[replica][agent]` trailing mean profits.
    pub profits: Vec<Vec<f64>>,
    /// Per-agent median across replicas.
    pub median_profits: Vec<f64>,
    pub convergence: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub entries: Vec<SweepEntry>,
    pub pi_nash: f64,
    pub pi_monopoly: f64,
}

/// Vary the second agent's exploration decay while the first stays fixed;
/// report trailing mean profits per replica.
pub fn sweep_exploration(base: &ExperimentConfig, beta2_values: &[f64]) -> Result<SweepOutput> {
    let env = base.env.build()?;
    base.validate(&env)?;
    let market = env
        .market()
        .ok_or_else(|| Error::Config("exploration sweeps run on the pricing game".into()))?;
    if beta2_values.is_empty() {
        return Err(Error::Config("no exploration decay values supplied".into()));
    }
    let (pi_nash, pi_monopoly) = equilibrium_profits(market.params())?;

    let mut entries = Vec::with_capacity(beta2_values.len());
    for (i, beta2) in beta2_values.iter().enumerate() {
        let mut cfg = base.clone();
        match cfg.agents.get_mut(1) {
            Some(AgentSpec::Tabular(t)) => t.hp.beta = *beta2,
            _ => {
                return Err(Error::Config(
                    "exploration sweeps vary a tabular agent at index 1".into(),
                ))
            }
        }
        // Decorrelate runs across sweep points.
        cfg.seed = crate::seed::split(base.seed, 1000 + i as u64);
        let out = crate::harness::runner::run_experiment(&cfg)?;
        let profits: Vec<Vec<f64>> = out
            .records
            .iter()
            .map(|r| trailing_mean_profits(&out.env, r, cfg.convergence.window))
            .collect();
        let n_agents = out.env.n_agents();
        let median_profits = (0..n_agents)
            .map(|a| median(&profits.iter().map(|p| p[a]).collect::<Vec<_>>()))
            .collect();
        entries.push(SweepEntry {
            beta2: *beta2,
            profits,
            median_profits,
            convergence: out.records.iter().map(|r| r.convergence_period).collect(),
        });
    }
    Ok(SweepOutput {
        entries,
        pi_nash,
        pi_monopoly,
    })
}

/// Shock study on converged runs: train to convergence, record a pre-shock
/// window, then apply the override schedule and keep recording.
#[derive(Debug, Clone)]
pub struct ResponseConfig {
    /// Training configuration (convergence stops it early).
    pub base: ExperimentConfig,
    /// Overrides indexed relative to the shock start.
    pub shock: Vec<Intervention>,
    /// Recorded periods before the shock.
    pub pre_window: usize,
    /// Recorded periods from the shock start on.
    pub post_window: usize,
}

pub struct ResponseOutput {
    pub env: GameEnv,
    /// One record per replica covering `pre_window + post_window` periods,
    /// with a "shock" phase mark at the shock start.
    pub records: Vec<RunRecord>,
    pub training_convergence: Vec<Option<usize>>,
}

pub fn response_scenario(cfg: &ResponseConfig) -> Result<ResponseOutput> {
    let env = cfg.base.env.build()?;
    cfg.base.validate(&env)?;
    if cfg.pre_window == 0 || cfg.post_window == 0 {
        return Err(Error::Config("response windows must be positive".into()));
    }
    let training_schedule =
        Schedule::resolve(&cfg.base.interventions, &env, cfg.base.horizon.max(1))?;
    let shock_schedule = Schedule::resolve(&cfg.shock, &env, cfg.post_window)?;

    let results: Vec<(RunRecord, Option<usize>)> = (0..cfg.base.n_monte_carlo)
        .into_par_iter()
        .map(|replica| -> Result<(RunRecord, Option<usize>)> {
            let mut rep = Replica::from_config(&cfg.base, &env, replica)?;
            let converged =
                rep.run_segment(cfg.base.horizon, &training_schedule, None, true)?;
            let mut builder = RecordBuilder::new(
                replica,
                rep.replica_seed,
                env.n_agents(),
                &rep.dual_flags(),
                Replica::eps_reports(&cfg.base),
            );
            rep.run_segment(cfg.pre_window, &Schedule::empty(), Some(&mut builder), false)?;
            builder.mark_phase("shock");
            rep.run_segment(cfg.post_window, &shock_schedule, Some(&mut builder), false)?;
            Ok((builder.finish(rep.snapshots()), converged))
        })
        .collect::<Result<_>>()?;

    let (records, training_convergence) = results.into_iter().unzip();
    Ok(ResponseOutput {
        env,
        records,
        training_convergence,
    })
}

/// A converged symmetric tabular duopoly, packaged as the incumbent side of
/// the entry scenarios.
#[derive(Debug, Clone)]
pub struct TrainedIncumbent {
    pub table: QTable,
    pub memory_len: usize,
    /// Joint action played in the final (converged) period.
    pub equilibrium_joint: Vec<usize>,
    pub convergence: Option<usize>,
}

/// Train a symmetric tabular duopoly and keep agent 0's table.
pub fn train_incumbent(
    market: &MarketEnvSpec,
    hp: &AgentHyperparams,
    horizon: usize,
    convergence: ConvergenceRule,
    seed: u64,
) -> Result<TrainedIncumbent> {
    let spec = TabularAgentSpec {
        hp: hp.clone(),
        reward: RewardSpec::selfish(),
        q_init: QInitSpec::RewardScaled,
    };
    let cfg = ExperimentConfig {
        env: EnvSpec::Market(market.clone()),
        agents: vec![AgentSpec::Tabular(spec.clone()), AgentSpec::Tabular(spec)],
        horizon,
        n_monte_carlo: 1,
        convergence,
        interventions: Vec::new(),
        seed,
        stop_on_convergence: true,
        initial_memory: None,
    };
    let out = crate::harness::runner::run_experiment(&cfg)?;
    let record = &out.records[0];
    if record.periods == 0 {
        return Err(Error::Config("incumbent training produced no periods".into()));
    }
    let table = match &record.final_policies[0] {
        Some(crate::snapshot::AgentSnapshot::Table(t)) => t.clone(),
        _ => return Err(Error::Config("incumbent training produced no table".into())),
    };
    Ok(TrainedIncumbent {
        table,
        memory_len: hp.memory_len,
        equilibrium_joint: record.joint(record.periods - 1),
        convergence: record.convergence_period,
    })
}

/// Temporary policy change forced on the incumbent during the online phase.
#[derive(Debug, Clone)]
pub struct NewcomerShock {
    /// Periods into the online phase.
    pub start: usize,
    /// `None` holds the override until the end of the run.
    pub duration: Option<usize>,
    pub force: Forced,
}

/// How the incumbent behaves outside forced windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncumbentPolicy {
    /// Greedy play from the frozen table (reacts to the newcomer's prices).
    Frozen,
    /// A fully scripted constant: keep posting the pre-entry equilibrium
    /// price regardless of the newcomer's behavior.
    Scripted,
}

/// The entry scenario: a frozen incumbent, a dual-buffer newcomer that first
/// observes and then trades.
#[derive(Debug, Clone)]
pub struct NewcomerConfig {
    pub market: MarketEnvSpec,
    pub incumbent: QTable,
    pub incumbent_memory_len: usize,
    pub incumbent_policy: IncumbentPolicy,
    /// Constant action for the scripted incumbent (its pre-entry
    /// equilibrium play).
    pub incumbent_action: usize,
    /// Actions the newcomer's slot replays while observing, cycled. A single
    /// entry replays the pre-entry equilibrium price; a longer script
    /// emulates a predecessor with price dynamics.
    pub replay: Vec<usize>,
    /// Pre-history seeding the shared memory, oldest first.
    pub initial_memory: Vec<Vec<usize>>,
    pub newcomer_hp: DqnHyperparams,
    pub dual: DualBufferConfig,
    /// Newcomer objective; opponent weight 0 is the exploitation scenario.
    pub reward: RewardSpec,
    pub observe_periods: usize,
    pub online_periods: usize,
    pub shock: Option<NewcomerShock>,
    pub seed: u64,
}

pub struct NewcomerOutput {
    pub env: GameEnv,
    /// Phases marked "observe", "online" and (when configured) "shock".
    pub record: RunRecord,
    /// Mean newcomer reward over the observation phase.
    pub baseline: f64,
    pub reward_specs: Vec<RewardSpec>,
}

/// Agent indices in the entry scenarios.
pub const INCUMBENT: usize = 0;
pub const NEWCOMER: usize = 1;

fn newcomer_experiment(cfg: &NewcomerConfig, dual: bool) -> Result<ExperimentConfig> {
    if cfg.observe_periods == 0 && dual {
        return Err(Error::Config("the observation phase needs at least one period".into()));
    }
    if cfg.online_periods == 0 {
        return Err(Error::Config("the online phase needs at least one period".into()));
    }
    if let Some(shock) = &cfg.shock {
        if shock.start >= cfg.online_periods {
            return Err(Error::Config(format!(
                "shock starts at online period {} beyond the online phase of {}",
                shock.start, cfg.online_periods
            )));
        }
    }
    let incumbent_spec = match cfg.incumbent_policy {
        IncumbentPolicy::Frozen => AgentSpec::Frozen {
            table: cfg.incumbent.clone(),
            memory_len: cfg.incumbent_memory_len,
        },
        IncumbentPolicy::Scripted => AgentSpec::Fixed {
            action: cfg.incumbent_action,
        },
    };
    Ok(ExperimentConfig {
        env: EnvSpec::Market(cfg.market.clone()),
        agents: vec![
            incumbent_spec,
            AgentSpec::Dqn(DqnAgentSpec {
                hp: cfg.newcomer_hp.clone(),
                reward: cfg.reward,
                dual: if dual { Some(cfg.dual.clone()) } else { None },
                baseline: None,
            }),
        ],
        horizon: cfg.observe_periods + cfg.online_periods,
        n_monte_carlo: 1,
        convergence: ConvergenceRule::dqn_default(),
        interventions: Vec::new(),
        seed: cfg.seed,
        stop_on_convergence: false,
        initial_memory: Some(cfg.initial_memory.clone()),
    })
}

fn shock_schedule(cfg: &NewcomerConfig, env: &GameEnv) -> Result<Schedule> {
    match &cfg.shock {
        Some(shock) => Schedule::resolve(
            &[Intervention {
                agent: INCUMBENT,
                start: shock.start,
                duration: shock.duration,
                force: shock.force.clone(),
            }],
            env,
            cfg.online_periods,
        ),
        None => Ok(Schedule::empty()),
    }
}

/// Run the full entry scenario: observation fills the offline buffer, then
/// the newcomer trains online while the incumbent plays its frozen policy
/// (optionally shocked).
pub fn incumbent_newcomer(cfg: &NewcomerConfig) -> Result<NewcomerOutput> {
    let exp = newcomer_experiment(cfg, true)?;
    let env = exp.env.build()?;
    exp.validate(&env)?;
    if cfg.replay.is_empty() {
        return Err(Error::Config("observation replay script is empty".into()));
    }
    if cfg.incumbent_policy == IncumbentPolicy::Frozen {
        let states = state_count(env.n_agents(), env.n_actions(), cfg.incumbent_memory_len)?;
        if cfg.incumbent.n_states() as u128 != states {
            return Err(Error::Config("incumbent snapshot does not match the environment".into()));
        }
    }
    let observe_schedule = Schedule::resolve(
        &[Intervention {
            agent: NEWCOMER,
            start: 0,
            duration: Some(cfg.observe_periods),
            force: Forced::Script(cfg.replay.clone()),
        }],
        &env,
        cfg.observe_periods,
    )?;
    let online_schedule = shock_schedule(cfg, &env)?;

    let (record, baseline, reward_specs) = {
        let mut rep = Replica::from_config(&exp, &env, 0)?;
        let eps = vec![
            EpsReport::None,
            EpsReport::Offset {
                beta: cfg.newcomer_hp.beta,
                start: cfg.observe_periods,
            },
        ];
        let mut builder = RecordBuilder::new(0, rep.replica_seed, 2, &[false, true], eps);

        builder.mark_phase("observe");
        rep.agents[NEWCOMER].begin_observation();
        rep.run_segment(cfg.observe_periods, &observe_schedule, Some(&mut builder), false)?;
        let baseline = rep.agents[NEWCOMER]
            .end_observation()?
            .ok_or_else(|| Error::Config("newcomer produced no observation baseline".into()))?;

        builder.mark_phase("online");
        if let Some(shock) = &cfg.shock {
            builder.mark_phase_at("shock", cfg.observe_periods + shock.start);
        }
        rep.run_segment(cfg.online_periods, &online_schedule, Some(&mut builder), false)?;

        let reward_specs = rep.reward_specs().to_vec();
        (builder.finish(rep.snapshots()), baseline, reward_specs)
    };
    Ok(NewcomerOutput {
        env,
        record,
        baseline,
        reward_specs,
    })
}

/// Paired comparison of the warm-started dual-buffer newcomer against a
/// cold-started single-buffer learner with identical hyperparameters.
#[derive(Debug, Clone)]
pub struct WarmstartComparison {
    /// Online periods until the rolling mean profit first reaches the target
    /// fraction of its final level.
    pub warm_reached_at: Option<usize>,
    pub cold_reached_at: Option<usize>,
    pub warm_final_mean: f64,
    pub cold_final_mean: f64,
}

pub fn warmstart_comparison(
    cfg: &NewcomerConfig,
    rolling_window: usize,
    fraction: f64,
) -> Result<WarmstartComparison> {
    if cfg.shock.is_some() {
        return Err(Error::Config("warm-start comparisons run without shocks".into()));
    }
    // Warm arm: observation phase plus online training.
    let warm = incumbent_newcomer(cfg)?;
    let online_start = warm.record.phase_start("online").unwrap_or(0);
    let warm_series: Vec<f64> = profit_series(&warm.env, &warm.record, NEWCOMER)
        .split_off(online_start);

    // Cold arm: same seed and hyperparameters, no observation, single buffer.
    let mut cold_cfg = newcomer_experiment(cfg, false)?;
    cold_cfg.horizon = cfg.online_periods;
    let cold_out = crate::harness::runner::run_experiment(&cold_cfg)?;
    let cold_series = profit_series(&cold_out.env, &cold_out.records[0], NEWCOMER);

    let final_mean = |series: &[f64]| {
        let w = rolling_window.min(series.len()).max(1);
        series[series.len() - w..].iter().sum::<f64>() / w as f64
    };
    Ok(WarmstartComparison {
        warm_reached_at: periods_to_fraction_of_final(&warm_series, rolling_window, fraction),
        cold_reached_at: periods_to_fraction_of_final(&cold_series, rolling_window, fraction),
        warm_final_mean: final_mean(&warm_series),
        cold_final_mean: final_mean(&cold_series),
    })
}

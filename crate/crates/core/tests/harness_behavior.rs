//! Runner-level behavior: determinism, convergence detection, warm-up,
//! interventions and snapshot resume.

use pricegame_core::agents::tabular::QTable;
use pricegame_core::agents::AgentHyperparams;
use pricegame_core::agents::RewardSpec;
use pricegame_core::harness::{
    run_experiment, AgentSpec, ConvergenceRule, EnvSpec, ExperimentConfig, Forced, GameEnv,
    Intervention, MarketEnvSpec, MatrixEnvSpec, QInitSpec, TabularAgentSpec,
};
use pricegame_core::market::MarketParams;
use pricegame_core::matrix::PayoffMatrix;
use pricegame_core::snapshot::{qtable_from_str, qtable_to_string, AgentSnapshot};

fn market_spec() -> MarketEnvSpec {
    MarketEnvSpec {
        params: MarketParams::symmetric(2, 0.25, 0.0, 2.0, 1.0).unwrap(),
        grid_size: 15,
        grid_extension: 0.1,
        grid_anchors: None,
    }
}

fn tabular_spec(beta: f64) -> AgentSpec {
    AgentSpec::Tabular(TabularAgentSpec {
        hp: AgentHyperparams {
            beta,
            ..AgentHyperparams::default()
        },
        reward: RewardSpec::selfish(),
        q_init: QInitSpec::RewardScaled,
    })
}

fn pricing_config(horizon: usize, replicas: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::Market(market_spec()),
        agents: vec![tabular_spec(1e-4), tabular_spec(1e-4)],
        horizon,
        n_monte_carlo: replicas,
        convergence: ConvergenceRule {
            stability_count: 2000,
            window: 1000,
        },
        interventions: Vec::new(),
        seed,
        stop_on_convergence: true,
        initial_memory: None,
    }
}

fn actions_of(record: &pricegame_core::harness::RunRecord) -> Vec<Vec<usize>> {
    (0..record.periods).map(|t| record.joint(t)).collect()
}

#[test]
fn identical_seeds_reproduce_identical_records() {
    let cfg = pricing_config(5_000, 3, 77);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.periods, rb.periods);
        assert_eq!(ra.convergence_period, rb.convergence_period);
        assert_eq!(actions_of(ra), actions_of(rb));
    }
}

#[test]
fn different_seeds_and_replicas_decorrelate() {
    let cfg = pricing_config(3_000, 2, 78);
    let out = run_experiment(&cfg).unwrap();
    assert_ne!(
        actions_of(&out.records[0]),
        actions_of(&out.records[1]),
        "replicas share a generator"
    );
    let mut other = cfg.clone();
    other.seed = 79;
    let out2 = run_experiment(&other).unwrap();
    assert_ne!(actions_of(&out.records[0]), actions_of(&out2.records[0]));
}

#[test]
fn zero_horizon_yields_empty_trajectories() {
    let cfg = pricing_config(0, 2, 80);
    let out = run_experiment(&cfg).unwrap();
    for record in &out.records {
        assert_eq!(record.periods, 0);
        assert_eq!(record.convergence_period, None);
    }
}

#[test]
fn constant_stub_agents_converge_at_exactly_the_stability_count() {
    let mut cfg = pricing_config(10_000, 1, 81);
    cfg.agents = vec![AgentSpec::Fixed { action: 3 }, AgentSpec::Fixed { action: 9 }];
    cfg.convergence.stability_count = 123;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records[0].convergence_period, Some(123));
    assert_eq!(out.records[0].periods, 123);
}

#[test]
fn alternating_stub_agents_never_converge() {
    let mut cfg = pricing_config(2_000, 1, 82);
    cfg.agents = vec![
        AgentSpec::Cycle { actions: vec![0, 14] },
        AgentSpec::Fixed { action: 7 },
    ];
    cfg.convergence.stability_count = 100;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records[0].convergence_period, None);
    assert_eq!(out.records[0].periods, 2_000);
}

#[test]
fn forced_windows_override_and_release() {
    let mut cfg = pricing_config(20, 1, 83);
    cfg.agents = vec![AgentSpec::Fixed { action: 5 }, AgentSpec::Fixed { action: 6 }];
    cfg.stop_on_convergence = false;
    cfg.interventions = vec![Intervention {
        agent: 0,
        start: 4,
        duration: Some(3),
        force: Forced::Action(1),
    }];
    let out = run_experiment(&cfg).unwrap();
    let record = &out.records[0];
    for t in 0..20 {
        let expected0 = if (4..7).contains(&t) { 1 } else { 5 };
        assert_eq!(record.action(t, 0), expected0, "period {t}");
        assert_eq!(record.action(t, 1), 6, "period {t}");
    }
}

#[test]
fn permanent_override_extends_to_the_end() {
    let mut cfg = pricing_config(15, 1, 84);
    cfg.agents = vec![AgentSpec::Fixed { action: 5 }, AgentSpec::Fixed { action: 6 }];
    cfg.stop_on_convergence = false;
    cfg.interventions = vec![Intervention {
        agent: 1,
        start: 10,
        duration: None,
        force: Forced::Action(0),
    }];
    let out = run_experiment(&cfg).unwrap();
    let record = &out.records[0];
    for t in 10..15 {
        assert_eq!(record.action(t, 1), 0);
    }
    assert_eq!(record.action(9, 1), 6);
}

#[test]
fn dqn_on_a_matrix_game_is_rejected_before_running() {
    let cfg = ExperimentConfig {
        env: EnvSpec::Matrix(MatrixEnvSpec {
            payoffs: PayoffMatrix::standard(),
        }),
        agents: vec![
            AgentSpec::Dqn(pricegame_core::harness::DqnAgentSpec {
                hp: pricegame_core::agents::dqn::DqnHyperparams::default(),
                reward: RewardSpec::selfish(),
                dual: None,
                baseline: None,
            }),
            AgentSpec::Fixed { action: 0 },
        ],
        horizon: 10,
        n_monte_carlo: 1,
        convergence: ConvergenceRule::dqn_default(),
        interventions: Vec::new(),
        seed: 1,
        stop_on_convergence: false,
        initial_memory: None,
    };
    assert!(matches!(
        run_experiment(&cfg),
        Err(pricegame_core::Error::Config(_))
    ));
}

#[test]
fn agent_count_mismatch_is_rejected() {
    let mut cfg = pricing_config(10, 1, 85);
    cfg.agents.push(AgentSpec::Fixed { action: 0 });
    assert!(matches!(
        run_experiment(&cfg),
        Err(pricegame_core::Error::Config(_))
    ));
}

#[test]
fn warmup_periods_are_recorded_even_without_learning() {
    let mut cfg = pricing_config(2, 1, 86);
    // Memory 3 but only 2 periods: the whole run is warm-up.
    cfg.agents = vec![
        AgentSpec::Tabular(TabularAgentSpec {
            hp: AgentHyperparams {
                memory_len: 2,
                beta: 1e-4,
                ..AgentHyperparams::default()
            },
            reward: RewardSpec::selfish(),
            q_init: QInitSpec::RewardScaled,
        }),
        tabular_spec(1e-4),
    ];
    cfg.horizon = 2;
    cfg.stop_on_convergence = false;
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records[0].periods, 2);
}

/// A converged duopoly continues identically when its tables pass through
/// the text snapshot format.
#[test]
fn converged_tables_resume_identically_after_snapshot_round_trip() {
    let cfg = pricing_config(300_000, 1, 87);
    let out = run_experiment(&cfg).unwrap();
    let record = &out.records[0];
    assert!(
        record.convergence_period.is_some(),
        "training run never converged"
    );
    let tables: Vec<QTable> = record
        .final_policies
        .iter()
        .map(|p| match p {
            Some(AgentSnapshot::Table(t)) => t.clone(),
            _ => panic!("missing table snapshot"),
        })
        .collect();

    let last_joint = record.joint(record.periods - 1);
    let continue_with = |tables: &[QTable]| -> Vec<Vec<usize>> {
        let cfg = ExperimentConfig {
            env: EnvSpec::Market(market_spec()),
            agents: tables
                .iter()
                .map(|t| AgentSpec::Frozen {
                    table: t.clone(),
                    memory_len: 1,
                })
                .collect(),
            horizon: 50,
            n_monte_carlo: 1,
            convergence: ConvergenceRule::tabular_default(),
            interventions: Vec::new(),
            seed: 999,
            stop_on_convergence: false,
            initial_memory: Some(vec![last_joint.clone()]),
        };
        let out = run_experiment(&cfg).unwrap();
        actions_of(&out.records[0])
    };

    let direct = continue_with(&tables);
    let reloaded: Vec<QTable> = tables
        .iter()
        .map(|t| qtable_from_str(&qtable_to_string(t)).unwrap())
        .collect();
    let resumed = continue_with(&reloaded);
    assert_eq!(direct, resumed);
}

#[test]
fn initial_memory_replaces_warmup() {
    let mut cfg = pricing_config(5, 1, 88);
    cfg.agents = vec![AgentSpec::Fixed { action: 2 }, AgentSpec::Fixed { action: 3 }];
    cfg.stop_on_convergence = false;
    cfg.initial_memory = Some(vec![vec![7, 8]]);
    let out = run_experiment(&cfg).unwrap();
    // With pre-seeded memory the stubs act from period 0.
    assert_eq!(out.records[0].joint(0), vec![2, 3]);
}

#[test]
fn reward_shaping_is_visible_in_output_helpers() {
    let mut cfg = pricing_config(5, 1, 89);
    cfg.agents = vec![
        AgentSpec::Tabular(TabularAgentSpec {
            hp: AgentHyperparams::default(),
            reward: RewardSpec::new(1.0).unwrap(),
            q_init: QInitSpec::RewardScaled,
        }),
        tabular_spec(1e-5),
    ];
    cfg.stop_on_convergence = false;
    let out = run_experiment(&cfg).unwrap();
    let record = &out.records[0];
    let raw = record.rewards_at(&out.env, 0);
    let shaped = out.shaped_rewards_at(record, 0);
    assert!((shaped[0] - (raw[0] + raw[1])).abs() < 1e-12);
    assert_eq!(shaped[1], raw[1]);
}

#[test]
fn grid_anchors_override_the_solver() {
    let spec = MarketEnvSpec {
        grid_anchors: Some((1.4, 2.0)),
        ..market_spec()
    };
    let env = EnvSpec::Market(spec).build().unwrap();
    match env {
        GameEnv::Market(g) => {
            assert!((g.grid().p_nash - 1.4).abs() < 1e-12);
            assert!((g.grid().p_monopoly - 2.0).abs() < 1e-12);
        }
        _ => panic!("expected a market"),
    }
}

//! Implementations behind the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use pricegame_core::agents::dqn::DqnHyperparams;
use pricegame_core::agents::replay::DualBufferConfig;
use pricegame_core::agents::{AgentHyperparams, RewardSpec};
use pricegame_core::harness::metrics::median;
use pricegame_core::harness::{
    incumbent_newcomer, response_scenario, run_experiment, sweep_exploration, train_incumbent,
    ConvergenceRule, EnvSpec, ExperimentOutput, Forced, GameEnv, IncumbentPolicy, Intervention,
    MarketEnvSpec, NewcomerConfig, NewcomerOutput, NewcomerShock, ResponseConfig, RunRecord,
    TrainedIncumbent, NEWCOMER,
};
use pricegame_core::market::{
    equilibrium_profits, monopoly_price, nash_price, MarketParams, PriceGrid,
};
use pricegame_core::snapshot::{self, AgentSnapshot};
use pricegame_core::{seed as seeding, Error};

use crate::config::{
    AgentSection, ConfigFile, ConvergenceSection, DualSection, EnvironmentSection,
    InterventionSection, OutputSection, SCHEMA_VERSION,
};
use crate::plot::{self, Band, RefLine};
use crate::results::{self, fmt_g9, Row};
use crate::{Command, DualScenario, PlotKind, RespondPreset};

pub fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::SolveEq {
            agents,
            mu,
            a0,
            quality,
            mc,
            grid_size,
            xi,
        } => cmd_solve_eq(agents, mu, a0, quality, mc, grid_size, xi),
        Command::Run {
            config,
            out,
            seed,
            replicas,
            dry_run,
        } => cmd_run(&config, &out, seed, replicas, dry_run),
        Command::Plot {
            csv,
            kind,
            out,
            config,
        } => cmd_plot(&csv, kind, &out, config.as_deref()),
        Command::Sweep {
            config,
            out,
            betas,
            seed,
            replicas,
        } => cmd_sweep(&config, &out, &betas, seed, replicas),
        Command::Respond {
            preset,
            out,
            seed,
            replicas,
            hold,
        } => cmd_respond(preset, &out, seed, replicas, hold),
        Command::DualBuffer {
            scenario,
            out,
            seed,
            incumbent,
            observe,
            online,
        } => cmd_dual_buffer(scenario, &out, seed, incumbent.as_deref(), observe, online),
    }
}

fn cmd_solve_eq(
    agents: usize,
    mu: f64,
    a0: f64,
    quality: f64,
    mc: f64,
    grid_size: usize,
    xi: f64,
) -> Result<(), Error> {
    let params = MarketParams::symmetric(agents, mu, a0, quality, mc)?;
    let p_nash = nash_price(&params)?;
    let p_monopoly = monopoly_price(&params)?;
    let grid = PriceGrid::build(p_nash, p_monopoly, xi, grid_size)?;
    let (pi_nash, pi_monopoly) = equilibrium_profits(&params)?;
    println!("p_nash {}", fmt_g9(p_nash));
    println!("p_monopoly {}", fmt_g9(p_monopoly));
    println!("pi_nash {}", fmt_g9(pi_nash));
    println!("pi_monopoly {}", fmt_g9(pi_monopoly));
    let points: Vec<String> = grid.points().iter().map(|p| fmt_g9(*p)).collect();
    println!("grid {}", points.join(" "));
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", out.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Write the standard run artifacts for an experiment output.
fn write_run_artifacts(
    out_dir: &Path,
    effective: &ConfigFile,
    output: &ExperimentOutput,
) -> Result<(), Error> {
    ensure_out_dir(out_dir)?;
    let rows = results::rows(output, effective.csv_every());
    write_file(&out_dir.join("results.csv"), &results::write_csv(&rows))?;

    let convergence = output
        .records
        .iter()
        .map(|r| r.convergence_period)
        .collect();
    let summary = results::summarize(
        &rows,
        effective.convergence_rule().window,
        convergence,
        results::benchmarks_of(&output.env),
    )?;
    write_file(&out_dir.join("summary.txt"), &summary.render())?;
    write_file(&out_dir.join("effective_config.toml"), &effective.emit())?;
    Ok(())
}

fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    replicas: Option<usize>,
    dry_run: bool,
) -> Result<(), Error> {
    let mut cfg = ConfigFile::load(config_path)?.effective();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(replicas) = replicas {
        cfg.replicas = replicas;
    }
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let experiment = cfg.to_experiment(base_dir)?;
    // Validate the full configuration before any run starts.
    let env = experiment.env.build()?;
    experiment.validate(&env)?;

    if dry_run {
        print!("{}", cfg.emit());
        return Ok(());
    }
    let output = run_experiment(&experiment)?;
    write_run_artifacts(out_dir, &cfg, &output)?;
    println!(
        "wrote {} replicas x {} agents to {}",
        output.records.len(),
        env.n_agents(),
        out_dir.display()
    );
    Ok(())
}

/// Benchmark reference lines appropriate for a chart kind.
fn reference_lines(cfg: &ConfigFile, prices: bool) -> Vec<RefLine> {
    match &cfg.environment {
        EnvironmentSection::Market { .. } => {
            let Ok(exp) = cfg.to_experiment(Path::new(".")) else {
                return Vec::new();
            };
            let EnvSpec::Market(market) = &exp.env else {
                return Vec::new();
            };
            let (Ok(p_n), Ok(p_m)) = (nash_price(&market.params), monopoly_price(&market.params))
            else {
                return Vec::new();
            };
            if prices {
                vec![
                    RefLine {
                        label: "competitive price".into(),
                        value: p_n,
                    },
                    RefLine {
                        label: "collusive price".into(),
                        value: p_m,
                    },
                ]
            } else {
                match equilibrium_profits(&market.params) {
                    Ok((pi_n, pi_m)) => vec![
                        RefLine {
                            label: "competitive profit".into(),
                            value: pi_n,
                        },
                        RefLine {
                            label: "collusive profit".into(),
                            value: pi_m,
                        },
                    ],
                    Err(_) => Vec::new(),
                }
            }
        }
        EnvironmentSection::Matrix {
            cooperation,
            defection,
            ..
        } => {
            if prices {
                Vec::new()
            } else {
                vec![
                    RefLine {
                        label: "mutual defection".into(),
                        value: *defection,
                    },
                    RefLine {
                        label: "mutual cooperation".into(),
                        value: *cooperation,
                    },
                ]
            }
        }
    }
}

fn forced_band(cfg: &ConfigFile) -> Option<Band> {
    let first = cfg.interventions.iter().min_by_key(|iv| iv.start)?;
    let end = first
        .duration
        .map(|d| (first.start + d) as f64)
        .unwrap_or(cfg.horizon as f64);
    Some(Band {
        start: first.start as f64,
        end,
    })
}

fn cmd_plot(
    csv: &Path,
    kind: PlotKind,
    out: &Path,
    config: Option<&Path>,
) -> Result<(), Error> {
    let config_path: PathBuf = match config {
        Some(p) => p.to_path_buf(),
        None => csv
            .parent()
            .unwrap_or(Path::new("."))
            .join("effective_config.toml"),
    };
    let cfg = ConfigFile::load(&config_path)?;

    let svg = match kind {
        PlotKind::SweepBars => {
            let text = fs::read_to_string(csv)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", csv.display())))?;
            let rows = plot::parse_sweep_csv(&text)?;
            plot::sweep_bars(&rows, &reference_lines(&cfg, false), "post-convergence profit by exploration decay")?
        }
        PlotKind::RewardTrajectory => {
            let rows = results::load_csv(csv)?;
            plot::reward_trajectory(&rows, &reference_lines(&cfg, false), "mean reward per period")?
        }
        PlotKind::PriceResponse => {
            let rows = results::load_csv(csv)?;
            plot::price_response(
                &rows,
                forced_band(&cfg),
                &reference_lines(&cfg, true),
                "price response around the forced window",
            )?
        }
        PlotKind::DualBufferTimeline => {
            let rows = results::load_csv(csv)?;
            plot::dual_buffer_timeline(
                &rows,
                forced_band(&cfg),
                &reference_lines(&cfg, true),
                "prices and online-sampling probability",
            )?
        }
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    write_file(out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_sweep(
    config_path: &Path,
    out_dir: &Path,
    betas: &[f64],
    seed: Option<u64>,
    replicas: Option<usize>,
) -> Result<(), Error> {
    let mut cfg = ConfigFile::load(config_path)?.effective();
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(replicas) = replicas {
        cfg.replicas = replicas;
    }
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let experiment = cfg.to_experiment(base_dir)?;
    let sweep = sweep_exploration(&experiment, betas)?;

    ensure_out_dir(out_dir)?;
    let mut csv = String::from(plot::SWEEP_HEADER);
    csv.push('\n');
    for entry in &sweep.entries {
        for (agent, profit) in entry.median_profits.iter().enumerate() {
            let delta = (profit - sweep.pi_nash) / (sweep.pi_monopoly - sweep.pi_nash);
            csv.push_str(&format!(
                "{},{agent},{},{}\n",
                fmt_g9(entry.beta2),
                fmt_g9(*profit),
                fmt_g9(delta)
            ));
        }
    }
    write_file(&out_dir.join("sweep.csv"), &csv)?;
    write_file(&out_dir.join("effective_config.toml"), &cfg.emit())?;
    println!(
        "swept {} decay settings x {} replicas into {}",
        sweep.entries.len(),
        cfg.replicas,
        out_dir.display()
    );
    Ok(())
}

/// Default market section shared by the presets.
fn preset_market() -> MarketEnvSpec {
    MarketEnvSpec {
        params: MarketParams::symmetric(2, 0.25, 0.0, 2.0, 1.0).expect("reference parameters"),
        grid_size: 15,
        grid_extension: 0.1,
        grid_anchors: None,
    }
}

fn preset_market_section() -> EnvironmentSection {
    EnvironmentSection::Market {
        agents: 2,
        mu: 0.25,
        a0: 0.0,
        quality: Some(vec![2.0, 2.0]),
        marginal_cost: Some(vec![1.0, 1.0]),
        grid_size: 15,
        grid_extension: 0.1,
        grid_anchors: None,
    }
}

/// Effective-config echo for scenario outputs: describes the recorded
/// window (environment, agents, record-relative interventions), so plots
/// can recover benchmarks and shaded bands.
#[allow(clippy::too_many_arguments)]
fn scenario_config_echo(
    environment: EnvironmentSection,
    agents: Vec<AgentSection>,
    horizon: usize,
    replicas: usize,
    seed: u64,
    convergence: ConvergenceRule,
    interventions: Vec<InterventionSection>,
) -> ConfigFile {
    ConfigFile {
        schema_version: SCHEMA_VERSION,
        seed,
        horizon,
        replicas,
        stop_on_convergence: false,
        environment,
        convergence: Some(ConvergenceSection {
            stability_count: convergence.stability_count,
            window: convergence.window,
        }),
        agents,
        interventions,
        output: Some(OutputSection::default()),
    }
}

/// Convert scenario records into an `ExperimentOutput`-like CSV by reusing
/// the run artifact writer.
fn write_scenario_artifacts(
    out_dir: &Path,
    echo: &ConfigFile,
    env: GameEnv,
    reward_specs: Vec<RewardSpec>,
    records: Vec<RunRecord>,
) -> Result<(), Error> {
    let output = ExperimentOutput {
        env,
        reward_specs,
        records,
    };
    write_run_artifacts(out_dir, echo, &output)
}

fn tabular_section(beta: f64) -> AgentSection {
    AgentSection::Tabular {
        alpha: 0.125,
        gamma: 0.95,
        beta,
        q_init_low: 0.0,
        q_init_high: 1.0,
        memory: 1,
        opponent_weight: 0.0,
        q_init: Some(crate::config::QInitSection::RewardScaled),
    }
}

fn cmd_respond(
    preset: RespondPreset,
    out_dir: &Path,
    seed: u64,
    replicas: usize,
    hold: usize,
) -> Result<(), Error> {
    let market = preset_market();
    let p_nash = nash_price(&market.params)?;
    let grid = PriceGrid::from_params(&market.params, market.grid_extension, market.grid_size)?;
    // Slower exploration decay makes off-path responses better trained.
    let beta = 5e-6;
    let hp = AgentHyperparams {
        beta,
        ..AgentHyperparams::default()
    };
    let base = pricegame_core::harness::ExperimentConfig {
        env: EnvSpec::Market(market),
        agents: vec![
            pricegame_core::harness::AgentSpec::Tabular(pricegame_core::harness::TabularAgentSpec {
                hp: hp.clone(),
                reward: RewardSpec::selfish(),
                q_init: pricegame_core::harness::QInitSpec::RewardScaled,
            }),
            pricegame_core::harness::AgentSpec::Tabular(pricegame_core::harness::TabularAgentSpec {
                hp,
                reward: RewardSpec::selfish(),
                q_init: pricegame_core::harness::QInitSpec::RewardScaled,
            }),
        ],
        horizon: 4_000_000,
        n_monte_carlo: replicas,
        convergence: ConvergenceRule::tabular_default(),
        interventions: Vec::new(),
        seed,
        stop_on_convergence: true,
        initial_memory: None,
    };

    let pre_window = 20;
    let post_window = 100;
    let cut_action = grid.nearest_index(p_nash);
    let top_action = grid.len() - 1;
    let above_nash = grid
        .first_index_above(p_nash)
        .ok_or_else(|| Error::Config("no grid point above the competitive price".into()))?;

    let shock = match preset {
        RespondPreset::Cut => vec![Intervention {
            agent: 0,
            start: 0,
            duration: Some(1),
            force: Forced::Action(cut_action),
        }],
        RespondPreset::Raise => vec![Intervention {
            agent: 0,
            start: 0,
            duration: Some(1),
            force: Forced::Action(top_action),
        }],
        RespondPreset::RaiseHold => vec![
            Intervention {
                agent: 0,
                start: 0,
                duration: Some(1),
                force: Forced::Action(top_action),
            },
            Intervention {
                agent: 1,
                start: 0,
                duration: Some(hold.max(1)),
                force: Forced::Hold,
            },
        ],
        RespondPreset::Permanent => vec![Intervention {
            agent: 0,
            start: 0,
            duration: None,
            force: Forced::Action(above_nash),
        }],
    };

    let cfg = ResponseConfig {
        base,
        shock: shock.clone(),
        pre_window,
        post_window,
    };
    let out = response_scenario(&cfg)?;

    let interventions = shock
        .iter()
        .map(|iv| InterventionSection {
            agent: iv.agent,
            start: pre_window + iv.start,
            duration: iv.duration,
            action: match &iv.force {
                Forced::Action(a) => Some(*a),
                _ => None,
            },
            price: None,
            hold: matches!(iv.force, Forced::Hold),
        })
        .collect();
    let echo = scenario_config_echo(
        preset_market_section(),
        vec![tabular_section(5e-6), tabular_section(5e-6)],
        pre_window + post_window,
        replicas,
        seed,
        ConvergenceRule::tabular_default(),
        interventions,
    );
    let converged = out.training_convergence.clone();
    write_scenario_artifacts(
        out_dir,
        &echo,
        out.env,
        vec![RewardSpec::selfish(); 2],
        out.records,
    )?;
    println!(
        "response preset finished; {}/{} training runs converged; artifacts in {}",
        converged.iter().filter(|c| c.is_some()).count(),
        converged.len(),
        out_dir.display()
    );
    Ok(())
}

/// Scenario hyperparameters for the dual-buffer newcomer.
fn newcomer_hp() -> DqnHyperparams {
    DqnHyperparams {
        beta: 5e-3,
        target_sync_every: 100,
        updates_per_period: 8,
        ..DqnHyperparams::default()
    }
}

fn load_or_train_incumbent(
    path: Option<&Path>,
    market: &MarketEnvSpec,
    seed: u64,
) -> Result<TrainedIncumbent, Error> {
    match path {
        Some(p) => {
            let table = snapshot::load_qtable(p)?;
            // Recover the equilibrium play by running the frozen duopoly
            // greedily from its own most-visited fixed point: play the table
            // against itself for a handful of periods from the grid middle.
            let cfg = pricegame_core::harness::ExperimentConfig {
                env: EnvSpec::Market(market.clone()),
                agents: vec![
                    pricegame_core::harness::AgentSpec::Frozen {
                        table: table.clone(),
                        memory_len: 1,
                    },
                    pricegame_core::harness::AgentSpec::Frozen {
                        table: table.clone(),
                        memory_len: 1,
                    },
                ],
                horizon: 64,
                n_monte_carlo: 1,
                convergence: ConvergenceRule::dqn_default(),
                interventions: Vec::new(),
                seed,
                stop_on_convergence: false,
                initial_memory: Some(vec![vec![market.grid_size / 2; 2]]),
            };
            let out = run_experiment(&cfg)?;
            let record = &out.records[0];
            Ok(TrainedIncumbent {
                table,
                memory_len: 1,
                equilibrium_joint: record.joint(record.periods - 1),
                convergence: None,
            })
        }
        None => {
            log::info!("no incumbent snapshot supplied; training one");
            train_incumbent(
                market,
                &AgentHyperparams::default(),
                2_000_000,
                ConvergenceRule::tabular_default(),
                seeding::split(seed, 7777),
            )
        }
    }
}

fn cmd_dual_buffer(
    scenario: DualScenario,
    out_dir: &Path,
    seed: u64,
    incumbent_path: Option<&Path>,
    observe: usize,
    online: usize,
) -> Result<(), Error> {
    let market = preset_market();
    let p_nash = nash_price(&market.params)?;
    let grid = PriceGrid::from_params(&market.params, market.grid_extension, market.grid_size)?;
    let above_nash = grid
        .first_index_above(p_nash)
        .ok_or_else(|| Error::Config("no grid point above the competitive price".into()))?;

    let incumbent = load_or_train_incumbent(incumbent_path, &market, seed)?;
    let reward = match scenario {
        DualScenario::Collusive => RewardSpec::new(1.0)?,
        _ => RewardSpec::selfish(),
    };
    let shock = match scenario {
        DualScenario::Nonstationary => Some(NewcomerShock {
            start: online * 3 / 4,
            duration: Some((online / 8).max(1)),
            force: Forced::Action(above_nash),
        }),
        _ => None,
    };
    let cfg = NewcomerConfig {
        market: market.clone(),
        incumbent: incumbent.table.clone(),
        incumbent_memory_len: incumbent.memory_len,
        incumbent_policy: IncumbentPolicy::Scripted,
        incumbent_action: incumbent.equilibrium_joint[0],
        replay: vec![incumbent.equilibrium_joint[1]],
        initial_memory: vec![incumbent.equilibrium_joint.clone(); 10],
        newcomer_hp: newcomer_hp(),
        dual: DualBufferConfig::default(),
        reward,
        observe_periods: observe,
        online_periods: online,
        shock: shock.clone(),
        seed,
    };
    let out: NewcomerOutput = incumbent_newcomer(&cfg)?;

    ensure_out_dir(out_dir)?;
    snapshot::save(
        &out_dir.join("incumbent.snapshot"),
        &AgentSnapshot::Table(incumbent.table.clone()),
    )?;

    let interventions = shock
        .map(|s| {
            vec![InterventionSection {
                agent: 0,
                start: observe + s.start,
                duration: s.duration,
                action: Some(above_nash),
                price: None,
                hold: false,
            }]
        })
        .unwrap_or_default();
    let echo = scenario_config_echo(
        preset_market_section(),
        vec![
            AgentSection::Fixed {
                action: incumbent.equilibrium_joint[0],
            },
            AgentSection::Dqn {
                hidden: vec![64, 64],
                learning_rate: 1e-3,
                gamma: 0.95,
                beta: 5e-3,
                memory: 10,
                batch_size: 32,
                target_sync_every: 100,
                replay_capacity: 10_000,
                updates_per_period: 8,
                opponent_weight: reward.opponent_weight,
                dual: Some(DualSection::default()),
                baseline: None,
            },
        ],
        observe + online,
        1,
        seed,
        ConvergenceRule::dqn_default(),
        interventions,
    );
    let baseline = out.baseline;
    write_scenario_artifacts(out_dir, &echo, out.env, out.reward_specs, vec![out.record])?;
    println!(
        "dual-buffer scenario finished; observation baseline {}; artifacts in {}",
        fmt_g9(baseline),
        out_dir.display()
    );
    Ok(())
}

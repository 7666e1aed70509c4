//! Scripted action overrides: forced prices or actions for chosen agents
//! over chosen period ranges, with an optional permanent tail.

use crate::error::{Error, Result};
use crate::harness::config::GameEnv;

/// What to force on the targeted agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Forced {
    /// A grid/action index.
    Action(usize),
    /// A price, resolved to the nearest grid point (market games only).
    Price(f64),
    /// Keep repeating the previous period's effective action.
    Hold,
    /// Cycle through a fixed action sequence, starting at the window start.
    Script(Vec<usize>),
}

/// A force resolved for one (agent, period).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedForce {
    Action(usize),
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    pub agent: usize,
    /// First period the override applies to.
    pub start: usize,
    /// Number of forced periods; `None` extends to the end of the run.
    pub duration: Option<usize>,
    pub force: Forced,
}

impl Intervention {
    fn end(&self, horizon: usize) -> usize {
        match self.duration {
            Some(d) => self.start.saturating_add(d),
            None => horizon,
        }
    }
}

/// A validated, grid-resolved override schedule.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    items: Vec<Intervention>,
}

impl Schedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validate ranges and resolve price forcings against the environment.
    pub fn resolve(interventions: &[Intervention], env: &GameEnv, horizon: usize) -> Result<Self> {
        let n_agents = env.n_agents();
        let n_actions = env.n_actions();
        let mut items = Vec::with_capacity(interventions.len());
        for iv in interventions {
            if iv.agent >= n_agents {
                return Err(Error::Config(format!(
                    "intervention targets agent {}, only {n_agents} agents exist",
                    iv.agent
                )));
            }
            if iv.start >= horizon {
                return Err(Error::Config(format!(
                    "intervention starts at period {} beyond horizon {horizon}",
                    iv.start
                )));
            }
            if let Some(d) = iv.duration {
                if d == 0 {
                    return Err(Error::Config("intervention duration must be positive".into()));
                }
                if iv.start + d > horizon {
                    return Err(Error::Config(format!(
                        "intervention [{}, {}) exceeds horizon {horizon}",
                        iv.start,
                        iv.start + d
                    )));
                }
            }
            let force = match &iv.force {
                Forced::Action(a) => {
                    if *a >= n_actions {
                        return Err(Error::Config(format!(
                            "forced action {a} out of range (n_actions = {n_actions})"
                        )));
                    }
                    Forced::Action(*a)
                }
                Forced::Price(p) => match env.grid() {
                    Some(grid) => Forced::Action(grid.nearest_index(*p)),
                    None => {
                        return Err(Error::Config(
                            "price overrides require a market environment".into(),
                        ))
                    }
                },
                Forced::Hold => Forced::Hold,
                Forced::Script(actions) => {
                    if actions.is_empty() {
                        return Err(Error::Config("forced script is empty".into()));
                    }
                    if let Some(a) = actions.iter().find(|a| **a >= n_actions) {
                        return Err(Error::Config(format!(
                            "scripted action {a} out of range (n_actions = {n_actions})"
                        )));
                    }
                    Forced::Script(actions.clone())
                }
            };
            items.push(Intervention { force, ..iv.clone() });
        }

        // Overlapping overrides for one agent are ambiguous.
        for (i, a) in items.iter().enumerate() {
            for b in items.iter().skip(i + 1) {
                if a.agent == b.agent
                    && a.start < b.end(horizon)
                    && b.start < a.end(horizon)
                {
                    return Err(Error::Config(format!(
                        "overlapping interventions for agent {} around period {}",
                        a.agent,
                        a.start.max(b.start)
                    )));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The override applying to `agent` at `period`, if any.
    pub fn forced(&self, agent: usize, period: usize) -> Option<ResolvedForce> {
        self.items
            .iter()
            .find(|iv| {
                iv.agent == agent
                    && period >= iv.start
                    && iv.duration.map_or(true, |d| period < iv.start + d)
            })
            .map(|iv| match &iv.force {
                Forced::Action(a) => ResolvedForce::Action(*a),
                Forced::Script(actions) => {
                    ResolvedForce::Action(actions[(period - iv.start) % actions.len()])
                }
                Forced::Hold => ResolvedForce::Hold,
                Forced::Price(_) => unreachable!("prices are resolved at validation"),
            })
    }

    /// Replace proposed actions with forced ones for this period.
    /// `last_effective` feeds `Hold` overrides; a hold with no history keeps
    /// the proposal.
    pub fn apply(
        &self,
        period: usize,
        proposed: &[usize],
        last_effective: Option<&[usize]>,
    ) -> Vec<usize> {
        let mut effective = proposed.to_vec();
        for (agent, slot) in effective.iter_mut().enumerate() {
            match self.forced(agent, period) {
                Some(ResolvedForce::Action(a)) => *slot = a,
                Some(ResolvedForce::Hold) => {
                    if let Some(last) = last_effective {
                        *slot = last[agent];
                    }
                }
                None => {}
            }
        }
        effective
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EnvSpec, MarketEnvSpec, MatrixEnvSpec};
    use crate::market::MarketParams;
    use crate::matrix::PayoffMatrix;

    fn market_env() -> GameEnv {
        EnvSpec::Market(MarketEnvSpec {
            params: MarketParams::symmetric(2, 0.25, 0.0, 2.0, 1.0).unwrap(),
            grid_size: 15,
            grid_extension: 0.1,
            grid_anchors: None,
        })
        .build()
        .unwrap()
    }

    #[test]
    fn single_period_override_applies_once() {
        let env = market_env();
        let schedule = Schedule::resolve(
            &[Intervention {
                agent: 1,
                start: 0,
                duration: Some(1),
                force: Forced::Action(0),
            }],
            &env,
            100,
        )
        .unwrap();
        assert_eq!(schedule.apply(0, &[5, 5], None), vec![5, 0]);
        assert_eq!(schedule.apply(1, &[5, 5], None), vec![5, 5]);
    }

    #[test]
    fn permanent_override_extends_to_horizon() {
        let env = market_env();
        let schedule = Schedule::resolve(
            &[Intervention {
                agent: 0,
                start: 10,
                duration: None,
                force: Forced::Action(3),
            }],
            &env,
            50,
        )
        .unwrap();
        assert_eq!(schedule.apply(9, &[7, 7], None), vec![7, 7]);
        for t in [10, 25, 49] {
            assert_eq!(schedule.apply(t, &[7, 7], None), vec![3, 7]);
        }
    }

    #[test]
    fn empty_schedule_is_the_identity() {
        let schedule = Schedule::empty();
        assert_eq!(schedule.apply(3, &[1, 2], None), vec![1, 2]);
    }

    #[test]
    fn price_overrides_resolve_to_the_nearest_grid_point() {
        let env = market_env();
        let grid = env.grid().unwrap().clone();
        let schedule = Schedule::resolve(
            &[Intervention {
                agent: 0,
                start: 0,
                duration: Some(1),
                force: Forced::Price(grid.price(4) + 1e-6),
            }],
            &env,
            10,
        )
        .unwrap();
        assert_eq!(schedule.apply(0, &[9, 9], None), vec![4, 9]);
    }

    #[test]
    fn hold_repeats_the_previous_effective_action() {
        let env = market_env();
        let schedule = Schedule::resolve(
            &[Intervention {
                agent: 1,
                start: 5,
                duration: Some(2),
                force: Forced::Hold,
            }],
            &env,
            20,
        )
        .unwrap();
        assert_eq!(schedule.apply(5, &[2, 9], Some(&[4, 6])), vec![2, 6]);
        assert_eq!(schedule.apply(5, &[2, 9], None), vec![2, 9]);
    }

    #[test]
    fn scripts_cycle_from_the_window_start() {
        let env = market_env();
        let schedule = Schedule::resolve(
            &[Intervention {
                agent: 0,
                start: 2,
                duration: Some(5),
                force: Forced::Script(vec![10, 11, 12]),
            }],
            &env,
            20,
        )
        .unwrap();
        let picks: Vec<Vec<usize>> = (0..8).map(|t| schedule.apply(t, &[0, 0], None)).collect();
        assert_eq!(picks[1], vec![0, 0]);
        assert_eq!(picks[2], vec![10, 0]);
        assert_eq!(picks[3], vec![11, 0]);
        assert_eq!(picks[4], vec![12, 0]);
        assert_eq!(picks[5], vec![10, 0]);
        assert_eq!(picks[7], vec![0, 0]);
        // Empty or out-of-range scripts are rejected.
        assert!(Schedule::resolve(
            &[Intervention {
                agent: 0,
                start: 0,
                duration: None,
                force: Forced::Script(vec![]),
            }],
            &env,
            10,
        )
        .is_err());
    }

    #[test]
    fn overlapping_overrides_are_rejected() {
        let env = market_env();
        let overlapping = [
            Intervention {
                agent: 0,
                start: 0,
                duration: Some(5),
                force: Forced::Action(1),
            },
            Intervention {
                agent: 0,
                start: 4,
                duration: None,
                force: Forced::Action(2),
            },
        ];
        assert!(matches!(
            Schedule::resolve(&overlapping, &env, 100),
            Err(Error::Config(_))
        ));
        // Same ranges on different agents are fine.
        let disjoint_agents = [
            Intervention {
                agent: 0,
                start: 0,
                duration: Some(5),
                force: Forced::Action(1),
            },
            Intervention {
                agent: 1,
                start: 0,
                duration: Some(5),
                force: Forced::Action(2),
            },
        ];
        assert!(Schedule::resolve(&disjoint_agents, &env, 100).is_ok());
    }

    #[test]
    fn validation_rejects_bad_targets_and_ranges() {
        let env = market_env();
        let bad_agent = [Intervention {
            agent: 7,
            start: 0,
            duration: Some(1),
            force: Forced::Action(0),
        }];
        assert!(Schedule::resolve(&bad_agent, &env, 10).is_err());
        let beyond = [Intervention {
            agent: 0,
            start: 20,
            duration: Some(1),
            force: Forced::Action(0),
        }];
        assert!(Schedule::resolve(&beyond, &env, 10).is_err());
        let too_long = [Intervention {
            agent: 0,
            start: 5,
            duration: Some(10),
            force: Forced::Action(0),
        }];
        assert!(Schedule::resolve(&too_long, &env, 10).is_err());
        let bad_action = [Intervention {
            agent: 0,
            start: 0,
            duration: Some(1),
            force: Forced::Action(99),
        }];
        assert!(Schedule::resolve(&bad_action, &env, 10).is_err());
    }

    #[test]
    fn matrix_games_reject_price_overrides() {
        let env = EnvSpec::Matrix(MatrixEnvSpec {
            payoffs: PayoffMatrix::standard(),
        })
        .build()
        .unwrap();
        let price = [Intervention {
            agent: 0,
            start: 0,
            duration: Some(1),
            force: Forced::Price(1.5),
        }];
        assert!(matches!(Schedule::resolve(&price, &env, 10), Err(Error::Config(_))));
    }
}

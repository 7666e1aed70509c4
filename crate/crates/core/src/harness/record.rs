//! Per-replica run records.
//!
//! Records store the played joint actions plus the sampling-probability
//! traces of dual-buffer agents; prices, rewards and exploration rates are
//! recomputed on demand from the (deterministic) environment and schedules,
//! which keeps multi-million-period records small.

use crate::harness::config::GameEnv;
use crate::snapshot::AgentSnapshot;

/// How an agent's exploration rate is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsReport {
    /// Never explores (scripted or frozen agents).
    None,
    /// ε = exp(-β t) over the global period index.
    Global { beta: f64 },
    /// ε = exp(-β (t - start)), flat 1 before `start` (agents whose
    /// exploration clock starts mid-run).
    Offset { beta: f64, start: usize },
}

impl EpsReport {
    pub fn at(&self, t: usize) -> Option<f64> {
        match self {
            EpsReport::None => None,
            EpsReport::Global { beta } => Some((-beta * t as f64).exp()),
            EpsReport::Offset { beta, start } => {
                Some((-beta * t.saturating_sub(*start) as f64).exp())
            }
        }
    }
}

/// One replica's trajectory.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub replica: usize,
    /// Derived replica seed, for reproduction.
    pub seed: u64,
    pub n_agents: usize,
    /// Executed periods (may stop early on convergence).
    pub periods: usize,
    /// Joint actions, period-major.
    actions: Vec<u16>,
    /// Per agent: sampling-probability trace (NaN before the controller has
    /// produced a value); `None` for agents without dual buffers.
    p_online: Vec<Option<Vec<f64>>>,
    pub eps: Vec<EpsReport>,
    pub convergence_period: Option<usize>,
    pub final_policies: Vec<Option<AgentSnapshot>>,
    /// Named phase boundaries (scenario runs), as (label, first period).
    pub phase_marks: Vec<(String, usize)>,
}

impl RunRecord {
    pub fn action(&self, period: usize, agent: usize) -> usize {
        self.actions[period * self.n_agents + agent] as usize
    }

    pub fn joint(&self, period: usize) -> Vec<usize> {
        (0..self.n_agents).map(|i| self.action(period, i)).collect()
    }

    pub fn p_online_at(&self, period: usize, agent: usize) -> Option<f64> {
        self.p_online[agent]
            .as_ref()
            .map(|trace| trace[period])
            .filter(|p| p.is_finite())
    }

    pub fn epsilon_at(&self, period: usize, agent: usize) -> Option<f64> {
        self.eps[agent].at(period)
    }

    pub fn phase_start(&self, label: &str) -> Option<usize> {
        self.phase_marks
            .iter()
            .find(|(name, _)| name == label)
            .map(|(_, start)| *start)
    }

    /// Raw per-agent environment rewards for one period.
    pub fn rewards_at(&self, env: &GameEnv, period: usize) -> Vec<f64> {
        env.game().rewards(&self.joint(period))
    }

    /// Posted price of one agent (market games).
    pub fn price_at(&self, env: &GameEnv, period: usize, agent: usize) -> Option<f64> {
        env.game().action_value(self.action(period, agent))
    }
}

/// Incremental construction during a run.
pub struct RecordBuilder {
    record: RunRecord,
}

impl RecordBuilder {
    pub fn new(replica: usize, seed: u64, n_agents: usize, dual: &[bool], eps: Vec<EpsReport>) -> Self {
        Self {
            record: RunRecord {
                replica,
                seed,
                n_agents,
                periods: 0,
                actions: Vec::new(),
                p_online: dual
                    .iter()
                    .map(|is_dual| if *is_dual { Some(Vec::new()) } else { None })
                    .collect(),
                eps,
                convergence_period: None,
                final_policies: Vec::new(),
                phase_marks: Vec::new(),
            },
        }
    }

    pub fn mark_phase(&mut self, label: &str) {
        let at = self.record.periods;
        self.record.phase_marks.push((label.to_string(), at));
    }

    /// Mark a phase at a known future period.
    pub fn mark_phase_at(&mut self, label: &str, period: usize) {
        self.record.phase_marks.push((label.to_string(), period));
    }

    pub fn push_period(&mut self, effective: &[usize], p_online: &[Option<f64>]) {
        for a in effective {
            self.record.actions.push(*a as u16);
        }
        for (trace, p) in self.record.p_online.iter_mut().zip(p_online) {
            if let Some(trace) = trace {
                trace.push(p.unwrap_or(f64::NAN));
            }
        }
        self.record.periods += 1;
    }

    pub fn set_convergence(&mut self, period: usize) {
        if self.record.convergence_period.is_none() {
            self.record.convergence_period = Some(period);
        }
    }

    pub fn converged(&self) -> Option<usize> {
        self.record.convergence_period
    }

    pub fn periods(&self) -> usize {
        self.record.periods
    }

    pub fn finish(mut self, final_policies: Vec<Option<AgentSnapshot>>) -> RunRecord {
        self.record.final_policies = final_policies;
        self.record
    }
}

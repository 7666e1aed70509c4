//! Learning agents and their shared primitives: exploration schedule,
//! ε-greedy action selection, reward shaping, and the experience tuple.

pub mod dqn;
pub mod net;
pub mod oracle;
pub mod replay;
pub mod scripted;
pub mod tabular;

use rand::Rng;

use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::snapshot::AgentSnapshot;

/// Hyperparameters of a tabular learner.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentHyperparams {
    /// Learning rate α in (0, 1].
    pub alpha: f64,
    /// Discount factor γ in [0, 1).
    pub gamma: f64,
    /// Exploration decay β > 0; ε_t = exp(-βt).
    pub beta: f64,
    /// Lower bound of the uniform value initialization.
    pub q_init_low: f64,
    /// Upper bound of the uniform value initialization.
    pub q_init_high: f64,
    /// Number of past periods in the state (L).
    pub memory_len: usize,
}

impl AgentHyperparams {
    pub fn new(
        alpha: f64,
        gamma: f64,
        beta: f64,
        q_init_low: f64,
        q_init_high: f64,
        memory_len: usize,
    ) -> Result<Self> {
        let hp = Self {
            alpha,
            gamma,
            beta,
            q_init_low,
            q_init_high,
            memory_len,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.q_init_low <= self.q_init_high) {
            return Err(Error::InvalidParameter(format!(
                "q_init_low {} exceeds q_init_high {}",
                self.q_init_low, self.q_init_high
            )));
        }
        if self.memory_len == 0 {
            return Err(Error::InvalidParameter("memory_len must be positive".into()));
        }
        Ok(())
    }
}

/// Defaults for the pricing game: α = 0.125, γ = 0.95, β = 1e-5, memory 1,
/// value initialization drawn from U(0, 1) before any reward rescaling.
impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.125,
            gamma: 0.95,
            beta: 1e-5,
            q_init_low: 0.0,
            q_init_high: 1.0,
            memory_len: 1,
        }
    }
}

/// One experience tuple. States are the codec's mixed-radix indices over the
/// owning agent's memory length.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: u128,
    pub joint_actions: Vec<usize>,
    pub reward: f64,
    pub next_state: u128,
}

/// Exploration probability at training step `t`.
pub fn epsilon(beta: f64, t: u64) -> f64 {
    (-beta * t as f64).exp()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy selection over a state's action values.
pub fn select_action<R: Rng + ?Sized>(values: &[f64], eps: f64, rng: &mut R) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Domain("cannot select an action from an empty value list".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0, 1]")));
    }
    if rng.random::<f64>() < eps {
        Ok(rng.random_range(0..values.len()))
    } else {
        Ok(argmax(values))
    }
}

/// Weight placed on opponents' profits; 0 is the selfish objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSpec {
    pub opponent_weight: f64,
}

impl RewardSpec {
    pub fn selfish() -> Self {
        Self { opponent_weight: 0.0 }
    }

    pub fn new(opponent_weight: f64) -> Result<Self> {
        if !(opponent_weight >= 0.0) || !opponent_weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "opponent weight must be finite and non-negative, got {opponent_weight}"
            )));
        }
        Ok(Self { opponent_weight })
    }
}

/// Combined objective: own profit plus the weighted sum of opponents'.
pub fn shape_reward(spec: &RewardSpec, own: f64, others: &[f64]) -> f64 {
    own + spec.opponent_weight * others.iter().sum::<f64>()
}

/// A participant in a repeated game.
///
/// Agents own their generators; the runner owns the shared action memory and
/// hands each agent its view. `learn` reports whether the update changed the
/// greedy action in any state the agent tracks — the signal the convergence
/// detector listens to.
pub trait Agent: Send {
    /// Periods of memory this agent conditions on.
    fn memory_len(&self) -> usize;

    /// ε-greedy action for the current memory at period `t`.
    fn act(&mut self, memory: &MemoryState, t: u64) -> Result<usize>;

    /// Action to play while the shared memory is still filling.
    fn warmup_action(&mut self, n_actions: usize) -> usize;

    /// Incorporate one transition; true when a tracked greedy action changed.
    fn learn(&mut self, tr: &Transition, t: u64) -> Result<bool>;

    /// Greedy action without exploration.
    fn greedy(&self, memory: &MemoryState) -> Result<usize>;

    /// Exploration probability this agent would use at period `t`.
    fn epsilon_at(&self, t: u64) -> f64;

    /// Current online-sampling probability, for dual-buffer learners.
    fn p_online(&self) -> Option<f64> {
        None
    }

    /// Enter the observation phase: transitions are stored (offline) but no
    /// training happens. No-op for agents without one.
    fn begin_observation(&mut self) {}

    /// Leave the observation phase; dual-buffer learners return the mean
    /// observed reward, which becomes their controller baseline.
    fn end_observation(&mut self) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Serializable view of the learned policy, when one exists.
    fn snapshot(&self) -> Option<AgentSnapshot> {
        None
    }
}

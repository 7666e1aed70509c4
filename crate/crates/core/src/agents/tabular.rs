//! Tabular Q-learning: the dense state-action table and its one-step update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{argmax, epsilon, select_action, Agent, AgentHyperparams, Transition};
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::snapshot::AgentSnapshot;

/// Dense state-action value store, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidParameter(
                "table dimensions must be positive".into(),
            ));
        }
        let len = n_states.checked_mul(n_actions).ok_or_else(|| {
            Error::InvalidParameter("table size overflows the address space".into())
        })?;
        Ok(Self {
            n_states,
            n_actions,
            values: vec![0.0; len],
        })
    }

    /// Entries drawn independently from U(low, high).
    pub fn uniform<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(low <= high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initialization range [{low}, {high}] is invalid"
            )));
        }
        let mut table = Self::zeros(n_states, n_actions)?;
        for v in &mut table.values {
            *v = if low == high { low } else { rng.random_range(low..high) };
        }
        Ok(table)
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                n_states * n_actions,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table entries must be finite".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    /// Greedy action for a state, lowest index on ties.
    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(self.row(state))
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_state(&self, state: u128) -> Result<usize> {
        let s = usize::try_from(state)
            .map_err(|_| Error::Domain(format!("state index {state} out of range")))?;
        if s >= self.n_states {
            return Err(Error::Domain(format!(
                "state index {s} out of range (n_states = {})",
                self.n_states
            )));
        }
        Ok(s)
    }
}

/// One temporal-difference update; returns the new entry value.
///
/// `agent_index` selects this agent's own action out of the joint action.
pub fn q_update(
    table: &mut QTable,
    tr: &Transition,
    agent_index: usize,
    hp: &AgentHyperparams,
) -> Result<f64> {
    let state = table.check_state(tr.state)?;
    let next = table.check_state(tr.next_state)?;
    let action = *tr.joint_actions.get(agent_index).ok_or_else(|| {
        Error::Domain(format!(
            "agent index {agent_index} out of range for joint action of size {}",
            tr.joint_actions.len()
        ))
    })?;
    if action >= table.n_actions {
        return Err(Error::Domain(format!(
            "action index {action} out of range (n_actions = {})",
            table.n_actions
        )));
    }
    if !tr.reward.is_finite() {
        return Err(Error::Domain(format!("reward {} is not finite", tr.reward)));
    }

    let current = table.get(state, action);
    let td_error = tr.reward + hp.gamma * table.max_value(next) - current;
    let updated = current + hp.alpha * td_error;
    table.set(state, action, updated);
    Ok(updated)
}

/// ε-greedy tabular learner over joint-action-memory states.
pub struct TabularAgent {
    index: usize,
    hp: AgentHyperparams,
    table: QTable,
    /// Cached greedy action per state, kept in sync by `learn`.
    greedy_cache: Vec<usize>,
    rng: ChaCha8Rng,
}

impl TabularAgent {
    pub fn new(
        index: usize,
        hp: AgentHyperparams,
        n_states: usize,
        n_actions: usize,
        init_low: f64,
        init_high: f64,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        hp.validate()?;
        let table = QTable::uniform(n_states, n_actions, init_low, init_high, &mut rng)?;
        Ok(Self::from_table(index, hp, table, rng))
    }

    pub fn from_table(index: usize, hp: AgentHyperparams, table: QTable, rng: ChaCha8Rng) -> Self {
        let greedy_cache = (0..table.n_states()).map(|s| table.greedy_action(s)).collect();
        Self {
            index,
            hp,
            table,
            greedy_cache,
            rng,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hp
    }
}

impl Agent for TabularAgent {
    fn memory_len(&self) -> usize {
        self.hp.memory_len
    }

    fn act(&mut self, memory: &MemoryState, t: u64) -> Result<usize> {
        let state = self.table.check_state(memory.encode(self.hp.memory_len)?)?;
        select_action(self.table.row(state), self.epsilon_at(t), &mut self.rng)
    }

    fn warmup_action(&mut self, n_actions: usize) -> usize {
        self.rng.random_range(0..n_actions)
    }

    fn learn(&mut self, tr: &Transition, _t: u64) -> Result<bool> {
        q_update(&mut self.table, tr, self.index, &self.hp)?;
        let state = self.table.check_state(tr.state)?;
        let new_greedy = self.table.greedy_action(state);
        let changed = new_greedy != self.greedy_cache[state];
        self.greedy_cache[state] = new_greedy;
        Ok(changed)
    }

    fn greedy(&self, memory: &MemoryState) -> Result<usize> {
        let state = self.table.check_state(memory.encode(self.hp.memory_len)?)?;
        Ok(self.table.greedy_action(state))
    }

    fn epsilon_at(&self, t: u64) -> f64 {
        epsilon(self.hp.beta, t)
    }

    fn snapshot(&self) -> Option<AgentSnapshot> {
        Some(AgentSnapshot::Table(self.table.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn hp(alpha: f64, gamma: f64) -> AgentHyperparams {
        AgentHyperparams {
            alpha,
            gamma,
            beta: 1e-5,
            q_init_low: 0.0,
            q_init_high: 1.0,
            memory_len: 1,
        }
    }

    fn transition(state: u128, action: usize, reward: f64, next: u128) -> Transition {
        Transition {
            state,
            joint_actions: vec![action, 0],
            reward,
            next_state: next,
        }
    }

    #[test]
    fn update_matches_hand_computation() {
        // q = 0.5, r = 1, γ = 0.95, max next = 2, α = 0.1 → 0.74.
        let mut table = QTable::zeros(2, 2).unwrap();
        table.set(0, 0, 0.5);
        table.set(1, 0, 2.0);
        table.set(1, 1, 1.0);
        let new = q_update(&mut table, &transition(0, 0, 1.0, 1), 0, &hp(0.1, 0.95)).unwrap();
        assert!((new - 0.74).abs() < 1e-12);
        assert!((table.get(0, 0) - 0.74).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_leaves_the_entry_unchanged() {
        let mut table = QTable::zeros(2, 2).unwrap();
        table.set(0, 0, 0.5);
        let zero_alpha = AgentHyperparams {
            alpha: 0.0,
            ..hp(0.1, 0.95)
        };
        let new = q_update(&mut table, &transition(0, 0, 1.0, 1), 0, &zero_alpha).unwrap();
        assert_eq!(new, 0.5);
    }

    #[test]
    fn myopic_full_update_stores_the_reward() {
        let mut table = QTable::uniform(3, 2, -1.0, 1.0, &mut rng_for(5, 0)).unwrap();
        let new = q_update(&mut table, &transition(1, 1, 0.25, 2), 0, &hp(1.0, 0.0)).unwrap();
        assert_eq!(new, 0.25);
        assert_eq!(table.get(1, 1), 0.25);
    }

    #[test]
    fn update_touches_exactly_one_entry() {
        let mut table = QTable::uniform(4, 3, 0.0, 1.0, &mut rng_for(6, 0)).unwrap();
        let before = table.values().to_vec();
        q_update(&mut table, &transition(2, 1, 0.7, 3), 0, &hp(0.5, 0.9)).unwrap();
        let mut diffs = 0;
        for (i, (a, b)) in before.iter().zip(table.values()).enumerate() {
            if a != b {
                diffs += 1;
                assert_eq!(i, 2 * 3 + 1);
            }
        }
        assert_eq!(diffs, 1);
    }

    #[test]
    fn update_rejects_out_of_range_indices() {
        let mut table = QTable::zeros(2, 2).unwrap();
        assert!(q_update(&mut table, &transition(5, 0, 0.0, 0), 0, &hp(0.1, 0.9)).is_err());
        assert!(q_update(&mut table, &transition(0, 3, 0.0, 0), 0, &hp(0.1, 0.9)).is_err());
        assert!(q_update(&mut table, &transition(0, 0, f64::NAN, 0), 0, &hp(0.1, 0.9)).is_err());
        assert!(q_update(&mut table, &transition(0, 0, 0.0, 9), 0, &hp(0.1, 0.9)).is_err());
    }

    #[test]
    fn values_stay_inside_the_reward_bound_interval() {
        // With rewards in [r_min, r_max] and initialization inside
        // [r_min/(1-γ), r_max/(1-γ)], updates can never escape the interval.
        let gamma = 0.9;
        let (r_min, r_max) = (-1.5, 2.0);
        let (lo, hi) = (r_min / (1.0 - gamma), r_max / (1.0 - gamma));
        let mut rng = rng_for(7, 0);
        let mut table = QTable::uniform(16, 4, lo, hi, &mut rng).unwrap();
        let params = hp(0.3, gamma);
        for _ in 0..1_000_000 {
            let tr = transition(
                rng.random_range(0..16) as u128,
                rng.random_range(0..4),
                rng.random_range(r_min..r_max),
                rng.random_range(0..16) as u128,
            );
            q_update(&mut table, &tr, 0, &params).unwrap();
        }
        for v in table.values() {
            assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9, "value {v} escaped [{lo}, {hi}]");
        }
    }

    #[test]
    fn positive_affine_transforms_preserve_greedy_actions() {
        let mut rng = rng_for(8, 0);
        let table = QTable::uniform(10, 5, -2.0, 2.0, &mut rng).unwrap();
        for (scale, shift) in [(2.0, 0.0), (0.5, -3.0), (10.0, 7.0)] {
            let transformed = QTable::from_values(
                10,
                5,
                table.values().iter().map(|v| scale * v + shift).collect(),
            )
            .unwrap();
            for s in 0..10 {
                assert_eq!(table.greedy_action(s), transformed.greedy_action(s));
            }
        }
    }

    #[test]
    fn learn_reports_greedy_flips() {
        let table = QTable::from_values(1, 2, vec![1.0, 0.0]).unwrap();
        let mut agent = TabularAgent::from_table(0, hp(1.0, 0.0), table, rng_for(9, 0));
        // Large reward on action 1 flips the greedy choice.
        assert!(agent.learn(&transition(0, 1, 5.0, 0), 0).unwrap());
        // Repeating it does not.
        assert!(!agent.learn(&transition(0, 1, 5.0, 0), 1).unwrap());
    }
}

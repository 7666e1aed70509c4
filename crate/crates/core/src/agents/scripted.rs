//! Non-learning participants: fixed-action and cycling stubs for tests and
//! intervention scenarios, and a frozen greedy player backed by a Q-table
//! snapshot (the incumbent role).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::tabular::QTable;
use crate::agents::{Agent, Transition};
use crate::error::{Error, Result};
use crate::memory::MemoryState;
use crate::snapshot::AgentSnapshot;

/// Always plays the same action.
pub struct FixedAgent {
    action: usize,
}

impl FixedAgent {
    pub fn new(action: usize) -> Self {
        Self { action }
    }
}

impl Agent for FixedAgent {
    fn memory_len(&self) -> usize {
        1
    }

    fn act(&mut self, _memory: &MemoryState, _t: u64) -> Result<usize> {
        Ok(self.action)
    }

    fn warmup_action(&mut self, _n_actions: usize) -> usize {
        self.action
    }

    fn learn(&mut self, _tr: &Transition, _t: u64) -> Result<bool> {
        Ok(false)
    }

    fn greedy(&self, _memory: &MemoryState) -> Result<usize> {
        Ok(self.action)
    }

    fn epsilon_at(&self, _t: u64) -> f64 {
        0.0
    }
}

/// Cycles through a fixed action sequence, one step per period.
pub struct CycleAgent {
    actions: Vec<usize>,
    position: usize,
}

impl CycleAgent {
    pub fn new(actions: Vec<usize>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Config("cycle agent needs at least one action".into()));
        }
        Ok(Self {
            actions,
            position: 0,
        })
    }

    fn advance(&mut self) -> usize {
        let a = self.actions[self.position];
        self.position = (self.position + 1) % self.actions.len();
        a
    }
}

impl Agent for CycleAgent {
    fn memory_len(&self) -> usize {
        1
    }

    fn act(&mut self, _memory: &MemoryState, _t: u64) -> Result<usize> {
        Ok(self.advance())
    }

    fn warmup_action(&mut self, _n_actions: usize) -> usize {
        self.advance()
    }

    fn learn(&mut self, _tr: &Transition, _t: u64) -> Result<bool> {
        // The greedy action flips whenever consecutive cycle entries differ,
        // which is what keeps the convergence detector from firing.
        let prev = if self.position == 0 {
            self.actions.len() - 1
        } else {
            self.position - 1
        };
        Ok(self.actions[self.position] != self.actions[prev])
    }

    fn greedy(&self, _memory: &MemoryState) -> Result<usize> {
        Ok(self.actions[self.position])
    }

    fn epsilon_at(&self, _t: u64) -> f64 {
        0.0
    }
}

/// Plays the greedy policy of a frozen Q-table; never explores or updates.
pub struct GreedyTableAgent {
    table: QTable,
    memory_len: usize,
    rng: ChaCha8Rng,
}

impl GreedyTableAgent {
    pub fn new(table: QTable, memory_len: usize, rng: ChaCha8Rng) -> Self {
        Self {
            table,
            memory_len,
            rng,
        }
    }

    fn state_of(&self, memory: &MemoryState) -> Result<usize> {
        let state = memory.encode(self.memory_len)?;
        usize::try_from(state)
            .ok()
            .filter(|s| *s < self.table.n_states())
            .ok_or_else(|| Error::Domain(format!("state {state} outside the frozen table")))
    }
}

impl Agent for GreedyTableAgent {
    fn memory_len(&self) -> usize {
        self.memory_len
    }

    fn act(&mut self, memory: &MemoryState, _t: u64) -> Result<usize> {
        Ok(self.table.greedy_action(self.state_of(memory)?))
    }

    fn warmup_action(&mut self, n_actions: usize) -> usize {
        self.rng.random_range(0..n_actions)
    }

    fn learn(&mut self, _tr: &Transition, _t: u64) -> Result<bool> {
        Ok(false)
    }

    fn greedy(&self, memory: &MemoryState) -> Result<usize> {
        Ok(self.table.greedy_action(self.state_of(memory)?))
    }

    fn epsilon_at(&self, _t: u64) -> f64 {
        0.0
    }

    fn snapshot(&self) -> Option<AgentSnapshot> {
        Some(AgentSnapshot::Table(self.table.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn fixed_agent_is_constant() {
        let mut memory = MemoryState::new(2, 4, 1).unwrap();
        memory.push(&[0, 0]).unwrap();
        let mut a = FixedAgent::new(3);
        assert_eq!(a.act(&memory, 0).unwrap(), 3);
        assert_eq!(a.greedy(&memory).unwrap(), 3);
        assert!(!a
            .learn(
                &Transition {
                    state: 0,
                    joint_actions: vec![3, 0],
                    reward: 1.0,
                    next_state: 0,
                },
                0,
            )
            .unwrap());
    }

    #[test]
    fn cycle_agent_alternates_and_reports_changes() {
        let mut memory = MemoryState::new(2, 4, 1).unwrap();
        memory.push(&[0, 0]).unwrap();
        let mut a = CycleAgent::new(vec![0, 1]).unwrap();
        assert_eq!(a.act(&memory, 0).unwrap(), 0);
        assert_eq!(a.act(&memory, 1).unwrap(), 1);
        let tr = Transition {
            state: 0,
            joint_actions: vec![0, 0],
            reward: 0.0,
            next_state: 0,
        };
        assert!(a.learn(&tr, 0).unwrap());
    }

    #[test]
    fn greedy_table_agent_follows_its_table() {
        let table = QTable::from_values(4, 2, vec![
            1.0, 0.0, // state 0 -> action 0
            0.0, 1.0, // state 1 -> action 1
            1.0, 0.0, // state 2 -> action 0
            0.0, 1.0, // state 3 -> action 1
        ])
        .unwrap();
        let mut agent = GreedyTableAgent::new(table, 1, rng_for(41, 0));
        let mut memory = MemoryState::new(2, 2, 1).unwrap();
        memory.push(&[1, 0]).unwrap(); // state 1
        assert_eq!(agent.act(&memory, 0).unwrap(), 1);
        memory.push(&[0, 1]).unwrap(); // state 2
        assert_eq!(agent.act(&memory, 5).unwrap(), 0);
    }
}

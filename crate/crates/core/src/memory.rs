//! State codec: joint-action memories, tabular state indices and feature
//! vectors.
//!
//! The state of a repeated game is the last `L` joint actions. For tabular
//! agents the memory is packed into a mixed-radix integer with the most
//! recent joint action in the lowest digits (agent 0 in the lowest digit of
//! its block); function-approximation agents instead read the memory as a
//! normalized price vector, most recent period first.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::market::PriceGrid;

/// Ring of the last `L` joint actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryState {
    ring: VecDeque<Vec<usize>>,
    n_agents: usize,
    n_actions: usize,
    memory_len: usize,
}

impl MemoryState {
    pub fn new(n_agents: usize, n_actions: usize, memory_len: usize) -> Result<Self> {
        if n_agents == 0 || n_actions == 0 || memory_len == 0 {
            return Err(Error::InvalidParameter(
                "memory requires positive agent count, action count and length".into(),
            ));
        }
        Ok(Self {
            ring: VecDeque::with_capacity(memory_len),
            n_agents,
            n_actions,
            memory_len,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn memory_len(&self) -> usize {
        self.memory_len
    }

    /// Record a joint action as the most recent period, evicting the oldest
    /// once the ring is full.
    pub fn push(&mut self, joint: &[usize]) -> Result<()> {
        if joint.len() != self.n_agents {
            return Err(Error::Domain(format!(
                "joint action has length {}, expected {}",
                joint.len(),
                self.n_agents
            )));
        }
        if let Some(a) = joint.iter().find(|a| **a >= self.n_actions) {
            return Err(Error::Domain(format!(
                "action index {a} out of range (n_actions = {})",
                self.n_actions
            )));
        }
        if self.ring.len() == self.memory_len {
            self.ring.pop_back();
        }
        self.ring.push_front(joint.to_vec());
        Ok(())
    }

    /// True once at least `len` periods have been recorded.
    pub fn is_warm(&self, len: usize) -> bool {
        self.ring.len() >= len
    }

    /// Joint action `age` periods back (0 = most recent).
    pub fn joint(&self, age: usize) -> &[usize] {
        &self.ring[age]
    }

    /// Tabular index over the most recent `len` periods.
    pub fn encode(&self, len: usize) -> Result<u128> {
        if len == 0 || len > self.memory_len {
            return Err(Error::Domain(format!(
                "encode length {len} outside 1..={}",
                self.memory_len
            )));
        }
        if !self.is_warm(len) {
            return Err(Error::Domain(format!(
                "memory holds {} periods, {len} required (still warming up)",
                self.ring.len()
            )));
        }
        let base = self.n_actions as u128;
        let mut index: u128 = 0;
        let mut place: u128 = 1;
        for age in 0..len {
            for &a in self.joint(age) {
                let term = (a as u128)
                    .checked_mul(place)
                    .and_then(|t| index.checked_add(t))
                    .ok_or_else(|| {
                        Error::Domain("state space exceeds the representable index range".into())
                    })?;
                index = term;
                place = place.checked_mul(base).ok_or_else(|| {
                    Error::Domain("state space exceeds the representable index range".into())
                })?;
            }
        }
        Ok(index)
    }

    /// Feature vector over the most recent `len` periods: grid prices mapped
    /// to [0, 1], most recent period first.
    pub fn features(&self, len: usize, grid: &PriceGrid) -> Result<Vec<f64>> {
        if !self.is_warm(len) {
            return Err(Error::Domain(format!(
                "memory holds {} periods, {len} required (still warming up)",
                self.ring.len()
            )));
        }
        let span = grid.max() - grid.min();
        let mut out = Vec::with_capacity(len * self.n_agents);
        for age in 0..len {
            for &a in self.joint(age) {
                out.push((grid.price(a) - grid.min()) / span);
            }
        }
        Ok(out)
    }
}

/// Number of distinct states for `n_agents` agents, `n_actions` actions and
/// memory length `len`: n_actions^(n_agents * len), checked for overflow.
pub fn state_count(n_agents: usize, n_actions: usize, len: usize) -> Result<u128> {
    let digits = n_agents
        .checked_mul(len)
        .ok_or_else(|| Error::Domain("state space exceeds the representable index range".into()))?;
    let mut count: u128 = 1;
    for _ in 0..digits {
        count = count.checked_mul(n_actions as u128).ok_or_else(|| {
            Error::Domain("state space exceeds the representable index range".into())
        })?;
    }
    Ok(count)
}

/// Invert [`MemoryState::encode`]: recover the joint-action history, most
/// recent period first.
pub fn decode(index: u128, n_agents: usize, n_actions: usize, len: usize) -> Result<Vec<Vec<usize>>> {
    let total = state_count(n_agents, n_actions, len)?;
    if index >= total {
        return Err(Error::Domain(format!(
            "state index {index} out of range (state count {total})"
        )));
    }
    let base = n_actions as u128;
    let mut rest = index;
    let mut history = Vec::with_capacity(len);
    for _ in 0..len {
        let mut joint = Vec::with_capacity(n_agents);
        for _ in 0..n_agents {
            joint.push((rest % base) as usize);
            rest /= base;
        }
        history.push(joint);
    }
    Ok(history)
}

/// Features of an encoded state, equivalent to decoding into a memory and
/// calling [`MemoryState::features`].
pub fn features_of_index(
    index: u128,
    n_agents: usize,
    n_actions: usize,
    len: usize,
    grid: &PriceGrid,
) -> Result<Vec<f64>> {
    let history = decode(index, n_agents, n_actions, len)?;
    let span = grid.max() - grid.min();
    let mut out = Vec::with_capacity(len * n_agents);
    for joint in &history {
        for &a in joint {
            out.push((grid.price(a) - grid.min()) / span);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn filled(n_agents: usize, n_actions: usize, len: usize, joints: &[&[usize]]) -> MemoryState {
        let mut m = MemoryState::new(n_agents, n_actions, len).unwrap();
        for j in joints {
            m.push(j).unwrap();
        }
        m
    }

    #[test]
    fn duopoly_pricing_state_space_size() {
        // Two agents, 15 actions, memory 1: 225 states, so a Q-table holds
        // 15 * 225 = 3375 entries.
        let states = state_count(2, 15, 1).unwrap();
        assert_eq!(states, 225);
        assert_eq!(states * 15, 3375);
    }

    #[test]
    fn all_zero_history_encodes_to_zero() {
        let m = filled(2, 15, 2, &[&[0, 0], &[0, 0]]);
        assert_eq!(m.encode(2).unwrap(), 0);
    }

    #[test]
    fn most_recent_joint_action_sits_in_the_lowest_digits() {
        let m = filled(2, 15, 2, &[&[3, 4], &[1, 2]]);
        // ring: most recent = [1, 2], older = [3, 4]
        let expected = 1 + 2 * 15 + 3 * 15u128.pow(2) + 4 * 15u128.pow(3);
        assert_eq!(m.encode(2).unwrap(), expected);
        // Encoding only the most recent period ignores the older one.
        assert_eq!(m.encode(1).unwrap(), 1 + 2 * 15);
    }

    #[test]
    fn encode_before_warm_up_fails() {
        let mut m = MemoryState::new(2, 15, 2).unwrap();
        assert!(matches!(m.encode(2), Err(Error::Domain(_))));
        m.push(&[0, 1]).unwrap();
        assert!(m.encode(1).is_ok());
        assert!(matches!(m.encode(2), Err(Error::Domain(_))));
    }

    #[test]
    fn round_trip_over_random_histories() {
        let mut rng = crate::seed::rng_for(7, 0);
        for _ in 0..1000 {
            let n_agents = rng.random_range(1..4usize);
            let n_actions = rng.random_range(2..16usize);
            let len = rng.random_range(1..4usize);
            let mut m = MemoryState::new(n_agents, n_actions, len).unwrap();
            let mut pushed = Vec::new();
            for _ in 0..len {
                let joint: Vec<usize> =
                    (0..n_agents).map(|_| rng.random_range(0..n_actions)).collect();
                m.push(&joint).unwrap();
                pushed.push(joint);
            }
            pushed.reverse(); // decode returns most recent first
            let idx = m.encode(len).unwrap();
            assert_eq!(decode(idx, n_agents, n_actions, len).unwrap(), pushed);
        }
    }

    #[test]
    fn encode_is_bijective_on_a_small_space() {
        let (k, a, l) = (2usize, 3usize, 2usize);
        let total = state_count(k, a, l).unwrap();
        let mut seen = vec![false; total as usize];
        for idx in 0..total {
            let history = decode(idx, k, a, l).unwrap();
            let mut m = MemoryState::new(k, a, l).unwrap();
            for joint in history.iter().rev() {
                m.push(joint).unwrap();
            }
            let back = m.encode(l).unwrap();
            assert_eq!(back, idx);
            assert!(!seen[back as usize]);
            seen[back as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn state_count_overflow_is_reported() {
        assert!(matches!(state_count(5, 15, 10), Err(Error::Domain(_))));
        // Two agents with memory 10 still fits in the index range.
        assert!(state_count(2, 15, 10).is_ok());
    }

    #[test]
    fn features_normalize_grid_prices() {
        let grid = PriceGrid::build(1.0, 2.0, 0.0, 15).unwrap();
        let lows = filled(2, 15, 1, &[&[0, 0]]);
        assert_eq!(lows.features(1, &grid).unwrap(), vec![0.0, 0.0]);
        let highs = filled(2, 15, 1, &[&[14, 14]]);
        assert_eq!(highs.features(1, &grid).unwrap(), vec![1.0, 1.0]);
        // Middle of an odd grid sits at exactly half the span.
        let mid = filled(2, 15, 1, &[&[7, 7]]);
        let f = mid.features(1, &grid).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn features_are_most_recent_first_and_bounded() {
        let grid = PriceGrid::build(1.0, 2.0, 0.1, 15).unwrap();
        let m = filled(2, 15, 2, &[&[14, 14], &[0, 7]]);
        let f = m.features(2, &grid).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], 0.0); // most recent, agent 0 (action 0)
        assert_eq!(f[2], 1.0); // previous period, agent 0 (action 14)
        assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
        // Same result when going through the encoded index.
        let via_index = features_of_index(m.encode(2).unwrap(), 2, 15, 2, &grid).unwrap();
        assert_eq!(via_index, f);
    }

    #[test]
    fn ring_evicts_the_oldest_period() {
        let mut m = MemoryState::new(1, 4, 2).unwrap();
        for a in [0usize, 1, 2, 3] {
            m.push(&[a]).unwrap();
        }
        assert_eq!(m.joint(0), &[3]);
        assert_eq!(m.joint(1), &[2]);
    }

    #[test]
    fn push_validates_inputs() {
        let mut m = MemoryState::new(2, 4, 1).unwrap();
        assert!(matches!(m.push(&[0]), Err(Error::Domain(_))));
        assert!(matches!(m.push(&[0, 4]), Err(Error::Domain(_))));
    }
}

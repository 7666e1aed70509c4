//! Exact policy evaluation on small finite games.
//!
//! With every agent following a fixed stationary policy over joint-action
//! memory states, the dynamics are deterministic and the per-agent state
//! values satisfy v(s) = r(s, a(s)) + γ v(s'). Synchronous sweeps contract at
//! rate γ, so iterating until the update falls below `tol * (1 - γ) / γ`
//! leaves every value within `tol` of the fixed point. Used as the reference
//! for converged learners.

use crate::error::{Error, Result};
use crate::game::StageGame;
use crate::memory::{decode, state_count, MemoryState};

/// Cap on enumerable states.
const MAX_ORACLE_STATES: u128 = 10_000;

/// Evaluate deterministic stationary policies; returns per-agent state
/// values indexed `[agent][state]`.
pub fn policy_value_oracle(
    game: &dyn StageGame,
    memory_len: usize,
    policies: &[Vec<usize>],
    gamma: f64,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let k = game.n_agents();
    let n_actions = game.n_actions();
    let states = state_count(k, n_actions, memory_len)?;
    if states > MAX_ORACLE_STATES {
        return Err(Error::Unsupported(format!(
            "{states} states exceed the oracle's enumeration limit of {MAX_ORACLE_STATES}"
        )));
    }
    let n_states = states as usize;
    if policies.len() != k {
        return Err(Error::Config(format!(
            "{} policies supplied for {k} agents",
            policies.len()
        )));
    }
    for (i, policy) in policies.iter().enumerate() {
        if policy.len() != n_states {
            return Err(Error::Config(format!(
                "policy {i} covers {} states, expected {n_states}",
                policy.len()
            )));
        }
        if let Some(a) = policy.iter().find(|a| **a >= n_actions) {
            return Err(Error::Config(format!("policy {i} uses action {a} out of range")));
        }
    }

    // Deterministic dynamics: per state, the prescribed joint action, its
    // rewards and the successor state.
    let mut rewards = vec![vec![0.0; n_states]; k];
    let mut successor = vec![0usize; n_states];
    for s in 0..n_states {
        let joint: Vec<usize> = (0..k).map(|i| policies[i][s]).collect();
        let history = decode(s as u128, k, n_actions, memory_len)?;
        let mut mem = MemoryState::new(k, n_actions, memory_len)?;
        for past in history.iter().rev() {
            mem.push(past)?;
        }
        mem.push(&joint)?;
        successor[s] = mem.encode(memory_len)? as usize;
        for (i, r) in game.rewards(&joint).into_iter().enumerate() {
            rewards[i][s] = r;
        }
    }

    let threshold = if gamma == 0.0 {
        f64::INFINITY // a single sweep is exact
    } else {
        tol * (1.0 - gamma) / gamma
    };
    let mut values = vec![vec![0.0; n_states]; k];
    for sweep in 0..1_000_000 {
        let mut max_delta: f64 = 0.0;
        for agent in 0..k {
            let old = values[agent].clone();
            for s in 0..n_states {
                let v = rewards[agent][s] + gamma * old[successor[s]];
                max_delta = max_delta.max((v - old[s]).abs());
                values[agent][s] = v;
            }
        }
        if max_delta <= threshold || gamma == 0.0 {
            return Ok(values);
        }
        if sweep == 999_999 {
            break;
        }
    }
    Err(Error::Numerical("policy evaluation did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{MatrixGame, PayoffMatrix, COOPERATE, DEFECT};

    fn pd() -> MatrixGame {
        MatrixGame::new(PayoffMatrix::standard())
    }

    #[test]
    fn always_defect_values_match_the_geometric_series() {
        let game = pd();
        let policies = vec![vec![DEFECT; 4], vec![DEFECT; 4]];
        let values = policy_value_oracle(&game, 1, &policies, 0.95, 1e-9).unwrap();
        // -2 every period: v = -2 / (1 - 0.95) = -40 from every state.
        for agent in &values {
            for v in agent {
                assert!((v + 40.0).abs() < 1e-6, "value {v}");
            }
        }
    }

    #[test]
    fn always_cooperate_values_match_the_geometric_series() {
        let game = pd();
        let policies = vec![vec![COOPERATE; 4], vec![COOPERATE; 4]];
        let values = policy_value_oracle(&game, 1, &policies, 0.95, 1e-9).unwrap();
        for agent in &values {
            for v in agent {
                assert!((v + 20.0).abs() < 1e-6, "value {v}");
            }
        }
    }

    #[test]
    fn zero_discount_returns_one_period_rewards() {
        let game = pd();
        // Agent 0 defects everywhere, agent 1 cooperates everywhere.
        let policies = vec![vec![DEFECT; 4], vec![COOPERATE; 4]];
        let values = policy_value_oracle(&game, 1, &policies, 0.0, 1e-9).unwrap();
        for s in 0..4 {
            assert_eq!(values[0][s], 0.0);
            assert_eq!(values[1][s], -3.0);
        }
    }

    #[test]
    fn state_dependent_policy_is_followed() {
        let game = pd();
        // Agent 0 mirrors the opponent's last action (tit-for-tat); agent 1
        // always defects. From any state the play is absorbed into mutual
        // defection after at most one period.
        let mut tit_for_tat = vec![0usize; 4];
        for s in 0..4usize {
            let opponent_last = s / 2; // agent 1's digit in the state index
            tit_for_tat[s] = opponent_last;
        }
        let policies = vec![tit_for_tat, vec![DEFECT; 4]];
        let gamma = 0.9;
        let values = policy_value_oracle(&game, 1, &policies, gamma, 1e-10).unwrap();
        let v_dd = -2.0 / (1.0 - gamma);
        // From a state where agent 1 cooperated last, agent 0 cooperates once
        // (earning the loss payoff) before both defect forever.
        let expected_from_cc = -3.0 + gamma * v_dd;
        assert!((values[0][0] - expected_from_cc).abs() < 1e-6);
        // From mutual defection the series is immediate.
        assert!((values[0][3] - v_dd).abs() < 1e-6);
    }

    #[test]
    fn oracle_rejects_oversized_and_inconsistent_inputs() {
        let game = pd();
        assert!(policy_value_oracle(&game, 20, &[vec![0; 4], vec![0; 4]], 0.9, 1e-6).is_err());
        assert!(policy_value_oracle(&game, 1, &[vec![0; 4]], 0.9, 1e-6).is_err());
        assert!(policy_value_oracle(&game, 1, &[vec![0; 3], vec![0; 4]], 0.9, 1e-6).is_err());
        assert!(policy_value_oracle(&game, 1, &[vec![5; 4], vec![0; 4]], 0.9, 1e-6).is_err());
        assert!(policy_value_oracle(&game, 1, &[vec![0; 4], vec![0; 4]], 1.0, 1e-6).is_err());
    }
}

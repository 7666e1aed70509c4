//! Common interface for one-period games driven by the experiment runner.
//!
//! A stage game maps a joint action (one discrete action per agent) to a
//! per-agent reward. All state handling — the memory of past joint actions —
//! lives outside the game, so matrix games and the pricing game share the
//! same runner, codec and agents.

use crate::error::{Error, Result};
use crate::market::{demand, MarketParams, PriceGrid};

pub trait StageGame: Send + Sync {
    fn n_agents(&self) -> usize;

    /// Size of each agent's (shared) action set.
    fn n_actions(&self) -> usize;

    /// One-period rewards for a joint action, indexed by agent.
    fn rewards(&self, joint: &[usize]) -> Vec<f64>;

    /// Real-valued interpretation of an action (the posted price), when one
    /// exists.
    fn action_value(&self, _action: usize) -> Option<f64> {
        None
    }

    fn validate_joint(&self, joint: &[usize]) -> Result<()> {
        if joint.len() != self.n_agents() {
            return Err(Error::Domain(format!(
                "joint action has length {}, expected {}",
                joint.len(),
                self.n_agents()
            )));
        }
        if let Some(a) = joint.iter().find(|a| **a >= self.n_actions()) {
            return Err(Error::Domain(format!(
                "action index {a} out of range (n_actions = {})",
                self.n_actions()
            )));
        }
        Ok(())
    }
}

/// Pricing game on a discretized grid: action i posts price `grid[i]` and the
/// reward is the one-period logit-market profit.
pub struct MarketGame {
    params: MarketParams,
    grid: PriceGrid,
    /// Profit lookup, joint-action-major, filled when the joint space is
    /// small enough to enumerate.
    profit_table: Option<Vec<f64>>,
}

/// Upper bound on precomputed joint actions (m^K entries of K profits).
const PROFIT_TABLE_LIMIT: usize = 100_000;

impl MarketGame {
    pub fn new(params: MarketParams, grid: PriceGrid) -> Result<Self> {
        params.validate()?;
        let mut game = Self {
            params,
            grid,
            profit_table: None,
        };
        let joint_count = (0..game.params.n_agents)
            .try_fold(1usize, |acc, _| acc.checked_mul(game.grid.len()))
            .unwrap_or(usize::MAX);
        if joint_count <= PROFIT_TABLE_LIMIT {
            let k = game.params.n_agents;
            let mut table = vec![0.0; joint_count * k];
            let mut joint = vec![0usize; k];
            for idx in 0..joint_count {
                let mut rest = idx;
                for a in joint.iter_mut() {
                    *a = rest % game.grid.len();
                    rest /= game.grid.len();
                }
                let profits = game.compute_rewards(&joint)?;
                table[idx * k..(idx + 1) * k].copy_from_slice(&profits);
            }
            game.profit_table = Some(table);
        }
        Ok(game)
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    pub fn prices(&self, joint: &[usize]) -> Vec<f64> {
        joint.iter().map(|a| self.grid.price(*a)).collect()
    }

    fn compute_rewards(&self, joint: &[usize]) -> Result<Vec<f64>> {
        Ok(demand(&self.params, &self.prices(joint))?.profits)
    }

    fn joint_index(&self, joint: &[usize]) -> usize {
        let m = self.grid.len();
        joint.iter().rev().fold(0usize, |acc, a| acc * m + a)
    }

    /// Extremes of the per-agent one-period profit over the whole joint grid.
    pub fn profit_bounds(&self) -> Result<(f64, f64)> {
        let k = self.params.n_agents;
        let m = self.grid.len();
        let joint_count = m.pow(k as u32);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut joint = vec![0usize; k];
        for idx in 0..joint_count {
            let mut rest = idx;
            for a in joint.iter_mut() {
                *a = rest % m;
                rest /= m;
            }
            for r in self.rewards(&joint) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            Ok((lo, hi))
        } else {
            Err(Error::Numerical("profit bounds are not finite".into()))
        }
    }
}

impl StageGame for MarketGame {
    fn n_agents(&self) -> usize {
        self.params.n_agents
    }

    fn n_actions(&self) -> usize {
        self.grid.len()
    }

    fn rewards(&self, joint: &[usize]) -> Vec<f64> {
        debug_assert!(self.validate_joint(joint).is_ok());
        match &self.profit_table {
            Some(table) => {
                let k = self.params.n_agents;
                let idx = self.joint_index(joint);
                table[idx * k..(idx + 1) * k].to_vec()
            }
            None => self
                .compute_rewards(joint)
                .expect("joint action validated by the runner"),
        }
    }

    fn action_value(&self, action: usize) -> Option<f64> {
        Some(self.grid.price(action))
    }
}

//! Deep Q-learning over price-history features, with either a single replay
//! buffer or the dual online/offline pair with adaptive sampling.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::net::{gradient_step, Adam, TdSample, ValueNet};
use crate::agents::replay::{Batch, DualBufferConfig, DualReplay, ReplayBuffer, SamplingController};
use crate::agents::{argmax, epsilon, select_action, Agent, Transition};
use crate::error::{Error, Result};
use crate::market::PriceGrid;
use crate::memory::{features_of_index, MemoryState};
use crate::snapshot::AgentSnapshot;

/// Decodes packed state indices into normalized price features.
#[derive(Debug, Clone)]
pub struct FeatureCodec {
    pub n_agents: usize,
    pub n_actions: usize,
    pub memory_len: usize,
    pub grid: PriceGrid,
}

impl FeatureCodec {
    pub fn feature_dim(&self) -> usize {
        self.n_agents * self.memory_len
    }

    pub fn features_of_state(&self, state: u128) -> Result<Vec<f64>> {
        features_of_index(state, self.n_agents, self.n_actions, self.memory_len, &self.grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnHyperparams {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Adam step size.
    pub learning_rate: f64,
    pub gamma: f64,
    /// Exploration decay; ε = exp(-β · training step).
    pub beta: f64,
    /// Periods of price history in the feature vector (L).
    pub memory_len: usize,
    pub batch_size: usize,
    /// Target network refresh interval, in gradient updates.
    pub target_sync_every: u64,
    /// Capacity of the single replay buffer (ignored with dual buffers).
    pub replay_capacity: usize,
    /// Gradient updates performed per period once training.
    pub updates_per_period: usize,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            gamma: 0.95,
            beta: 1e-5,
            memory_len: 10,
            batch_size: 32,
            target_sync_every: 500,
            replay_capacity: 10_000,
            updates_per_period: 1,
        }
    }
}

impl DqnHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        if self.memory_len == 0
            || self.batch_size == 0
            || self.target_sync_every == 0
            || self.replay_capacity == 0
            || self.updates_per_period == 0
        {
            return Err(Error::InvalidParameter(
                "memory length, batch size, sync interval, capacity and update count \
                 must be positive"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One optimization step on a batch of transitions. Targets bootstrap
/// through the target network; returns the pre-update loss.
pub fn net_gradient_step(
    net: &mut ValueNet,
    target_net: &ValueNet,
    opt: &mut Adam,
    batch: &Batch,
    agent_index: usize,
    codec: &FeatureCodec,
    gamma: f64,
) -> Result<f64> {
    if batch.items.is_empty() {
        return Err(Error::Domain("empty training batch".into()));
    }
    let mut samples = Vec::with_capacity(batch.items.len());
    for (tr, weight) in batch.items.iter().zip(&batch.weights) {
        let action = *tr.joint_actions.get(agent_index).ok_or_else(|| {
            Error::Domain(format!(
                "agent index {agent_index} out of range for joint action of size {}",
                tr.joint_actions.len()
            ))
        })?;
        let next = codec.features_of_state(tr.next_state)?;
        let bootstrap = target_net
            .forward(&next)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        samples.push(TdSample {
            features: codec.features_of_state(tr.state)?,
            action,
            target: tr.reward + gamma * bootstrap,
            weight: *weight,
        });
    }
    gradient_step(net, opt, &samples)
}

enum Replay {
    Single(ReplayBuffer),
    Dual {
        replay: DualReplay,
        controller: SamplingController,
        baseline: Option<f64>,
    },
}

/// Function-approximation learner.
///
/// In the dual-buffer configuration the agent first runs an observation
/// phase: transitions fill the offline buffer and their mean reward becomes
/// the controller baseline. Training then samples both buffers with the
/// controller's online probability.
pub struct DqnAgent {
    index: usize,
    hp: DqnHyperparams,
    codec: FeatureCodec,
    net: ValueNet,
    target: ValueNet,
    opt: Adam,
    replay: Replay,
    rng: ChaCha8Rng,
    observing: bool,
    observed_sum: f64,
    observed_count: usize,
    updates: u64,
    eps_start: Option<u64>,
    /// Last greedy action seen per visited state, for convergence tracking.
    greedy_seen: HashMap<u128, usize>,
    last_p_online: Option<f64>,
}

impl DqnAgent {
    pub fn new(
        index: usize,
        hp: DqnHyperparams,
        grid: PriceGrid,
        n_agents: usize,
        n_actions: usize,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        hp.validate()?;
        let codec = FeatureCodec {
            n_agents,
            n_actions,
            memory_len: hp.memory_len,
            grid,
        };
        let mut widths = vec![codec.feature_dim()];
        widths.extend_from_slice(&hp.hidden);
        widths.push(n_actions);
        let net = ValueNet::new(&widths, &mut rng)?;
        let target = net.clone();
        let opt = Adam::new(hp.learning_rate, &net);
        let replay = Replay::Single(ReplayBuffer::new(hp.replay_capacity)?);
        Ok(Self {
            index,
            hp,
            codec,
            net,
            target,
            opt,
            replay,
            rng,
            observing: false,
            observed_sum: 0.0,
            observed_count: 0,
            updates: 0,
            eps_start: None,
            greedy_seen: HashMap::new(),
            last_p_online: None,
        })
    }

    pub fn with_dual_buffers(
        index: usize,
        hp: DqnHyperparams,
        dual_cfg: DualBufferConfig,
        grid: PriceGrid,
        n_agents: usize,
        n_actions: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut agent = Self::new(index, hp, grid, n_agents, n_actions, rng)?;
        agent.replay = Replay::Dual {
            replay: DualReplay::new(&dual_cfg)?,
            controller: SamplingController::new(dual_cfg)?,
            baseline: None,
        };
        Ok(agent)
    }

    pub fn hyperparams(&self) -> &DqnHyperparams {
        &self.hp
    }

    pub fn net(&self) -> &ValueNet {
        &self.net
    }

    /// Override the controller baseline.
    pub fn set_baseline(&mut self, value: f64) {
        if let Replay::Dual { baseline, .. } = &mut self.replay {
            *baseline = Some(value);
        }
    }

    fn values_for(&self, memory: &MemoryState) -> Result<Vec<f64>> {
        let features = memory.features(self.hp.memory_len, &self.codec.grid)?;
        self.net.forward(&features)
    }

    fn train_available(&self) -> bool {
        match &self.replay {
            Replay::Single(buf) => buf.len() >= self.hp.batch_size,
            Replay::Dual { replay, .. } => {
                replay.offline.len() + replay.online.len() >= self.hp.batch_size
            }
        }
    }

    fn sample_batch(&mut self) -> Result<Batch> {
        match &mut self.replay {
            Replay::Single(buf) => {
                let mut items = Vec::with_capacity(self.hp.batch_size);
                for _ in 0..self.hp.batch_size {
                    items.push(buf.sample(&mut self.rng)?.clone());
                }
                let weights = vec![1.0; items.len()];
                Ok(Batch { items, weights })
            }
            Replay::Dual {
                replay, controller, ..
            } => {
                let p = controller.p_online();
                replay.sample(self.hp.batch_size, p, &mut self.rng)
            }
        }
    }
}

impl Agent for DqnAgent {
    fn memory_len(&self) -> usize {
        self.hp.memory_len
    }

    fn act(&mut self, memory: &MemoryState, t: u64) -> Result<usize> {
        let values = self.values_for(memory)?;
        let eps = self.epsilon_at(t);
        if self.eps_start.is_none() {
            self.eps_start = Some(t);
        }
        select_action(&values, eps, &mut self.rng)
    }

    fn warmup_action(&mut self, n_actions: usize) -> usize {
        self.rng.random_range(0..n_actions)
    }

    fn learn(&mut self, tr: &Transition, _t: u64) -> Result<bool> {
        if self.observing {
            self.observed_sum += tr.reward;
            self.observed_count += 1;
            match &mut self.replay {
                Replay::Single(buf) => buf.push(tr.clone()),
                Replay::Dual { replay, .. } => replay.offline.push(tr.clone()),
            }
            return Ok(false);
        }

        match &mut self.replay {
            Replay::Single(buf) => buf.push(tr.clone()),
            Replay::Dual {
                replay,
                controller,
                baseline,
            } => {
                replay.online.push(tr.clone());
                let base = baseline.ok_or_else(|| {
                    Error::Config("dual-buffer agent trained without a profit baseline".into())
                })?;
                self.last_p_online = Some(controller.update(tr.reward, base)?);
            }
        }

        if self.train_available() {
            for _ in 0..self.hp.updates_per_period {
                let batch = self.sample_batch()?;
                net_gradient_step(
                    &mut self.net,
                    &self.target,
                    &mut self.opt,
                    &batch,
                    self.index,
                    &self.codec,
                    self.hp.gamma,
                )?;
                self.updates += 1;
                if self.updates % self.hp.target_sync_every == 0 {
                    self.target = self.net.clone();
                }
            }
        }

        // Lazy policy-change tracking: a visited state's greedy action is
        // re-examined when the state recurs.
        let greedy = argmax(&self.net.forward(&self.codec.features_of_state(tr.state)?)?);
        let changed = match self.greedy_seen.insert(tr.state, greedy) {
            Some(previous) => previous != greedy,
            None => false,
        };
        Ok(changed)
    }

    fn greedy(&self, memory: &MemoryState) -> Result<usize> {
        Ok(argmax(&self.values_for(memory)?))
    }

    fn epsilon_at(&self, t: u64) -> f64 {
        let start = self.eps_start.unwrap_or(t);
        epsilon(self.hp.beta, t.saturating_sub(start))
    }

    fn p_online(&self) -> Option<f64> {
        self.last_p_online
    }

    fn begin_observation(&mut self) {
        self.observing = true;
        self.observed_sum = 0.0;
        self.observed_count = 0;
    }

    fn end_observation(&mut self) -> Result<Option<f64>> {
        if self.observed_count == 0 {
            return Err(Error::Config("observation phase saw no transitions".into()));
        }
        let mean = self.observed_sum / self.observed_count as f64;
        self.observing = false;
        if let Replay::Dual { baseline, .. } = &mut self.replay {
            *baseline = Some(mean);
        }
        Ok(Some(mean))
    }

    fn snapshot(&self) -> Option<AgentSnapshot> {
        Some(AgentSnapshot::Net(self.net.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn codec() -> FeatureCodec {
        FeatureCodec {
            n_agents: 2,
            n_actions: 15,
            memory_len: 2,
            grid: PriceGrid::build(1.472927, 1.924981, 0.1, 15).unwrap(),
        }
    }

    fn make_agent(seed: u64) -> DqnAgent {
        let c = codec();
        let hp = DqnHyperparams {
            hidden: vec![16, 16],
            memory_len: 2,
            batch_size: 4,
            beta: 1e-3,
            ..DqnHyperparams::default()
        };
        DqnAgent::new(0, hp, c.grid.clone(), 2, 15, rng_for(seed, 1)).unwrap()
    }

    fn tr(state: u128, a: usize, reward: f64, next: u128) -> Transition {
        Transition {
            state,
            joint_actions: vec![a, 3],
            reward,
            next_state: next,
        }
    }

    #[test]
    fn gradient_step_reduces_loss_on_a_fixed_batch() {
        let c = codec();
        let mut rng = rng_for(51, 0);
        let mut net = ValueNet::new(&[c.feature_dim(), 16, 15], &mut rng).unwrap();
        let target = net.clone();
        let mut opt = Adam::new(1e-2, &net);
        let items: Vec<Transition> = (0..8).map(|i| tr(i as u128, i % 15, 0.2, (i + 1) as u128)).collect();
        let batch = Batch {
            weights: vec![1.0; items.len()],
            items,
        };
        let first = net_gradient_step(&mut net, &target, &mut opt, &batch, 0, &c, 0.95).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = net_gradient_step(&mut net, &target, &mut opt, &batch, 0, &c, 0.95).unwrap();
        }
        assert!(last < first, "loss {first} -> {last}");
    }

    #[test]
    fn agent_trains_and_tracks_policy_changes() {
        let mut agent = make_agent(52);
        let mut changed_any = false;
        for i in 0..200u128 {
            let t = tr(i % 50, (i % 15) as usize, if i % 2 == 0 { 0.3 } else { 0.1 }, (i + 1) % 50);
            changed_any |= agent.learn(&t, i as u64).unwrap();
        }
        assert!(agent.updates > 0, "agent never trained");
        assert!(changed_any, "policy never moved while training");
    }

    #[test]
    fn observation_phase_fills_offline_and_sets_baseline() {
        let c = codec();
        let hp = DqnHyperparams {
            hidden: vec![8],
            memory_len: 2,
            batch_size: 4,
            ..DqnHyperparams::default()
        };
        let mut agent = DqnAgent::with_dual_buffers(
            0,
            hp,
            DualBufferConfig {
                offline_capacity: 50,
                online_capacity: 10,
                ..DualBufferConfig::default()
            },
            c.grid.clone(),
            2,
            15,
            rng_for(53, 1),
        )
        .unwrap();
        agent.begin_observation();
        for i in 0..20u128 {
            agent.learn(&tr(i, 1, 0.5, i + 1), i as u64).unwrap();
        }
        assert_eq!(agent.updates, 0, "no training during observation");
        let baseline = agent.end_observation().unwrap().unwrap();
        assert!((baseline - 0.5).abs() < 1e-12);
        match &agent.replay {
            Replay::Dual { replay, .. } => {
                assert_eq!(replay.offline.len(), 20);
                assert_eq!(replay.online.len(), 0);
            }
            _ => panic!("expected dual replay"),
        }
        // Training now works and reports a sampling probability.
        for i in 20..40u128 {
            agent.learn(&tr(i, 2, 0.5, i + 1), i as u64).unwrap();
        }
        assert!(agent.updates > 0);
        assert!(agent.p_online().is_some());
    }

    #[test]
    fn dual_agent_without_baseline_is_a_config_error() {
        let c = codec();
        let hp = DqnHyperparams {
            hidden: vec![8],
            memory_len: 2,
            batch_size: 2,
            ..DqnHyperparams::default()
        };
        let mut agent = DqnAgent::with_dual_buffers(
            0,
            hp,
            DualBufferConfig::default(),
            c.grid.clone(),
            2,
            15,
            rng_for(54, 1),
        )
        .unwrap();
        assert!(matches!(agent.learn(&tr(0, 0, 0.1, 1), 0), Err(Error::Config(_))));
    }

    #[test]
    fn epsilon_counts_from_the_first_decision() {
        let c = codec();
        let mut agent = make_agent(55);
        let mut memory = MemoryState::new(2, 15, 2).unwrap();
        memory.push(&[0, 0]).unwrap();
        memory.push(&[1, 1]).unwrap();
        // Before any decision the schedule reads as fresh.
        assert_eq!(agent.epsilon_at(1000), 1.0);
        agent.act(&memory, 1000).unwrap();
        assert_eq!(agent.epsilon_at(1000), 1.0);
        assert!(agent.epsilon_at(2000) < 1.0);
        let _ = c;
    }
}

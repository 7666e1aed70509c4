//! Experience replay: a bounded ring buffer, the paired online/offline
//! buffers with importance weights, and the adaptive sampling controller.

use std::collections::VecDeque;

use rand::Rng;

use crate::agents::Transition;
use crate::error::{Error, Result};

/// Bounded FIFO of transitions; pushing past capacity evicts the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("replay capacity must be positive".into()));
        }
        Ok(Self {
            items: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn push(&mut self, tr: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(tr);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&Transition> {
        if self.items.is_empty() {
            return Err(Error::Domain("cannot sample from an empty replay buffer".into()));
        }
        Ok(&self.items[rng.random_range(0..self.items.len())])
    }
}

/// A sampled mini-batch with per-element importance weights.
#[derive(Debug, Clone)]
pub struct Batch {
    pub items: Vec<Transition>,
    pub weights: Vec<f64>,
}

/// Configuration of the dual online/offline replay and its controller.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBufferConfig {
    /// Capacity of the buffer of pre-deployment observations.
    pub offline_capacity: usize,
    /// Capacity of the buffer of fresh experience.
    pub online_capacity: usize,
    /// Importance weight of offline-sourced batch elements (online is 1.0).
    pub offline_weight: f64,
    /// Length of the rolling profit window driving the controller.
    pub rolling_window: usize,
    /// Fraction of the baseline profit below which the controller trips.
    pub profit_threshold_frac: f64,
    /// Online sampling probability while profits look healthy.
    pub p_online_low: f64,
    /// Online sampling probability after the controller trips.
    pub p_online_high: f64,
}

impl Default for DualBufferConfig {
    fn default() -> Self {
        Self {
            offline_capacity: 4000,
            online_capacity: 400,
            offline_weight: 0.5,
            rolling_window: 100,
            profit_threshold_frac: 0.9,
            p_online_low: 0.2,
            p_online_high: 0.9,
        }
    }
}

impl DualBufferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.offline_capacity == 0 || self.online_capacity == 0 {
            return Err(Error::InvalidParameter("buffer capacities must be positive".into()));
        }
        if !(self.offline_weight > 0.0 && self.offline_weight <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "offline weight must lie in (0, 1], got {}",
                self.offline_weight
            )));
        }
        if self.rolling_window == 0 {
            return Err(Error::InvalidParameter("rolling window must be positive".into()));
        }
        if !(self.profit_threshold_frac > 0.0 && self.profit_threshold_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "profit threshold fraction must lie in (0, 1), got {}",
                self.profit_threshold_frac
            )));
        }
        for p in [self.p_online_low, self.p_online_high] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "sampling probability {p} outside [0, 1]"
                )));
            }
        }
        if self.p_online_low > self.p_online_high {
            return Err(Error::InvalidParameter(format!(
                "p_online_low {} exceeds p_online_high {}",
                self.p_online_low, self.p_online_high
            )));
        }
        Ok(())
    }
}

/// Paired buffers: a large frozen-ish store of observed history and a small
/// store of fresh experience.
#[derive(Debug, Clone)]
pub struct DualReplay {
    pub offline: ReplayBuffer,
    pub online: ReplayBuffer,
    offline_weight: f64,
}

impl DualReplay {
    pub fn new(cfg: &DualBufferConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            offline: ReplayBuffer::new(cfg.offline_capacity)?,
            online: ReplayBuffer::new(cfg.online_capacity)?,
            offline_weight: cfg.offline_weight,
        })
    }

    /// Draw a batch; each element comes from the online buffer with
    /// probability `p_online`, otherwise from the offline buffer.
    /// Offline-sourced elements carry weight `offline_weight`, online-sourced
    /// elements weight 1. An empty buffer on either side falls back to the
    /// other with a logged warning.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        p_online: f64,
        rng: &mut R,
    ) -> Result<Batch> {
        if batch_size == 0 {
            return Err(Error::Domain("batch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p_online) {
            return Err(Error::Domain(format!("p_online {p_online} outside [0, 1]")));
        }
        if self.offline.is_empty() && self.online.is_empty() {
            return Err(Error::Domain("both replay buffers are empty".into()));
        }
        let mut items = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        let mut warned = false;
        for _ in 0..batch_size {
            let want_online = rng.random::<f64>() < p_online;
            let (buffer, weight) = if want_online {
                if self.online.is_empty() {
                    if !warned {
                        log::warn!("online buffer empty; falling back to offline samples");
                        warned = true;
                    }
                    (&self.offline, self.offline_weight)
                } else {
                    (&self.online, 1.0)
                }
            } else if self.offline.is_empty() {
                if !warned {
                    log::warn!("offline buffer empty; falling back to online samples");
                    warned = true;
                }
                (&self.online, 1.0)
            } else {
                (&self.offline, self.offline_weight)
            };
            items.push(buffer.sample(rng)?.clone());
            weights.push(weight);
        }
        Ok(Batch { items, weights })
    }
}

/// Hysteresis controller for the online sampling probability.
///
/// While the rolling mean profit stays at or above
/// `profit_threshold_frac * baseline` the probability is `p_online_low`.
/// When the mean falls below the threshold it jumps to `p_online_high` and
/// stays there until the mean has been back at or above the threshold for
/// `rolling_window` consecutive updates.
#[derive(Debug, Clone)]
pub struct SamplingController {
    cfg: DualBufferConfig,
    window: VecDeque<f64>,
    tripped: bool,
    consecutive_ok: usize,
}

impl SamplingController {
    pub fn new(cfg: DualBufferConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: VecDeque::with_capacity(cfg.rolling_window),
            cfg,
            tripped: false,
            consecutive_ok: 0,
        })
    }

    pub fn p_online(&self) -> f64 {
        if self.tripped {
            self.cfg.p_online_high
        } else {
            self.cfg.p_online_low
        }
    }

    /// Record one period's profit and return the updated probability.
    pub fn update(&mut self, profit: f64, baseline: f64) -> Result<f64> {
        if !(baseline > 0.0) || !baseline.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "baseline profit must be positive, got {baseline}"
            )));
        }
        if self.window.len() == self.cfg.rolling_window {
            self.window.pop_front();
        }
        self.window.push_back(profit);
        if self.window.len() < self.cfg.rolling_window {
            return Ok(self.p_online()); // still warming up
        }
        let mean = self.window.iter().sum::<f64>() / self.window.len() as f64;
        let threshold = self.cfg.profit_threshold_frac * baseline;
        if self.tripped {
            if mean >= threshold {
                self.consecutive_ok += 1;
                if self.consecutive_ok >= self.cfg.rolling_window {
                    self.tripped = false;
                    self.consecutive_ok = 0;
                }
            } else {
                self.consecutive_ok = 0;
            }
        } else if mean < threshold {
            self.tripped = true;
            self.consecutive_ok = 0;
        }
        Ok(self.p_online())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn tr(tag: usize) -> Transition {
        Transition {
            state: tag as u128,
            joint_actions: vec![tag % 7, 0],
            reward: tag as f64,
            next_state: 0,
        }
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            buf.push(tr(i));
        }
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.get(0).state, 2);
        assert_eq!(buf.get(2).state, 4);
    }

    fn filled_dual(online: usize, offline: usize) -> DualReplay {
        let cfg = DualBufferConfig {
            offline_capacity: 64,
            online_capacity: 64,
            ..DualBufferConfig::default()
        };
        let mut dual = DualReplay::new(&cfg).unwrap();
        for i in 0..offline {
            dual.offline.push(tr(i));
        }
        for i in 0..online {
            dual.online.push(tr(1000 + i));
        }
        dual
    }

    #[test]
    fn all_online_when_probability_is_one() {
        let dual = filled_dual(10, 10);
        let mut rng = rng_for(31, 0);
        let batch = dual.sample(32, 1.0, &mut rng).unwrap();
        assert!(batch.items.iter().all(|t| t.state >= 1000));
        assert!(batch.weights.iter().all(|w| *w == 1.0));
    }

    #[test]
    fn online_fraction_concentrates_around_p() {
        let dual = filled_dual(10, 10);
        let mut rng = rng_for(32, 0);
        let n = 10_000;
        let batch = dual.sample(n, 0.5, &mut rng).unwrap();
        let online = batch.items.iter().filter(|t| t.state >= 1000).count();
        let frac = online as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "online fraction {frac}");
    }

    #[test]
    fn offline_sourced_elements_carry_the_configured_weight() {
        let dual = filled_dual(10, 10);
        let mut rng = rng_for(33, 0);
        let batch = dual.sample(64, 0.5, &mut rng).unwrap();
        for (item, w) in batch.items.iter().zip(&batch.weights) {
            if item.state >= 1000 {
                assert_eq!(*w, 1.0);
            } else {
                assert_eq!(*w, 0.5);
            }
        }
    }

    #[test]
    fn empty_side_falls_back_to_the_other() {
        let dual = filled_dual(0, 10);
        let mut rng = rng_for(34, 0);
        let batch = dual.sample(16, 0.9, &mut rng).unwrap();
        assert!(batch.items.iter().all(|t| t.state < 1000));

        let dual = filled_dual(10, 0);
        let batch = dual.sample(16, 0.1, &mut rng).unwrap();
        assert!(batch.items.iter().all(|t| t.state >= 1000));

        let empty = filled_dual(0, 0);
        assert!(empty.sample(4, 0.5, &mut rng).is_err());
    }

    fn controller() -> SamplingController {
        SamplingController::new(DualBufferConfig {
            rolling_window: 5,
            profit_threshold_frac: 0.9,
            p_online_low: 0.2,
            p_online_high: 0.9,
            ..DualBufferConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn healthy_profits_keep_the_probability_low() {
        let mut c = controller();
        for _ in 0..20 {
            assert_eq!(c.update(1.0, 1.0).unwrap(), 0.2);
        }
    }

    #[test]
    fn collapsed_profits_trip_the_controller() {
        let mut c = controller();
        for _ in 0..5 {
            c.update(1.0, 1.0).unwrap();
        }
        let mut flipped_at = None;
        for i in 0..5 {
            if c.update(0.0, 1.0).unwrap() == 0.9 {
                flipped_at = Some(i);
                break;
            }
        }
        // A hard profit collapse flips the controller within the window.
        assert!(flipped_at.is_some());
    }

    #[test]
    fn hysteresis_requires_a_full_window_of_recovery() {
        let mut c = controller();
        for _ in 0..5 {
            c.update(0.0, 1.0).unwrap();
        }
        assert_eq!(c.p_online(), 0.9);
        // Recovery: the mean is back above threshold once the window refills,
        // but the controller waits for rolling_window consecutive healthy
        // updates before releasing.
        let mut released_after = None;
        for i in 0..20 {
            if c.update(1.2, 1.0).unwrap() == 0.2 {
                released_after = Some(i + 1);
                break;
            }
        }
        let released = released_after.expect("controller never released");
        assert!(released > 5, "released after {released} updates");
    }

    #[test]
    fn controller_rejects_bad_baselines() {
        let mut c = controller();
        assert!(c.update(1.0, 0.0).is_err());
        assert!(c.update(1.0, -2.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DualBufferConfig::default().validate().is_ok());
        let mut cfg = DualBufferConfig::default();
        cfg.p_online_low = 0.95;
        assert!(cfg.validate().is_err());
        let mut cfg = DualBufferConfig::default();
        cfg.offline_weight = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = DualBufferConfig::default();
        cfg.rolling_window = 0;
        assert!(cfg.validate().is_err());
    }
}

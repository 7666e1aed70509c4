//! Run statistics: profit series, trailing means, and the profit-gain
//! normalization between the competitive and collusive benchmarks.

use crate::error::{Error, Result};
use crate::harness::config::GameEnv;
use crate::harness::record::RunRecord;

/// Profit gain Δ = (mean profit - π_nash) / (π_monopoly - π_nash): 0 at the
/// competitive profit, 1 at the collusive profit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitGainMetric {
    pub delta: f64,
}

pub fn profit_gain(mean_profit: f64, pi_nash: f64, pi_monopoly: f64) -> Result<ProfitGainMetric> {
    if !(pi_monopoly > pi_nash) {
        return Err(Error::InvalidParameter(format!(
            "profit gain needs pi_monopoly > pi_nash, got {pi_monopoly} <= {pi_nash}"
        )));
    }
    Ok(ProfitGainMetric {
        delta: (mean_profit - pi_nash) / (pi_monopoly - pi_nash),
    })
}

/// One agent's raw per-period profit across a record.
pub fn profit_series(env: &GameEnv, record: &RunRecord, agent: usize) -> Vec<f64> {
    (0..record.periods)
        .map(|t| record.rewards_at(env, t)[agent])
        .collect()
}

/// Per-agent mean raw profit over the trailing `window` periods.
pub fn trailing_mean_profits(env: &GameEnv, record: &RunRecord, window: usize) -> Vec<f64> {
    let n = record.periods;
    let w = window.min(n).max(1);
    let mut sums = vec![0.0; record.n_agents];
    for t in (n - w)..n {
        for (s, r) in sums.iter_mut().zip(record.rewards_at(env, t)) {
            *s += r;
        }
    }
    sums.iter().map(|s| s / w as f64).collect()
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// First period (1-based count) at which the rolling mean over `window`
/// reaches `fraction` of the mean over the final `window` periods.
pub fn periods_to_fraction_of_final(series: &[f64], window: usize, fraction: f64) -> Option<usize> {
    if series.len() < window || window == 0 {
        return None;
    }
    let final_mean: f64 = series[series.len() - window..].iter().sum::<f64>() / window as f64;
    let target = fraction * final_mean;
    let mut rolling: f64 = series[..window].iter().sum();
    if rolling / window as f64 >= target {
        return Some(window);
    }
    for t in window..series.len() {
        rolling += series[t] - series[t - window];
        if rolling / window as f64 >= target {
            return Some(t + 1);
        }
    }
    None
}

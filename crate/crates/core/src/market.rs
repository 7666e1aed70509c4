//! Logit-demand market: demand shares, per-agent profits, symmetric
//! equilibrium prices and the discretized price grid.
//!
//! Market shares follow a multinomial logit over quality-minus-price,
//! with an outside good:
//!
//! ```text
//! q_i = exp((a_i - p_i)/mu) / (sum_j exp((a_j - p_j)/mu) + exp(a0/mu))
//! ```
//!
//! Exponents are shifted by their maximum before normalization so that large
//! quality/price magnitudes cannot overflow.

use crate::error::{Error, Result};

/// Demand-side constants of the market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    /// Number of competing agents (K).
    pub n_agents: usize,
    /// Horizontal differentiation parameter (μ > 0).
    pub mu: f64,
    /// Quality index of the outside good.
    pub a0: f64,
    /// Per-agent quality indexes, length K.
    pub quality: Vec<f64>,
    /// Per-agent marginal costs, length K, all positive.
    pub marginal_cost: Vec<f64>,
}

impl MarketParams {
    pub fn new(
        mu: f64,
        a0: f64,
        quality: Vec<f64>,
        marginal_cost: Vec<f64>,
    ) -> Result<Self> {
        let params = Self {
            n_agents: quality.len(),
            mu,
            a0,
            quality,
            marginal_cost,
        };
        params.validate()?;
        Ok(params)
    }

    /// All agents share one quality index and one marginal cost.
    pub fn symmetric(n_agents: usize, mu: f64, a0: f64, quality: f64, marginal_cost: f64) -> Result<Self> {
        Self::new(mu, a0, vec![quality; n_agents], vec![marginal_cost; n_agents])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidParameter("n_agents must be at least 1".into()));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive and finite, got {}",
                self.mu
            )));
        }
        if !self.a0.is_finite() {
            return Err(Error::InvalidParameter("a0 must be finite".into()));
        }
        if self.quality.len() != self.n_agents {
            return Err(Error::InvalidParameter(format!(
                "quality has length {}, expected {}",
                self.quality.len(),
                self.n_agents
            )));
        }
        if self.marginal_cost.len() != self.n_agents {
            return Err(Error::InvalidParameter(format!(
                "marginal_cost has length {}, expected {}",
                self.marginal_cost.len(),
                self.n_agents
            )));
        }
        if self.quality.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("quality indexes must be finite".into()));
        }
        if self.marginal_cost.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "marginal costs must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// True when all agents share the same quality and marginal cost.
    pub fn is_symmetric(&self) -> bool {
        self.quality.windows(2).all(|w| w[0] == w[1])
            && self.marginal_cost.windows(2).all(|w| w[0] == w[1])
    }
}

/// One-period market outcome for a given price vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketOutcome {
    pub prices: Vec<f64>,
    /// Per-agent market shares q_i.
    pub shares: Vec<f64>,
    /// Share captured by the outside good.
    pub outside_share: f64,
    /// Per-agent profits (p_i - MC_i) * q_i.
    pub profits: Vec<f64>,
}

/// Evaluate demand and profits at a price vector.
pub fn demand(params: &MarketParams, prices: &[f64]) -> Result<MarketOutcome> {
    params.validate()?;
    if prices.len() != params.n_agents {
        return Err(Error::Domain(format!(
            "price vector has length {}, expected {}",
            prices.len(),
            params.n_agents
        )));
    }
    if prices.iter().any(|p| !p.is_finite() || !(*p > 0.0)) {
        return Err(Error::Domain("prices must be finite and positive".into()));
    }

    let mut exponents: Vec<f64> = params
        .quality
        .iter()
        .zip(prices)
        .map(|(a, p)| (a - p) / params.mu)
        .collect();
    let outside_exp = params.a0 / params.mu;
    exponents.push(outside_exp);
    let shift = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let terms: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
    let denom: f64 = terms.iter().sum();
    let shares: Vec<f64> = terms[..params.n_agents].iter().map(|t| t / denom).collect();
    let outside_share = terms[params.n_agents] / denom;

    let profits = shares
        .iter()
        .zip(prices)
        .zip(&params.marginal_cost)
        .map(|((q, p), c)| (p - c) * q)
        .collect();

    Ok(MarketOutcome {
        prices: prices.to_vec(),
        shares,
        outside_share,
        profits,
    })
}

fn require_symmetric(params: &MarketParams) -> Result<(f64, f64)> {
    params.validate()?;
    if !params.is_symmetric() {
        return Err(Error::Unsupported(
            "equilibrium solver requires symmetric quality and marginal cost".into(),
        ));
    }
    Ok((params.quality[0], params.marginal_cost[0]))
}

/// Share of one firm when all K firms post the same price.
///
/// Computed as 1 / (K + exp((a0 - a + p)/mu)), which stays finite for any
/// price.
fn symmetric_share(params: &MarketParams, quality: f64, price: f64) -> f64 {
    let k = params.n_agents as f64;
    1.0 / (k + ((params.a0 - quality + price) / params.mu).exp())
}

const SOLVER_TOL: f64 = 1e-10;
const MAX_FIXED_POINT_ITERS: usize = 10_000;

/// Symmetric Bertrand–Nash price.
///
/// Damped fixed-point iteration on the best-response condition
/// p = c + mu / (1 - q(p)) with damping 0.5, stopping when the update falls
/// below 1e-10.
pub fn nash_price(params: &MarketParams) -> Result<f64> {
    let (quality, cost) = require_symmetric(params)?;
    let mut p = cost + params.mu;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let share = symmetric_share(params, quality, p);
        let target = cost + params.mu / (1.0 - share);
        let next = 0.5 * (p + target);
        if (next - p).abs() < SOLVER_TOL {
            return Ok(next);
        }
        p = next;
    }
    Err(Error::Numerical(format!(
        "nash price iteration did not converge within {MAX_FIXED_POINT_ITERS} steps \
         (last iterate {p})"
    )))
}

/// Symmetric joint-profit-maximizing (monopoly) price.
///
/// The first-order condition reduces to p = c + mu / q_outside(p); the root
/// is found by bisection after geometric bracket expansion.
pub fn monopoly_price(params: &MarketParams) -> Result<f64> {
    let (quality, cost) = require_symmetric(params)?;
    let k = params.n_agents as f64;
    // residual(p) = p - c - mu*(K*E + O)/O, written with a single exponential
    // so the shift scale cancels exactly.
    let residual = |p: f64| -> f64 {
        let ratio = ((quality - p - params.a0) / params.mu).exp();
        p - cost - params.mu * (k * ratio + 1.0)
    };

    let lo = cost;
    let mut hi = cost + params.mu;
    let mut expansions = 0;
    while residual(hi) < 0.0 {
        hi = cost + 2.0 * (hi - cost);
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::Numerical(format!(
                "monopoly price bracket expansion failed (upper bound {hi})"
            )));
        }
    }

    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > SOLVER_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval no longer representable
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-agent profit at the symmetric Nash and monopoly prices.
pub fn equilibrium_profits(params: &MarketParams) -> Result<(f64, f64)> {
    let p_nash = nash_price(params)?;
    let p_mono = monopoly_price(params)?;
    let at_nash = demand(params, &vec![p_nash; params.n_agents])?;
    let at_mono = demand(params, &vec![p_mono; params.n_agents])?;
    Ok((at_nash.profits[0], at_mono.profits[0]))
}

/// Discretized action set spanning the competitive-to-collusive price range.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    points: Vec<f64>,
    /// Extension factor beyond the [nash, monopoly] interval.
    pub xi: f64,
    pub p_nash: f64,
    pub p_monopoly: f64,
}

impl PriceGrid {
    /// Interpolate `m` prices linearly between `p_nash - xi*d` and
    /// `p_monopoly + xi*d`, where `d = p_monopoly - p_nash`.
    pub fn build(p_nash: f64, p_monopoly: f64, xi: f64, m: usize) -> Result<Self> {
        if !(p_monopoly > p_nash) {
            return Err(Error::InvalidParameter(format!(
                "monopoly price {p_monopoly} must exceed nash price {p_nash}"
            )));
        }
        if m < 2 {
            return Err(Error::InvalidParameter(format!("grid size {m} must be at least 2")));
        }
        if !(xi >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid extension {xi} must be non-negative"
            )));
        }
        let delta = p_monopoly - p_nash;
        let lo = p_nash - xi * delta;
        let hi = p_monopoly + xi * delta;
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid lower endpoint {lo} must be positive"
            )));
        }
        let points = (0..m)
            .map(|i| {
                let t = i as f64 / (m - 1) as f64;
                lo * (1.0 - t) + hi * t
            })
            .collect();
        Ok(Self {
            points,
            xi,
            p_nash,
            p_monopoly,
        })
    }

    /// Build the grid directly from market parameters by solving for the two
    /// symmetric equilibrium prices.
    pub fn from_params(params: &MarketParams, xi: f64, m: usize) -> Result<Self> {
        Self::build(nash_price(params)?, monopoly_price(params)?, xi, m)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn price(&self, index: usize) -> f64 {
        self.points[index]
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("grid is never empty")
    }

    /// Index of the grid point closest to `price` (lowest index on ties).
    pub fn nearest_index(&self, price: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - price).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }

    /// Smallest grid index whose price is strictly greater than `price`.
    pub fn first_index_above(&self, price: f64) -> Option<usize> {
        self.points.iter().position(|p| *p > price)
    }
}

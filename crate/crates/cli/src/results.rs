//! Results CSV and run summaries.
//!
//! One row per (replica, period, agent). Numeric fields carry 9 significant
//! digits; the price column is empty for matrix games and p_online is empty
//! whenever the agent has no sampling controller (or it has not produced a
//! value yet). Summary statistics are computed from the quantized row
//! stream, so a summary recomputed from the CSV matches the emitted one.

use std::fmt::Write as _;
use std::path::Path;

use pricegame_core::harness::metrics::{median, profit_gain};
use pricegame_core::harness::{ExperimentOutput, GameEnv};
use pricegame_core::market::equilibrium_profits;
use pricegame_core::Error;

pub const CSV_HEADER: &str = "replica,period,agent,action,price,reward,epsilon,p_online";

/// 9 significant digits, scientific.
pub fn fmt_g9(x: f64) -> String {
    format!("{x:.8e}")
}

/// The value a reader recovers from the CSV representation.
pub fn quantize(x: f64) -> f64 {
    fmt_g9(x).parse().expect("9-digit float round trip")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

/// One emitted CSV row, already quantized.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub replica: usize,
    pub period: usize,
    pub agent: usize,
    pub action: usize,
    pub price: Option<f64>,
    pub reward: f64,
    pub epsilon: Option<f64>,
    pub p_online: Option<f64>,
}

/// Quantized rows of one experiment, in CSV order, striding periods by
/// `every`.
pub fn rows(output: &ExperimentOutput, every: usize) -> Vec<Row> {
    let every = every.max(1);
    let mut out = Vec::new();
    for record in &output.records {
        for period in (0..record.periods).step_by(every) {
            let shaped = output.shaped_rewards_at(record, period);
            for agent in 0..record.n_agents {
                out.push(Row {
                    replica: record.replica,
                    period,
                    agent,
                    action: record.action(period, agent),
                    price: record
                        .price_at(&output.env, period, agent)
                        .map(quantize),
                    reward: quantize(shaped[agent]),
                    epsilon: record.epsilon_at(period, agent).map(quantize),
                    p_online: record.p_online_at(period, agent).map(quantize),
                });
            }
        }
    }
    out
}

pub fn write_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.replica,
            r.period,
            r.agent,
            r.action,
            fmt_opt(r.price),
            fmt_g9(r.reward),
            fmt_opt(r.epsilon),
            fmt_opt(r.p_online),
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>, Error> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "results CSV header mismatch: expected `{CSV_HEADER}`, found `{}`",
                other.unwrap_or_default()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Config(format!(
                "results CSV line {}: expected 8 fields, found {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_req = |s: &str, what: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|_| Error::Config(format!("results CSV line {}: bad {what} `{s}`", i + 2)))
        };
        let parse_opt = |s: &str, what: &str| -> Result<Option<f64>, Error> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_req(s, what).map(Some)
            }
        };
        rows.push(Row {
            replica: parse_req(fields[0], "replica")? as usize,
            period: parse_req(fields[1], "period")? as usize,
            agent: parse_req(fields[2], "agent")? as usize,
            action: parse_req(fields[3], "action")? as usize,
            price: parse_opt(fields[4], "price")?,
            reward: parse_req(fields[5], "reward")?,
            epsilon: parse_opt(fields[6], "epsilon")?,
            p_online: parse_opt(fields[7], "p_online")?,
        });
    }
    Ok(rows)
}

pub fn load_csv(path: &Path) -> Result<Vec<Row>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text)
}

/// Per-agent and per-replica statistics over the trailing window of each
/// replica's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub replicas: usize,
    pub n_agents: usize,
    pub window: usize,
    /// Per agent: mean reward over the trailing window, averaged across
    /// replicas.
    pub tail_rewards: Vec<f64>,
    /// Per agent: median final price across replicas (market runs).
    pub final_prices: Vec<Option<f64>>,
    /// Per agent: profit gain of the tail reward (market runs with solvable
    /// benchmarks).
    pub deltas: Vec<Option<f64>>,
    /// Convergence periods per replica, where detected.
    pub convergence: Vec<Option<usize>>,
}

/// Compute the summary from (quantized) rows. `convergence` comes from the
/// run records because the CSV intentionally does not repeat it per row.
pub fn summarize(
    rows: &[Row],
    window: usize,
    convergence: Vec<Option<usize>>,
    benchmarks: Option<(f64, f64)>,
) -> Result<Summary, Error> {
    if rows.is_empty() {
        return Err(Error::Config("no rows to summarize".into()));
    }
    let n_agents = rows.iter().map(|r| r.agent).max().unwrap() + 1;
    let replicas: Vec<usize> = {
        let mut ids: Vec<usize> = rows.iter().map(|r| r.replica).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };

    let mut tail_sums = vec![0.0; n_agents];
    let mut tail_counts = vec![0usize; n_agents];
    let mut final_prices: Vec<Vec<f64>> = vec![Vec::new(); n_agents];
    for &replica in &replicas {
        let last_period = rows
            .iter()
            .filter(|r| r.replica == replica)
            .map(|r| r.period)
            .max()
            .unwrap();
        let cutoff = last_period.saturating_sub(window.saturating_sub(1));
        for r in rows.iter().filter(|r| r.replica == replica) {
            if r.period >= cutoff {
                tail_sums[r.agent] += r.reward;
                tail_counts[r.agent] += 1;
            }
            if r.period == last_period {
                if let Some(p) = r.price {
                    final_prices[r.agent].push(p);
                }
            }
        }
    }

    let tail_rewards: Vec<f64> = tail_sums
        .iter()
        .zip(&tail_counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN })
        .collect();
    let deltas = tail_rewards
        .iter()
        .map(|r| benchmarks.and_then(|(pi_n, pi_m)| profit_gain(*r, pi_n, pi_m).ok().map(|g| g.delta)))
        .collect();
    Ok(Summary {
        replicas: replicas.len(),
        n_agents,
        window,
        tail_rewards,
        final_prices: final_prices
            .into_iter()
            .map(|p| if p.is_empty() { None } else { Some(median(&p)) })
            .collect(),
        deltas,
        convergence,
    })
}

/// Symmetric profit benchmarks of a market environment, when solvable.
pub fn benchmarks_of(env: &GameEnv) -> Option<(f64, f64)> {
    env.market()
        .and_then(|m| equilibrium_profits(m.params()).ok())
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "replicas {}", self.replicas);
        let _ = writeln!(out, "window {}", self.window);
        let converged: Vec<String> = self
            .convergence
            .iter()
            .map(|c| c.map(|v| v.to_string()).unwrap_or_else(|| "none".into()))
            .collect();
        let _ = writeln!(out, "convergence_periods {}", converged.join(" "));
        for agent in 0..self.n_agents {
            let _ = writeln!(
                out,
                "agent {agent} tail_reward {}",
                fmt_g9(self.tail_rewards[agent])
            );
            if let Some(p) = self.final_prices[agent] {
                let _ = writeln!(out, "agent {agent} final_price {}", fmt_g9(p));
            }
            if let Some(d) = self.deltas[agent] {
                let _ = writeln!(out, "agent {agent} profit_gain {}", fmt_g9(d));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_formatting_round_trips_at_nine_digits() {
        let x = 1.4729266600306;
        let s = fmt_g9(x);
        assert_eq!(s, "1.47292666e0");
        let back: f64 = s.parse().unwrap();
        assert!((back - x).abs() < 5e-9);
        assert_eq!(quantize(back), back, "quantization is idempotent");
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let rows = vec![
            Row {
                replica: 0,
                period: 0,
                agent: 0,
                action: 3,
                price: Some(quantize(1.55)),
                reward: quantize(0.25),
                epsilon: Some(quantize(1.0)),
                p_online: None,
            },
            Row {
                replica: 0,
                period: 0,
                agent: 1,
                action: 5,
                price: None,
                reward: quantize(-2.0),
                epsilon: None,
                p_online: Some(quantize(0.9)),
            },
        ];
        let text = write_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(rows, parsed);
        // Byte-identical on re-emission.
        assert_eq!(text, write_csv(&parsed));
    }

    #[test]
    fn header_mismatch_is_rejected() {
        assert!(parse_csv("nope\n1,2,3").is_err());
        assert!(parse_csv("replica,period,agent,action,price,reward,epsilon,p_online\n1,2\n").is_err());
    }

    #[test]
    fn summary_from_rows_matches_recomputed_summary() {
        let mut rows = Vec::new();
        for period in 0..10usize {
            for agent in 0..2usize {
                rows.push(Row {
                    replica: 0,
                    period,
                    agent,
                    action: agent,
                    price: Some(quantize(1.5 + period as f64 * 0.01)),
                    reward: quantize(0.2 + agent as f64 * 0.1),
                    epsilon: Some(quantize(0.5)),
                    p_online: None,
                });
            }
        }
        let a = summarize(&rows, 5, vec![Some(7)], Some((0.2, 0.3))).unwrap();
        let reparsed = parse_csv(&write_csv(&rows)).unwrap();
        let b = summarize(&reparsed, 5, vec![Some(7)], Some((0.2, 0.3))).unwrap();
        assert_eq!(a, b);
        assert!((a.tail_rewards[0] - 0.2).abs() < 1e-9);
        assert!((a.deltas[0].unwrap() - 0.0).abs() < 1e-9);
        assert!((a.deltas[1].unwrap() - 1.0).abs() < 1e-9);
    }
}

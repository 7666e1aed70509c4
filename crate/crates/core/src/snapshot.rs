//! Plain-text snapshots of learned policies.
//!
//! Snapshots are line-oriented: a magic/version header, the dimensions, then
//! row-major values. Floats are written with Rust's shortest round-trip
//! formatting, so save → load reproduces every entry bit for bit.
//!
//! ```text
//! pricegame-qtable v1
//! states 225
//! actions 15
//! <15 values per line, one line per state>
//! ```
//!
//! ```text
//! pricegame-valuenet v1
//! widths 20 64 64 15
//! layer 0
//! <one weight row per output unit>
//! bias
//! <one line of biases>
//! layer 1
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::agents::net::ValueNet;
use crate::agents::tabular::QTable;
use crate::error::{Error, Result};

const QTABLE_MAGIC: &str = "pricegame-qtable v1";
const VALUENET_MAGIC: &str = "pricegame-valuenet v1";

/// A serializable learned policy.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSnapshot {
    Table(QTable),
    Net(ValueNet),
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

fn write_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| bad(format!("bad float `{tok}`"))))
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(bad(format!(
            "expected {expected} values on a line, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn qtable_to_string(table: &QTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{QTABLE_MAGIC}");
    let _ = writeln!(out, "states {}", table.n_states());
    let _ = writeln!(out, "actions {}", table.n_actions());
    for s in 0..table.n_states() {
        write_floats(&mut out, table.row(s));
    }
    out
}

pub fn qtable_from_str(text: &str) -> Result<QTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))?;
    if header.trim() != QTABLE_MAGIC {
        return Err(bad(format!("expected `{QTABLE_MAGIC}` header, found `{header}`")));
    }
    let states = parse_dim(lines.next(), "states")?;
    let actions = parse_dim(lines.next(), "actions")?;
    let mut values = Vec::with_capacity(states * actions);
    for _ in 0..states {
        let line = lines.next().ok_or_else(|| bad("truncated table body"))?;
        values.extend(parse_floats(line, actions)?);
    }
    QTable::from_values(states, actions, values)
}

fn parse_dim(line: Option<&str>, key: &str) -> Result<usize> {
    let line = line.ok_or_else(|| bad(format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => v
            .parse::<usize>()
            .map_err(|_| bad(format!("bad `{key}` value `{v}`"))),
        _ => Err(bad(format!("malformed `{key}` line: `{line}`"))),
    }
}

pub fn net_to_string(net: &ValueNet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{VALUENET_MAGIC}");
    let _ = write!(out, "widths");
    for w in net.widths() {
        let _ = write!(out, " {w}");
    }
    out.push('\n');
    for layer in 0..net.n_layers() {
        let _ = writeln!(out, "layer {layer}");
        let (rows, cols) = net.layer_shape(layer);
        for r in 0..rows {
            write_floats(&mut out, &net.layer_weights(layer)[r * cols..(r + 1) * cols]);
        }
        let _ = writeln!(out, "bias");
        write_floats(&mut out, net.layer_biases(layer));
    }
    out
}

pub fn net_from_str(text: &str) -> Result<ValueNet> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))?;
    if header.trim() != VALUENET_MAGIC {
        return Err(bad(format!("expected `{VALUENET_MAGIC}` header, found `{header}`")));
    }
    let widths_line = lines.next().ok_or_else(|| bad("missing widths line"))?;
    let mut parts = widths_line.split_whitespace();
    if parts.next() != Some("widths") {
        return Err(bad(format!("malformed widths line: `{widths_line}`")));
    }
    let widths: Vec<usize> = parts
        .map(|tok| tok.parse::<usize>().map_err(|_| bad(format!("bad width `{tok}`"))))
        .collect::<Result<_>>()?;
    let mut net = ValueNet::zeros(&widths)?;
    for layer in 0..net.n_layers() {
        let tag = lines.next().ok_or_else(|| bad("truncated net body"))?;
        if tag.trim() != format!("layer {layer}") {
            return Err(bad(format!("expected `layer {layer}`, found `{tag}`")));
        }
        let (rows, cols) = net.layer_shape(layer);
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| bad("truncated weight rows"))?;
            weights.extend(parse_floats(line, cols)?);
        }
        let bias_tag = lines.next().ok_or_else(|| bad("missing bias tag"))?;
        if bias_tag.trim() != "bias" {
            return Err(bad(format!("expected `bias`, found `{bias_tag}`")));
        }
        let bias_line = lines.next().ok_or_else(|| bad("missing bias values"))?;
        let biases = parse_floats(bias_line, rows)?;
        net.set_layer(layer, weights, biases)?;
    }
    Ok(net)
}

pub fn save(path: &Path, snapshot: &AgentSnapshot) -> Result<()> {
    let text = match snapshot {
        AgentSnapshot::Table(t) => qtable_to_string(t),
        AgentSnapshot::Net(n) => net_to_string(n),
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<AgentSnapshot> {
    let text = fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or_default();
    match first.trim() {
        QTABLE_MAGIC => Ok(AgentSnapshot::Table(qtable_from_str(&text)?)),
        VALUENET_MAGIC => Ok(AgentSnapshot::Net(net_from_str(&text)?)),
        other => Err(bad(format!("unrecognized snapshot header `{other}`"))),
    }
}

pub fn load_qtable(path: &Path) -> Result<QTable> {
    match load(path)? {
        AgentSnapshot::Table(t) => Ok(t),
        AgentSnapshot::Net(_) => Err(bad("expected a table snapshot, found a network".to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn qtable_round_trip_is_exact() {
        let mut rng = rng_for(11, 0);
        let table = QTable::uniform(7, 4, -3.5, 2.5, &mut rng).unwrap();
        let restored = qtable_from_str(&qtable_to_string(&table)).unwrap();
        assert_eq!(table, restored);
    }

    #[test]
    fn net_round_trip_is_exact() {
        let mut rng = rng_for(12, 0);
        let net = ValueNet::new(&[4, 8, 3], &mut rng).unwrap();
        let restored = net_from_str(&net_to_string(&net)).unwrap();
        assert_eq!(net, restored);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("incumbent.snapshot");
        let mut rng = rng_for(13, 0);
        let table = QTable::uniform(9, 3, 0.0, 1.0, &mut rng).unwrap();
        save(&path, &AgentSnapshot::Table(table.clone())).unwrap();
        match load(&path).unwrap() {
            AgentSnapshot::Table(t) => assert_eq!(t, table),
            _ => panic!("wrong snapshot kind"),
        }
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        assert!(qtable_from_str("nonsense").is_err());
        assert!(qtable_from_str("pricegame-qtable v1\nstates 2\nactions 2\n1 2\n").is_err());
        assert!(qtable_from_str("pricegame-qtable v1\nstates 2\nactions 2\n1 2\n3\n").is_err());
        assert!(net_from_str("pricegame-valuenet v1\nwidths 2\n").is_err());
        assert!(load(Path::new("/nonexistent/snapshot")).is_err());
    }
}

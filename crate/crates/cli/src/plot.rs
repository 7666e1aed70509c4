//! Deterministic SVG charts: fixed viewport, fixed palette, no timestamps.
//! The same input bytes always produce the same output bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pricegame_core::Error;

use crate::results::Row;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

const AGENT_COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
const REF_COLORS: [&str; 4] = ["#d62728", "#2ca02c", "#ff7f0e", "#17becf"];
const BAND_FILL: &str = "#d62728";
const P_ONLINE_COLOR: &str = "#555555";

/// A labeled horizontal reference (benchmark) line.
#[derive(Debug, Clone)]
pub struct RefLine {
    pub label: String,
    pub value: f64,
}

/// A shaded period window (forced-intervention band).
#[derive(Debug, Clone, Copy)]
pub struct Band {
    pub start: f64,
    pub end: f64,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, values: impl Iterator<Item = f64>, refs: &[RefLine]) -> Self {
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for v in values.chain(refs.iter().map(|r| r.value)) {
            if v.is_finite() {
                y_min = y_min.min(v);
                y_max = y_max.max(v);
            }
        }
        if !y_min.is_finite() || !y_max.is_finite() {
            y_min = 0.0;
            y_max = 1.0;
        }
        if y_max - y_min < 1e-12 {
            y_min -= 0.5;
            y_max += 0.5;
        }
        let pad = 0.06 * (y_max - y_min);
        Self {
            x_min,
            x_max: if (x_max - x_min).abs() < 1e-12 { x_min + 1.0 } else { x_max },
            y_min: y_min - pad,
            y_max: y_max + pad,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">"#
    );
    let _ = write!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16" fill="#222">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    // Gridlines and tick labels, 5 intervals each.
    for i in 0..=5 {
        let ty = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 5.0;
        let y = frame.y(ty);
        let _ = write!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#eeeeee" stroke-width="1"/>"#,
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#444">{ty:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
        let tx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 5.0;
        let x = frame.x(tx);
        let _ = write!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#444">{tx:.0}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 16.0
        );
    }
    let _ = write!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333" stroke-width="1"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    );
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#222">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = write!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#222" transform="rotate(-90 18 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn ref_lines(out: &mut String, frame: &Frame, refs: &[RefLine]) {
    for (i, r) in refs.iter().enumerate() {
        let y = frame.y(r.value);
        let color = REF_COLORS[i % REF_COLORS.len()];
        let _ = write!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="1.2" stroke-dasharray="6,4"/>"#,
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN_RIGHT - 4.0,
            y - 4.0,
            escape(&r.label)
        );
    }
}

fn band(out: &mut String, frame: &Frame, band: &Band) {
    let x0 = frame.x(band.start.max(frame.x_min));
    let x1 = frame.x(band.end.min(frame.x_max));
    if x1 > x0 {
        let _ = write!(
            out,
            r#"<rect x="{x0:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{BAND_FILL}" fill-opacity="0.15"/>"#,
            MARGIN_TOP,
            x1 - x0,
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        );
    }
}

fn polyline(out: &mut String, frame: &Frame, points: &[(f64, f64)], color: &str, dashed: bool) {
    if points.is_empty() {
        return;
    }
    let mut path = String::with_capacity(points.len() * 12);
    for (x, y) in points {
        let _ = write!(path, "{:.1},{:.1} ", frame.x(*x), frame.y(*y));
    }
    let dash = if dashed { r#" stroke-dasharray="3,3""# } else { "" };
    let _ = write!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
        path.trim_end()
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let x = MARGIN_LEFT + 10.0 + 150.0 * i as f64;
        let y = MARGIN_TOP + 14.0;
        let _ = write!(
            out,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
            x + 18.0
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#222">{}</text>"#,
            x + 22.0,
            y + 4.0,
            escape(label)
        );
    }
}

/// Per-period cross-replica means of one column.
fn period_means(rows: &[Row], value: impl Fn(&Row) -> Option<f64>) -> BTreeMap<usize, Vec<(f64, usize)>> {
    // period -> per-agent (sum, count)
    let n_agents = rows.iter().map(|r| r.agent).max().map_or(0, |a| a + 1);
    let mut acc: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = value(r) {
            let slot = acc.entry(r.period).or_insert_with(|| vec![(0.0, 0); n_agents]);
            slot[r.agent].0 += v;
            slot[r.agent].1 += 1;
        }
    }
    acc
}

fn downsampled_series(
    means: &BTreeMap<usize, Vec<(f64, usize)>>,
    agent: usize,
) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = means
        .iter()
        .filter_map(|(period, slots)| {
            let (sum, count) = slots.get(agent)?;
            if *count > 0 {
                Some((*period as f64, sum / *count as f64))
            } else {
                None
            }
        })
        .collect();
    let stride = (pts.len() / 1200).max(1);
    pts.into_iter().step_by(stride).collect()
}

fn n_agents_of(rows: &[Row]) -> usize {
    rows.iter().map(|r| r.agent).max().map_or(0, |a| a + 1)
}

/// Mean reward per period across replicas, one line per agent.
pub fn reward_trajectory(rows: &[Row], refs: &[RefLine], title: &str) -> Result<String, Error> {
    if rows.is_empty() {
        return Err(Error::Config("no rows to plot".into()));
    }
    let means = period_means(rows, |r| Some(r.reward));
    let n_agents = n_agents_of(rows);
    let series: Vec<Vec<(f64, f64)>> = (0..n_agents)
        .map(|a| downsampled_series(&means, a))
        .collect();

    let x_max = *means.keys().last().unwrap() as f64;
    let frame = Frame::new(
        *means.keys().next().unwrap() as f64,
        x_max,
        series.iter().flatten().map(|(_, y)| *y),
        refs,
    );
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, &frame, "period", "mean reward");
    ref_lines(&mut out, &frame, refs);
    let mut entries = Vec::new();
    for (a, pts) in series.iter().enumerate() {
        let color = AGENT_COLORS[a % AGENT_COLORS.len()];
        polyline(&mut out, &frame, pts, color, false);
        entries.push((format!("agent {a}"), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>");
    Ok(out)
}

/// Mean price per period with the forced window shaded.
pub fn price_response(
    rows: &[Row],
    shaded: Option<Band>,
    refs: &[RefLine],
    title: &str,
) -> Result<String, Error> {
    let means = period_means(rows, |r| r.price);
    if means.is_empty() {
        return Err(Error::Config("no price data to plot (matrix-game results?)".into()));
    }
    let n_agents = n_agents_of(rows);
    let series: Vec<Vec<(f64, f64)>> = (0..n_agents)
        .map(|a| downsampled_series(&means, a))
        .collect();
    let frame = Frame::new(
        *means.keys().next().unwrap() as f64,
        *means.keys().last().unwrap() as f64,
        series.iter().flatten().map(|(_, y)| *y),
        refs,
    );
    let mut out = String::new();
    svg_open(&mut out, title);
    if let Some(b) = shaded {
        band(&mut out, &frame, &b);
    }
    axes(&mut out, &frame, "period", "mean price");
    ref_lines(&mut out, &frame, refs);
    let mut entries = Vec::new();
    for (a, pts) in series.iter().enumerate() {
        let color = AGENT_COLORS[a % AGENT_COLORS.len()];
        polyline(&mut out, &frame, pts, color, false);
        entries.push((format!("agent {a}"), color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>");
    Ok(out)
}

/// Prices plus the online-sampling probability (scaled onto the price axis)
/// with the forced window shaded.
pub fn dual_buffer_timeline(
    rows: &[Row],
    shaded: Option<Band>,
    refs: &[RefLine],
    title: &str,
) -> Result<String, Error> {
    let means = period_means(rows, |r| r.price);
    if means.is_empty() {
        return Err(Error::Config("no price data to plot".into()));
    }
    let n_agents = n_agents_of(rows);
    let series: Vec<Vec<(f64, f64)>> = (0..n_agents)
        .map(|a| downsampled_series(&means, a))
        .collect();
    let frame = Frame::new(
        *means.keys().next().unwrap() as f64,
        *means.keys().last().unwrap() as f64,
        series.iter().flatten().map(|(_, y)| *y),
        refs,
    );
    let mut out = String::new();
    svg_open(&mut out, title);
    if let Some(b) = shaded {
        band(&mut out, &frame, &b);
    }
    axes(&mut out, &frame, "period", "mean price");
    ref_lines(&mut out, &frame, refs);
    let mut entries = Vec::new();
    for (a, pts) in series.iter().enumerate() {
        let color = AGENT_COLORS[a % AGENT_COLORS.len()];
        polyline(&mut out, &frame, pts, color, false);
        entries.push((format!("agent {a}"), color));
    }
    // p_online rendered on a 0..1 scale mapped to the frame's vertical span.
    let p_means = period_means(rows, |r| r.p_online);
    let mut p_pts = Vec::new();
    for (period, slots) in &p_means {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (s, c) in slots {
            sum += s;
            count += c;
        }
        if count > 0 {
            let p = sum / count as f64;
            p_pts.push((
                *period as f64,
                frame.y_min + p * (frame.y_max - frame.y_min),
            ));
        }
    }
    let stride = (p_pts.len() / 1200).max(1);
    let p_pts: Vec<(f64, f64)> = p_pts.into_iter().step_by(stride).collect();
    if !p_pts.is_empty() {
        polyline(&mut out, &frame, &p_pts, P_ONLINE_COLOR, true);
        entries.push(("p_online (0-1)".to_string(), P_ONLINE_COLOR));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>");
    Ok(out)
}

/// One row of a sweep summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta2: f64,
    pub agent: usize,
    pub median_profit: f64,
    pub delta: f64,
}

pub const SWEEP_HEADER: &str = "beta2,agent,median_profit,delta";

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, Error> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "sweep CSV header mismatch: expected `{SWEEP_HEADER}`, found `{}`",
                other.unwrap_or_default()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Config(format!("sweep CSV line {}: expected 4 fields", i + 2)));
        }
        let num = |s: &str| -> Result<f64, Error> {
            s.parse()
                .map_err(|_| Error::Config(format!("sweep CSV line {}: bad number `{s}`", i + 2)))
        };
        rows.push(SweepRow {
            beta2: num(f[0])?,
            agent: num(f[1])? as usize,
            median_profit: num(f[2])?,
            delta: num(f[3])?,
        });
    }
    Ok(rows)
}

/// Grouped bars of post-convergence profits per exploration decay setting.
pub fn sweep_bars(rows: &[SweepRow], refs: &[RefLine], title: &str) -> Result<String, Error> {
    if rows.is_empty() {
        return Err(Error::Config("no sweep rows to plot".into()));
    }
    let mut betas: Vec<f64> = rows.iter().map(|r| r.beta2).collect();
    betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    betas.dedup();
    let n_agents = rows.iter().map(|r| r.agent).max().unwrap() + 1;

    let frame = Frame::new(
        0.0,
        betas.len() as f64,
        rows.iter().map(|r| r.median_profit).chain(std::iter::once(0.0)),
        refs,
    );
    let mut out = String::new();
    svg_open(&mut out, title);
    // Bars first, then the frame so gridlines stay behind labels.
    let group_width = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / betas.len() as f64;
    let bar_width = group_width * 0.8 / n_agents as f64;
    for (gi, beta) in betas.iter().enumerate() {
        for agent in 0..n_agents {
            if let Some(row) = rows.iter().find(|r| r.beta2 == *beta && r.agent == agent) {
                let x = MARGIN_LEFT + group_width * (gi as f64 + 0.1) + bar_width * agent as f64;
                let y0 = frame.y(row.median_profit.max(0.0));
                let y1 = frame.y(0.0f64.min(row.median_profit).max(frame.y_min));
                let color = AGENT_COLORS[agent % AGENT_COLORS.len()];
                let _ = write!(
                    out,
                    r#"<rect x="{x:.1}" y="{y0:.1}" width="{bar_width:.1}" height="{:.1}" fill="{color}" fill-opacity="0.85"/>"#,
                    (y1 - y0).abs()
                );
            }
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#444">{beta:e}</text>"#,
            MARGIN_LEFT + group_width * (gi as f64 + 0.5),
            HEIGHT - MARGIN_BOTTOM + 16.0
        );
    }
    // Vertical frame without x tick labels (categories drawn above).
    for i in 0..=5 {
        let ty = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 5.0;
        let y = frame.y(ty);
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#444">{ty:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = write!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333" stroke-width="1"/>"#,
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    );
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#222">exploration decay of agent 1</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0
    );
    ref_lines(&mut out, &frame, refs);
    let entries: Vec<(String, &str)> = (0..n_agents)
        .map(|a| (format!("agent {a}"), AGENT_COLORS[a % AGENT_COLORS.len()]))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::results::quantize;

    fn sample_rows() -> Vec<Row> {
        let mut rows = Vec::new();
        for replica in 0..2usize {
            for period in 0..50usize {
                for agent in 0..2usize {
                    rows.push(Row {
                        replica,
                        period,
                        agent,
                        action: agent,
                        price: Some(quantize(1.5 + 0.002 * period as f64)),
                        reward: quantize(0.2 + 0.001 * (period as f64) + 0.01 * agent as f64),
                        epsilon: Some(1.0),
                        p_online: if agent == 1 { Some(0.2) } else { None },
                    });
                }
            }
        }
        rows
    }

    #[test]
    fn charts_are_byte_deterministic() {
        let rows = sample_rows();
        let refs = [
            RefLine {
                label: "competitive".into(),
                value: 0.22,
            },
            RefLine {
                label: "collusive".into(),
                value: 0.34,
            },
        ];
        let a = reward_trajectory(&rows, &refs, "rewards").unwrap();
        let b = reward_trajectory(&rows, &refs, "rewards").unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>"));
        assert!(a.contains("competitive"));

        let c = price_response(
            &rows,
            Some(Band { start: 10.0, end: 12.0 }),
            &refs,
            "response",
        )
        .unwrap();
        assert_eq!(
            c,
            price_response(&rows, Some(Band { start: 10.0, end: 12.0 }), &refs, "response").unwrap()
        );
        assert!(c.contains("fill-opacity=\"0.15\""), "shaded band missing");

        let d = dual_buffer_timeline(&rows, None, &refs, "timeline").unwrap();
        assert!(d.contains("p_online"));
    }

    #[test]
    fn sweep_chart_parses_and_renders() {
        let text = format!(
            "{SWEEP_HEADER}\n1e-5,0,0.33,0.9\n1e-5,1,0.32,0.85\n1e-4,0,0.35,1.0\n1e-4,1,0.3,0.7\n"
        );
        let rows = parse_sweep_csv(&text).unwrap();
        assert_eq!(rows.len(), 4);
        let svg = sweep_bars(
            &rows,
            &[RefLine {
                label: "competitive".into(),
                value: 0.2229,
            }],
            "sweep",
        )
        .unwrap();
        assert!(svg.contains("<rect"));
        assert!(parse_sweep_csv("bad header\n").is_err());
    }

    #[test]
    fn matrix_rows_cannot_make_price_charts() {
        let mut rows = sample_rows();
        for r in &mut rows {
            r.price = None;
        }
        assert!(price_response(&rows, None, &[], "t").is_err());
        assert!(reward_trajectory(&rows, &[], "t").is_ok());
    }
}

//! CSV, JSON and SVG renderings of a result record.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::config::ExperimentKind;
use crate::error::Result;
use crate::experiments::{fmt_value, ResultRecord};
use crate::svg::{render_svg, Series, Style};

/// Key columns, then `lhs,rhs,slack,verdict,restarts_used,wall_ms`.
/// `wall_ms` is left empty unless `timings` is set.
pub fn to_csv(record: &ResultRecord, timings: bool) -> String {
    let mut out = String::new();
    let keys: Vec<&str> = record.points.first().map(|p| p.keys.iter().map(|(k, _)| k.as_str()).collect()).unwrap_or_default();
    let mut header: Vec<&str> = keys.clone();
    header.extend(["lhs", "rhs", "slack", "verdict", "restarts_used", "wall_ms"]);
    let _ = writeln!(out, "{}", header.join(","));
    for p in &record.points {
        let mut cells: Vec<String> = p.keys.iter().map(|(_, v)| v.clone()).collect();
        cells.push(fmt_value(p.report.lhs));
        cells.push(fmt_value(p.report.rhs));
        cells.push(fmt_value(p.report.slack));
        cells.push(p.report.verdict.label().to_string());
        cells.push(p.restarts_used().map(|r| format!("{}", r as u64)).unwrap_or_default());
        cells.push(match (timings, p.wall_ms) {
            (true, Some(ms)) => ms.to_string(),
            _ => String::new(),
        });
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn to_json(record: &ResultRecord, timings: bool) -> String {
    let r = if timings { record.clone() } else { record.without_timings() };
    let mut s = serde_json::to_string_pretty(&r).expect("serializable");
    s.push('\n');
    s
}

/// `lhs` and `rhs` points of one group.
type GroupPoints = (Vec<(f64, f64)>, Vec<(f64, f64)>);

/// Plots `lhs` and finite `rhs` against the first numeric key column,
/// one pair of series per combination of the other key columns.
pub fn to_svg(record: &ResultRecord) -> Result<String> {
    let x_key = if record.experiment == ExperimentKind::GamesMonogamy { "n" } else { "lambda" };
    let mut groups: BTreeMap<String, GroupPoints> = BTreeMap::new();
    for p in &record.points {
        let Some(x) = p.keys.iter().find(|(k, _)| k == x_key).and_then(|(_, v)| v.parse::<f64>().ok()) else {
            continue;
        };
        let group = p
            .keys
            .iter()
            .filter(|(k, _)| k != x_key && !(record.experiment == ExperimentKind::HeraldedAdditivity && k == "k"))
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let entry = groups.entry(group).or_default();
        entry.0.push((x, p.report.lhs));
        if p.report.rhs.is_finite() {
            entry.1.push((x, p.report.rhs));
        }
    }
    let mut series = Vec::new();
    for (group, (mut lhs, mut rhs)) in groups {
        lhs.sort_by(|a, b| a.0.total_cmp(&b.0));
        rhs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let prefix = if group.is_empty() { String::new() } else { format!("{group} ") };
        series.push(Series { label: format!("{prefix}lhs"), points: lhs });
        if !rhs.is_empty() {
            series.push(Series { label: format!("{prefix}rhs"), points: rhs });
        }
    }
    let style = Style {
        title: format!("{} (seed {})", record.experiment, record.seed),
        x_label: x_key.to_string(),
        y_label: "bits".into(),
        ..Style::default()
    };
    render_svg(&series, &style)
}

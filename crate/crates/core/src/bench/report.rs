//! Text tables, CSV files and SVG line charts from a summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::summary::{summarize, SuiteSummary};
use super::{read_records, BenchError};
use crate::model::{EnvKind, FailureReason, Method};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Methods by tasks success-rate table.
    pub table: String,
    pub cells_csv: String,
    pub difficulty_csv: String,
    pub rounds_csv: String,
    pub difficulty_svg: String,
    pub rounds_svg: String,
}

/// One line of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, rate)` points in x order.
    pub points: Vec<(f64, f64)>,
}

impl Report {
    pub const FILES: [&'static str; 6] = [
        "table.txt",
        "cells.csv",
        "difficulty.csv",
        "rounds.csv",
        "difficulty.svg",
        "rounds.svg",
    ];

    pub fn write_to(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(super::io_err(dir))?;
        let bodies = [
            &self.table,
            &self.cells_csv,
            &self.difficulty_csv,
            &self.rounds_csv,
            &self.difficulty_svg,
            &self.rounds_svg,
        ];
        for (name, body) in Self::FILES.iter().zip(bodies) {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(super::io_err(&path))?;
        }
        Ok(())
    }
}

/// Reads a record file and builds its report.
pub fn report(records: &Path) -> Result<Report, BenchError> {
    Ok(build_report(&summarize(&read_records(records)?)))
}

fn method_label(method: Method, max_rounds: u32, several_caps: bool) -> String {
    if several_caps {
        format!("{} ({max_rounds} rounds)", method.display_name())
    } else {
        method.display_name().to_string()
    }
}

fn caps_per_method(s: &SuiteSummary) -> BTreeMap<Method, BTreeSet<u32>> {
    let mut m: BTreeMap<Method, BTreeSet<u32>> = BTreeMap::new();
    for c in &s.cells {
        m.entry(c.method).or_default().insert(c.max_rounds);
    }
    m
}

pub fn build_report(s: &SuiteSummary) -> Report {
    Report {
        table: table(s),
        cells_csv: cells_csv(s),
        difficulty_csv: difficulty_csv(s),
        rounds_csv: rounds_csv(s),
        difficulty_svg: line_chart("Success rate by difficulty bucket", "difficulty bucket", &difficulty_series(s)),
        rounds_svg: line_chart("Success rate by round cap", "max rounds", &round_series(s)),
    }
}

fn table(s: &SuiteSummary) -> String {
    let envs: Vec<EnvKind> = EnvKind::ALL
        .into_iter()
        .filter(|e| s.cells.iter().any(|c| c.env == *e))
        .collect();
    let caps = caps_per_method(s);
    let mut rows: Vec<(String, Vec<Option<f64>>, f64)> = Vec::new();
    for (method, set) in &caps {
        for &cap in set {
            let rates: Vec<Option<f64>> = envs
                .iter()
                .map(|e| {
                    s.cells
                        .iter()
                        .find(|c| c.env == *e && c.method == *method && c.max_rounds == cap)
                        .map(|c| c.success_rate)
                })
                .collect();
            let present: Vec<f64> = rates.iter().flatten().copied().collect();
            let avg = if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            rows.push((method_label(*method, cap, set.len() > 1), rates, avg));
        }
    }
    let name_w = rows.iter().map(|r| r.0.len()).chain([6]).max().unwrap_or(6);
    let col_w = envs.iter().map(|e| e.display_name().len()).chain([7]).max().unwrap_or(7);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Method");
    for e in &envs {
        let _ = write!(out, "  {:>col_w$}", e.display_name());
    }
    let _ = writeln!(out, "  {:>col_w$}", "Average");
    for (name, rates, avg) in &rows {
        let _ = write!(out, "{name:<name_w$}");
        for r in rates {
            match r {
                Some(v) => {
                    let _ = write!(out, "  {:>col_w$}", format!("{:.1}%", v * 100.0));
                }
                None => {
                    let _ = write!(out, "  {:>col_w$}", "-");
                }
            }
        }
        let _ = writeln!(out, "  {:>col_w$}", format!("{:.1}%", avg * 100.0));
    }
    out
}

fn cells_csv(s: &SuiteSummary) -> String {
    let mut out = String::from("env,method,max_rounds,samples,successes,success_rate");
    for f in FailureReason::ALL {
        let _ = write!(out, ",{}", f.as_str());
    }
    out.push_str(",method_errors,mean_rounds,mean_llm_calls,mean_wall_clock\n");
    for c in &s.cells {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            c.env.as_str(),
            c.method.as_str(),
            c.max_rounds,
            c.samples,
            c.successes,
            c.success_rate
        );
        for f in FailureReason::ALL {
            let _ = write!(out, ",{}", c.failures.get(f.as_str()).copied().unwrap_or(0));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            c.method_errors, c.mean_rounds, c.mean_llm_calls, c.mean_wall_clock
        );
    }
    out
}

fn difficulty_csv(s: &SuiteSummary) -> String {
    let mut out = String::from("env,method,max_rounds,bucket,samples,successes,success_rate\n");
    for b in &s.by_bucket {
        let bucket = b.bucket.map_or_else(|| "custom".to_string(), |i| i.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{bucket},{},{},{}",
            b.env.as_str(),
            b.method.as_str(),
            b.max_rounds,
            b.samples,
            b.successes,
            b.success_rate
        );
    }
    out
}

fn rounds_csv(s: &SuiteSummary) -> String {
    let mut out = String::from("method,max_rounds,samples,successes,success_rate\n");
    for r in &s.by_round_cap {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.method.as_str(),
            r.max_rounds,
            r.samples,
            r.successes,
            r.success_rate
        );
    }
    out
}

/// Success rate per default difficulty bucket, pooled over tasks, one
/// series per method and round cap.
pub fn difficulty_series(s: &SuiteSummary) -> Vec<Series> {
    let caps = caps_per_method(s);
    let mut acc: BTreeMap<(Method, u32), BTreeMap<usize, (usize, usize)>> = BTreeMap::new();
    for b in &s.by_bucket {
        let Some(i) = b.bucket else { continue };
        let e = acc.entry((b.method, b.max_rounds)).or_default().entry(i).or_default();
        e.0 += b.samples;
        e.1 += b.successes;
    }
    acc.into_iter()
        .map(|((m, cap), pts)| Series {
            name: method_label(m, cap, caps.get(&m).is_some_and(|c| c.len() > 1)),
            points: pts
                .into_iter()
                .map(|(i, (n, k))| (i as f64, k as f64 / n as f64))
                .collect(),
        })
        .collect()
}

/// Success rate per round cap, one series per method.
pub fn round_series(s: &SuiteSummary) -> Vec<Series> {
    let mut acc: BTreeMap<Method, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &s.by_round_cap {
        acc.entry(r.method)
            .or_default()
            .push((r.max_rounds as f64, r.success_rate));
    }
    acc.into_iter()
        .map(|(m, points)| Series {
            name: m.display_name().to_string(),
            points,
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A plain SVG line chart with the y axis fixed to [0, 1]. Each point
/// carries its exact rate in a `data-rate` attribute.
pub fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 200.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let (x0, x1) = match (xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        (Some(a), Some(b)) if b > a => (a, b),
        (Some(a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - y) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    for k in 0..=4 {
        let y = k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="#ddd"/><text x="{2}" y="{3}" text-anchor="end">{4}%</text>"##,
            sy(y),
            left + pw,
            left - 6.0,
            sy(y) + 4.0,
            k * 25
        );
    }
    let ticks: BTreeSet<u64> = xs.iter().map(|x| x.to_bits()).collect();
    for t in ticks {
        let x = f64::from_bits(t);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#,
            sx(x),
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{0}" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let name = escape(&s.name);
        let pts: Vec<String> = s.points.iter().map(|(x, y)| format!("{},{}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for (x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="3.5" fill="{color}" data-series="{name}" data-x="{x}" data-rate="{y}"/>"#,
                sx(*x),
                sy(*y)
            );
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{name}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

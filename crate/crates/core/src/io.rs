//! Output formats: CSV and JSON point files, the JSON stats sidecar, and SVG
//! renderings of two-dimensional configurations.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::RunStats;
use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::process::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    /// Two dimensions only.
    Svg,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::invalid("format", format!("unknown format `{other}`"))),
        }
    }
}

/// CSV with header `x0,…,x{d−1}` and every coordinate written with 17
/// significant digits, which round-trips `f64` exactly.
pub fn write_csv(points: &PointSet) -> String {
    let dim = points.dim();
    let mut out = (0..dim).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in points.iter() {
        for (k, c) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{c:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<PointSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        reason: "missing header".into(),
    })?;
    let dim = header.split(',').count();
    for (k, name) in header.split(',').enumerate() {
        if name.trim() != format!("x{k}") {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unexpected column `{name}`"),
            });
        }
    }
    let mut points = PointSet::new(dim)?;
    let mut buf = Vec::with_capacity(dim);
    for (idx, line) in lines {
        buf.clear();
        for field in line.split(',') {
            buf.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                reason: e.to_string(),
            })?);
        }
        points.push(&buf).map_err(|e| Error::Parse {
            line: idx + 1,
            reason: e.to_string(),
        })?;
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointsDocument {
    pub dim: usize,
    pub radius: f64,
    pub lambda: f64,
    pub points: Vec<Vec<f64>>,
}

impl PointsDocument {
    pub fn new(points: &PointSet, params: &ModelParams) -> Self {
        PointsDocument {
            dim: points.dim(),
            radius: params.radius(),
            lambda: params.lambda(),
            points: points.iter().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn to_point_set(&self) -> Result<PointSet> {
        PointSet::from_points(self.dim, &self.points)
    }
}

/// Sidecar written next to a sampled point file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsSidecar {
    pub seed: u64,
    pub dim: usize,
    pub radius: f64,
    pub lambda: f64,
    pub intensity: f64,
    pub iterations: usize,
    pub bad_pair_trace: Vec<usize>,
    pub initial_count: usize,
    pub final_count: usize,
    pub density: f64,
    pub total_generated: usize,
    pub total_accepted: usize,
    /// The only field that differs between replays of the same seed.
    pub wall_time_s: f64,
}

impl StatsSidecar {
    pub fn new(seed: u64, params: &ModelParams, stats: &RunStats, density: f64) -> Self {
        StatsSidecar {
            seed,
            dim: params.dim(),
            radius: params.radius(),
            lambda: params.lambda(),
            intensity: params.intensity(),
            iterations: stats.iterations,
            bad_pair_trace: stats.bad_pair_trace.clone(),
            initial_count: stats.initial_count,
            final_count: stats.final_count,
            density,
            total_generated: stats.total_generated(),
            total_accepted: stats.total_accepted(),
            wall_time_s: stats.wall_time_s,
        }
    }
}

fn px(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// SVG 1.1 rendering of a planar configuration on a `canvas_px` square.
///
/// The y axis points up: `(x, y)` is drawn at `(x·W, (1 − y)·W)`. Disks keep
/// their true radius `r·W` and may overhang the frame, where the viewport
/// clips them.
pub fn render_svg(points: &PointSet, radius: f64, canvas_px: u32) -> Result<String> {
    if points.dim() != 2 {
        return Err(Error::invalid(
            "dim",
            format!("SVG output needs d = 2, got {}", points.dim()),
        ));
    }
    let w = canvas_px as f64;
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{canvas_px}" height="{canvas_px}" viewBox="0 0 {canvas_px} {canvas_px}">"#
    )
    .unwrap();
    writeln!(
        out,
        "<!-- unit square scaled to {canvas_px}px; origin bottom-left, y up: cy = {canvas_px} * (1 - y) -->"
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{canvas_px}" height="{canvas_px}" fill="white" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();
    let r = px(radius * w);
    writeln!(
        out,
        r##"<g fill="#4a7ab5" fill-opacity="0.8" stroke="#1c3a5e" stroke-width="0.5">"##
    )
    .unwrap();
    for p in points.iter() {
        writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="{r}"/>"#,
            px(p[0] * w),
            px((1.0 - p[1]) * w)
        )
        .unwrap();
    }
    writeln!(out, "</g>").unwrap();
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

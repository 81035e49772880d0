//! Aggregation of per-scene metrics across a benchmark run and export of
//! comparison tables (CSV + Markdown) and error-colored clouds.
//!
//! Numbers render at two decimals in millimeters with round-half-even,
//! which `format!("{:.2}")` performs on the exact binary value. Aggregates
//! sum scenes in scene-id order, so they are invariant to insertion order.
//! Undefined Std@tau entries are excluded from their mean (with the
//! exclusion counted) and render as an em dash, never as zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::io::ply::{write_ply_pointcloud, PlyFormat};
use crate::metrics::{MetricsResult, METERS_TO_MM};

/// Aggregate of one tolerance across scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTolerance {
    pub tau_mm: f64,
    /// Mean of the defined per-scene Std@tau values; `None` if every scene
    /// was undefined.
    pub std_mm: Option<f64>,
    /// How many scenes had an undefined Std@tau and were left out.
    pub std_undefined_scenes: usize,
    pub precision: f64,
    pub recall: f64,
    /// Mean of per-scene F1 values (not the harmonic mean of the averaged
    /// precision and recall).
    pub f1: f64,
}

/// Unweighted per-field mean over scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub cd_p_to_g_mm: f64,
    pub cd_g_to_p_mm: f64,
    pub mean_reconstruction_points: f64,
    pub mean_ground_truth_points: f64,
    pub per_tolerance: Vec<AggregateTolerance>,
}

/// All per-scene results of one method, plus their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub method_name: String,
    /// Scene id -> result, in insertion order.
    pub scenes: Vec<(String, MetricsResult)>,
    pub aggregate: AggregateMetrics,
}

fn same_taus(a: &MetricsResult, b: &MetricsResult) -> bool {
    a.per_tolerance.len() == b.per_tolerance.len()
        && a.per_tolerance
            .iter()
            .zip(&b.per_tolerance)
            .all(|(x, y)| x.tau_mm == y.tau_mm)
}

impl BenchmarkRun {
    /// Builds a run and computes its aggregate. Every scene must share the
    /// same tolerance list.
    pub fn new(
        method_name: impl Into<String>,
        scenes: Vec<(String, MetricsResult)>,
    ) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::EmptyRun);
        }
        let first = &scenes[0].1;
        for (id, result) in &scenes {
            if !same_taus(first, result) {
                return Err(Error::ToleranceMismatch(format!(
                    "scene `{id}` uses a different tolerance list"
                )));
            }
        }
        let aggregate = aggregate_scenes(&scenes);
        Ok(BenchmarkRun {
            method_name: method_name.into(),
            scenes,
            aggregate,
        })
    }

    fn scene_ids_sorted(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.scenes.iter().map(|(id, _)| id.as_str()).collect();
        ids.sort_unstable();
        ids
    }

    fn taus(&self) -> Vec<f64> {
        self.scenes[0]
            .1
            .per_tolerance
            .iter()
            .map(|t| t.tau_mm)
            .collect()
    }
}

fn aggregate_scenes(scenes: &[(String, MetricsResult)]) -> AggregateMetrics {
    // Canonical scene order makes the aggregate independent of insertion
    // order down to the last bit.
    let mut ordered: Vec<&(String, MetricsResult)> = scenes.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));
    let n = ordered.len() as f64;

    let mut cd_f = 0.0;
    let mut cd_b = 0.0;
    let mut points_p = 0.0;
    let mut points_g = 0.0;
    let tau_count = ordered[0].1.per_tolerance.len();
    let mut std_sums = vec![0.0f64; tau_count];
    let mut std_counts = vec![0usize; tau_count];
    let mut prec_sums = vec![0.0f64; tau_count];
    let mut rec_sums = vec![0.0f64; tau_count];
    let mut f1_sums = vec![0.0f64; tau_count];

    for (_, r) in &ordered {
        cd_f += r.cd_p_to_g_mm;
        cd_b += r.cd_g_to_p_mm;
        points_p += r.reconstruction_points as f64;
        points_g += r.ground_truth_points as f64;
        for (k, t) in r.per_tolerance.iter().enumerate() {
            if let Some(s) = t.std_mm {
                std_sums[k] += s;
                std_counts[k] += 1;
            }
            prec_sums[k] += t.precision;
            rec_sums[k] += t.recall;
            f1_sums[k] += t.f1;
        }
    }

    let per_tolerance = (0..tau_count)
        .map(|k| AggregateTolerance {
            tau_mm: ordered[0].1.per_tolerance[k].tau_mm,
            std_mm: if std_counts[k] > 0 {
                Some(std_sums[k] / std_counts[k] as f64)
            } else {
                None
            },
            std_undefined_scenes: ordered.len() - std_counts[k],
            precision: prec_sums[k] / n,
            recall: rec_sums[k] / n,
            f1: f1_sums[k] / n,
        })
        .collect();

    AggregateMetrics {
        cd_p_to_g_mm: cd_f / n,
        cd_g_to_p_mm: cd_b / n,
        mean_reconstruction_points: points_p / n,
        mean_ground_truth_points: points_g / n,
        per_tolerance,
    }
}

/// One comparison row: a method and its aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub metrics: AggregateMetrics,
}

/// Cross-method comparison model; rows keep run order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub tolerances_mm: Vec<f64>,
    pub rows: Vec<TableRow>,
}

/// Merges runs into one table. All runs must cover the same scene set and
/// tolerance list.
pub fn aggregate_runs(runs: &[BenchmarkRun]) -> Result<ComparisonTable> {
    let first = runs.first().ok_or(Error::EmptyRun)?;
    let scene_ids = first.scene_ids_sorted();
    let taus = first.taus();
    for run in &runs[1..] {
        if run.scene_ids_sorted() != scene_ids {
            return Err(Error::SceneSetMismatch(format!(
                "`{}` covers different scenes than `{}`",
                run.method_name, first.method_name
            )));
        }
        if run.taus() != taus {
            return Err(Error::ToleranceMismatch(format!(
                "`{}` uses different tolerances than `{}`",
                run.method_name, first.method_name
            )));
        }
    }
    Ok(ComparisonTable {
        tolerances_mm: taus,
        rows: runs
            .iter()
            .map(|r| TableRow {
                method: r.method_name.clone(),
                metrics: r.aggregate.clone(),
            })
            .collect(),
    })
}

/// Renders a value exactly as the tables print it.
fn cell(v: f64) -> String {
    format!("{v:.2}")
}

/// Displayed value used for best-of-column comparisons, so flagging agrees
/// with what readers see.
fn displayed(v: f64) -> f64 {
    cell(v).parse().expect("fixed-precision float")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    LowerBetter,
    HigherBetter,
}

type ColumnAccessor = Box<dyn Fn(&AggregateMetrics) -> Option<f64>>;

/// Column accessors in table order (matching the CSV header).
fn columns(tolerances: &[f64]) -> Vec<(Direction, ColumnAccessor)> {
    let mut cols: Vec<(Direction, ColumnAccessor)> = Vec::new();
    cols.push((
        Direction::LowerBetter,
        Box::new(|m: &AggregateMetrics| Some(m.cd_p_to_g_mm)),
    ));
    for k in 0..tolerances.len() {
        cols.push((
            Direction::LowerBetter,
            Box::new(move |m: &AggregateMetrics| m.per_tolerance[k].std_mm),
        ));
    }
    cols.push((
        Direction::LowerBetter,
        Box::new(|m: &AggregateMetrics| Some(m.cd_g_to_p_mm)),
    ));
    for k in 0..tolerances.len() {
        cols.push((
            Direction::HigherBetter,
            Box::new(move |m: &AggregateMetrics| Some(m.per_tolerance[k].precision)),
        ));
        cols.push((
            Direction::HigherBetter,
            Box::new(move |m: &AggregateMetrics| Some(m.per_tolerance[k].recall)),
        ));
        cols.push((
            Direction::HigherBetter,
            Box::new(move |m: &AggregateMetrics| Some(m.per_tolerance[k].f1)),
        ));
    }
    cols
}

/// For each column, which rows hold the best displayed value (ties share
/// the flag; undefined entries never win).
pub fn best_flags(table: &ComparisonTable) -> Vec<Vec<bool>> {
    let cols = columns(&table.tolerances_mm);
    let mut flags = vec![vec![false; cols.len()]; table.rows.len()];
    for (c, (direction, get)) in cols.iter().enumerate() {
        let values: Vec<Option<f64>> = table
            .rows
            .iter()
            .map(|r| get(&r.metrics).map(displayed))
            .collect();
        let best = values
            .iter()
            .flatten()
            .copied()
            .reduce(|a, b| match direction {
                Direction::LowerBetter => a.min(b),
                Direction::HigherBetter => a.max(b),
            });
        if let Some(best) = best {
            for (r, v) in values.iter().enumerate() {
                if *v == Some(best) {
                    flags[r][c] = true;
                }
            }
        }
    }
    flags
}

fn tau_label(tau: f64) -> String {
    if tau.fract() == 0.0 {
        format!("{tau:.0}")
    } else {
        format!("{tau}")
    }
}

/// CSV rendering: one header row, one row per method, two-decimal values,
/// undefined Std@tau as an empty cell.
pub fn csv_string(table: &ComparisonTable) -> String {
    let mut out = String::from("method,cd_p2g_mm");
    for tau in &table.tolerances_mm {
        out.push_str(&format!(",std{}_mm", tau_label(*tau)));
    }
    out.push_str(",cd_g2p_mm");
    for tau in &table.tolerances_mm {
        let label = tau_label(*tau);
        out.push_str(&format!(",prec{label},rec{label},f1_{label}"));
    }
    out.push('\n');

    for row in &table.rows {
        let m = &row.metrics;
        out.push_str(&row.method);
        out.push_str(&format!(",{}", cell(m.cd_p_to_g_mm)));
        for t in &m.per_tolerance {
            match t.std_mm {
                Some(s) => out.push_str(&format!(",{}", cell(s))),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{}", cell(m.cd_g_to_p_mm)));
        for t in &m.per_tolerance {
            out.push_str(&format!(
                ",{},{},{}",
                cell(t.precision),
                cell(t.recall),
                cell(t.f1)
            ));
        }
        out.push('\n');
    }
    out
}

/// Markdown rendering mirroring the CSV, with the best value per column in
/// bold and undefined Std@tau as an em dash.
pub fn markdown_string(table: &ComparisonTable) -> String {
    let flags = best_flags(table);
    let mut header = String::from("| Method | CD P→G (mm) |");
    for tau in &table.tolerances_mm {
        header.push_str(&format!(" Std@{}mm |", tau_label(*tau)));
    }
    header.push_str(" CD G→P (mm) |");
    for tau in &table.tolerances_mm {
        let label = tau_label(*tau);
        header.push_str(&format!(" Prec@{label}mm | Rec@{label}mm | F1@{label}mm |"));
    }
    let column_count = header.matches('|').count() - 1;
    let mut out = header;
    out.push('\n');
    out.push('|');
    for _ in 0..column_count {
        out.push_str(" --- |");
    }
    out.push('\n');

    for (r, row) in table.rows.iter().enumerate() {
        let m = &row.metrics;
        let mut cells: Vec<String> = Vec::new();
        cells.push(cell(m.cd_p_to_g_mm));
        for t in &m.per_tolerance {
            cells.push(t.std_mm.map_or_else(|| "—".to_string(), cell));
        }
        cells.push(cell(m.cd_g_to_p_mm));
        for t in &m.per_tolerance {
            cells.push(cell(t.precision));
            cells.push(cell(t.recall));
            cells.push(cell(t.f1));
        }
        out.push_str(&format!("| {} |", row.method));
        for (c, text) in cells.into_iter().enumerate() {
            if flags[r][c] && text != "—" {
                out.push_str(&format!(" **{text}** |"));
            } else {
                out.push_str(&format!(" {text} |"));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(table: &ComparisonTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, csv_string(table)).map_err(|e| Error::io(path, e))
}

pub fn write_markdown(table: &ComparisonTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, markdown_string(table)).map_err(|e| Error::io(path, e))
}

/// Piecewise-linear three-anchor colormap over `[0, cap_mm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorColormap {
    pub cap_mm: f64,
    /// Anchor colors for zero, cap/2 and cap.
    pub ramp: [[u8; 3]; 3],
}

impl Default for ErrorColormap {
    /// Blue through green to red, saturating at the 5 mm tolerance.
    fn default() -> Self {
        ErrorColormap {
            cap_mm: 5.0,
            ramp: [[0, 0, 255], [0, 255, 0], [255, 0, 0]],
        }
    }
}

impl ErrorColormap {
    pub fn map(&self, error_mm: f64) -> [u8; 3] {
        let t = (error_mm / self.cap_mm).clamp(0.0, 1.0);
        let (a, b, s) = if t <= 0.5 {
            (self.ramp[0], self.ramp[1], 2.0 * t)
        } else {
            (self.ramp[1], self.ramp[2], 2.0 * t - 1.0)
        };
        let mut rgb = [0u8; 3];
        for ch in 0..3 {
            let v = a[ch] as f64 + (b[ch] as f64 - a[ch] as f64) * s;
            rgb[ch] = v.round() as u8;
        }
        rgb
    }
}

/// Writes the cloud as a binary PLY colored by forward NN error (meters in,
/// colormap domain in millimeters). Geometry is not modified.
pub fn export_error_cloud(
    cloud: &PointCloud,
    forward_distances_m: &[f64],
    colormap: &ErrorColormap,
    path: impl AsRef<Path>,
) -> Result<()> {
    if forward_distances_m.len() != cloud.len() {
        return Err(Error::LengthMismatch(format!(
            "{} distances for {} points",
            forward_distances_m.len(),
            cloud.len()
        )));
    }
    let colors: Vec<[u8; 3]> = forward_distances_m
        .iter()
        .map(|d| colormap.map(d * METERS_TO_MM))
        .collect();
    let colored = PointCloud {
        points: cloud.points.clone(),
        colors: Some(colors),
    };
    write_ply_pointcloud(&colored, path, PlyFormat::BinaryLittleEndian)
}

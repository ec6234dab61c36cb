//! Telemetry files: one JSON record per control tick, a summary JSON per
//! episode, and offline aggregation of a record file.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use psfguard_core::qp::QpStatus;
use psfguard_core::sim::{EpisodeSummary, TelemetryRecord};
use serde::{Deserialize, Serialize};

pub const TELEMETRY_FILE: &str = "telemetry.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

pub struct TelemetryWriter<W: Write> {
    out: W,
    records: usize,
}

impl TelemetryWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, records: 0 }
    }

    pub fn write(&mut self, record: &TelemetryRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_summary(path: &Path, summary: &EpisodeSummary) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()
}

pub fn read_records(r: impl Read) -> io::Result<(Vec<TelemetryRecord>, usize)> {
    let mut records = Vec::new();
    let mut corrupt = 0;
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => records.push(r),
            Err(e) => {
                tracing::warn!("telemetry line {}: skipped: {e}", n + 1);
                corrupt += 1;
            }
        }
    }
    Ok((records, corrupt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Nearest-rank 99th percentile.
    pub p99: f64,
}

impl ColumnStats {
    /// Statistics over the finite values; `None` when there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let rank = ((0.99 * v.len() as f64).ceil() as usize).clamp(1, v.len());
        Some(Self {
            min: v[0],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v[v.len() - 1],
            p99: v[rank - 1],
        })
    }
}

/// Aggregates of a telemetry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySummary {
    pub records: usize,
    pub corrupt_lines: usize,
    /// Sample count N and resolution ε of the episode.
    pub n_samples: Option<usize>,
    pub epsilon: Option<f64>,
    /// Ticks with `min_h_samples ≤ 0` or `min_true_clearance < 0`.
    pub violations: usize,
    pub h_violations: usize,
    pub clearance_violations: usize,
    pub infeasible_ticks: usize,
    pub degraded_ticks: usize,
    pub clamp_anomalies: usize,
    /// Ticks that integrated less than the full `v_safe`.
    pub scaled_steps: usize,
    pub mean_qp_time: f64,
    /// Over ticks that rebuilt the field.
    pub mean_buffer_time: f64,
    pub mean_pde_time: f64,
    pub field_refreshes: usize,
    /// `‖v_safe − v_nom‖`.
    pub mean_deviation: f64,
    pub columns: BTreeMap<String, ColumnStats>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn summarize_records(records: &[TelemetryRecord], corrupt_lines: usize) -> TelemetrySummary {
    let deviation: Vec<f64> = records
        .iter()
        .map(|r| {
            r.v_safe
                .iter()
                .zip(&r.v_nom)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    type Column = (&'static str, fn(&TelemetryRecord) -> f64);
    let scalar: [Column; 13] = [
        ("min_h_samples", |r| r.min_h_samples),
        ("min_true_clearance", |r| r.min_true_clearance),
        ("base_clearance", |r| r.base_clearance),
        ("qp_time", |r| r.qp_time),
        ("pde_time", |r| r.pde_time),
        ("buffer_time", |r| r.buffer_time),
        ("pde_iters", |r| r.pde_iters as f64),
        ("pde_residual", |r| r.pde_residual),
        ("slack", |r| r.slack),
        ("max_violation", |r| r.max_violation),
        ("kkt_residual", |r| r.kkt_residual),
        ("active_rows", |r| r.active_rows as f64),
        ("clamped_samples", |r| r.clamped_samples as f64),
    ];
    let mut columns = BTreeMap::new();
    for (name, get) in scalar {
        if let Some(s) = ColumnStats::of(records.iter().map(get)) {
            columns.insert(name.to_string(), s);
        }
    }
    if let Some(s) = ColumnStats::of(deviation.iter().copied()) {
        columns.insert("deviation".to_string(), s);
    }
    let refreshed = || records.iter().filter(|r| r.field_refreshed);
    let count = |f: fn(&TelemetryRecord) -> bool| records.iter().filter(|r| f(r)).count();
    TelemetrySummary {
        records: records.len(),
        corrupt_lines,
        n_samples: records.last().map(|r| r.n_samples),
        epsilon: records.last().map(|r| r.epsilon),
        violations: count(|r| r.min_h_samples <= 0.0 || r.min_true_clearance < 0.0),
        h_violations: count(|r| r.min_h_samples <= 0.0),
        clearance_violations: count(|r| r.min_true_clearance < 0.0),
        infeasible_ticks: count(|r| r.qp_status == QpStatus::Infeasible),
        degraded_ticks: count(|r| r.qp_status == QpStatus::Degraded),
        clamp_anomalies: count(|r| r.clamp_anomaly),
        scaled_steps: count(|r| r.step_scale < 1.0),
        mean_qp_time: mean(records.iter().map(|r| r.qp_time)),
        mean_buffer_time: mean(refreshed().map(|r| r.buffer_time)),
        mean_pde_time: mean(refreshed().map(|r| r.pde_time)),
        field_refreshes: refreshed().count(),
        mean_deviation: mean(deviation.iter().copied()),
        columns,
    }
}

pub fn summarize_file(path: &Path) -> io::Result<TelemetrySummary> {
    let (records, corrupt) = read_records(File::open(path)?)?;
    Ok(summarize_records(&records, corrupt))
}

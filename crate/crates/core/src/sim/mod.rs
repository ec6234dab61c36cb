//! Closed-loop episodes: obstacles move, the field is rebuilt, the nominal
//! command is filtered, the arm is integrated, and every tick is checked
//! against analytic ground truth.

mod engine;
pub mod field;
pub mod nominal;
pub mod oracle;
pub mod scenario;
pub mod trajectory;

use alloc::string::String;
use alloc::vec::Vec;

pub use engine::{Engine, EngineOptions, FieldJob, LiveState};
pub use field::{FieldBuilder, FieldSnapshot};
pub use scenario::{NominalSpec, ObstacleSpec, Scenario};
pub use trajectory::{Keyframe, ScriptedMotion, Trajectory};

use crate::qp::QpStatus;

/// JSON has no infinities: unbounded values are written as `null` and read
/// back as `+∞`.
#[cfg(feature = "serde")]
pub mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Monotonic seconds. The core has no clock of its own; the std crate
/// supplies a real one, and [`NullClock`] makes runs bit-reproducible.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Always reads 0, so every timing column is 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// One control tick. `q` is the state the tick acted on; `step_scale ·
/// v_safe` is what was integrated from it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TelemetryRecord {
    pub t: f64,
    pub tick: usize,
    pub q: Vec<f64>,
    pub v_nom: Vec<f64>,
    pub v_safe: Vec<f64>,
    /// Minimum of `h` over non-base samples.
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub min_h_samples: f64,
    pub argmin_sample: Option<usize>,
    /// Analytic clearance of the moving links' dense cloud, meters.
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub min_true_clearance: f64,
    /// Same for the base link, obstacles only.
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub base_clearance: f64,
    pub qp_time: f64,
    pub pde_time: f64,
    pub buffer_time: f64,
    pub pde_iters: usize,
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub pde_residual: f64,
    /// Whether the field was rebuilt this tick.
    pub field_refreshed: bool,
    pub qp_status: QpStatus,
    pub slack: f64,
    /// Largest normalized hard-row violation of `v_safe`.
    pub max_violation: f64,
    /// Largest KKT residual of the QP solution (0 when unfiltered).
    pub kkt_residual: f64,
    pub active_rows: usize,
    /// Joint limits had to be clamped after integration.
    pub clamp_anomaly: bool,
    /// Fraction of `v_safe` integrated; below 1 when a full step would have
    /// more than halved `h` at some sample.
    pub step_scale: f64,
    /// Whether all samples lay in free voxels of the `ε + δ` erosion;
    /// only checked when `min_h_samples > 0`.
    pub premise_ok: Option<bool>,
    /// An obstacle is within `ε + δ` of the base link.
    pub base_proximal: bool,
    /// Samples clamped into the grid before querying the field.
    pub clamped_samples: usize,
    pub ee: [f64; 3],
    pub goal: Option<[f64; 3]>,
    pub filtered: bool,
    /// Sample count and resolution, repeated so a telemetry file can be
    /// summarized on its own.
    pub n_samples: usize,
    pub epsilon: f64,
}

/// Aggregates over an episode.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeSummary {
    pub scenario: String,
    pub ticks: usize,
    pub sample_count: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub delta_achieved: f64,
    /// Control period, seconds.
    pub dt: f64,
    pub filtered: bool,
    /// Ticks with `min_h_samples ≤ 0` (the field is never negative, so
    /// touching zero is the violation).
    pub h_violations: usize,
    /// Ticks with either kind of violation.
    pub violations: usize,
    /// Ticks with `min_true_clearance < 0`.
    pub clearance_violations: usize,
    /// Filtered ticks with an optimal solve, `min_h_samples ≥ 0` and
    /// `min_true_clearance < −δ`: counterexamples to the safety guarantee.
    pub guarantee_violations: usize,
    pub infeasible_ticks: usize,
    pub degraded_ticks: usize,
    pub clamp_anomalies: usize,
    pub premise_failures: usize,
    pub base_proximal_ticks: usize,
    /// Ticks whose `pde_time + qp_time` exceeded the control period.
    pub over_budget_ticks: usize,
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub min_h: f64,
    #[cfg_attr(feature = "serde", serde(with = "unbounded"))]
    pub min_clearance: f64,
    pub mean_qp_time: f64,
    pub mean_pde_time: f64,
    pub mean_buffer_time: f64,
    pub max_kkt_residual: f64,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    pub aborted: Option<String>,
}

impl EpisodeSummary {
    pub fn from_records(records: &[TelemetryRecord], base: EpisodeSummary) -> Self {
        let mut s = base;
        s.ticks = records.len();
        s.min_h = f64::INFINITY;
        s.min_clearance = f64::INFINITY;
        let mut field_ticks = 0usize;
        for r in records {
            let optimal = r.qp_status == QpStatus::Optimal;
            s.h_violations += usize::from(r.min_h_samples <= 0.0);
            s.violations += usize::from(r.min_h_samples <= 0.0 || r.min_true_clearance < 0.0);
            s.clearance_violations += usize::from(r.min_true_clearance < 0.0);
            s.guarantee_violations += usize::from(
                r.filtered && optimal && r.min_h_samples >= 0.0 && r.min_true_clearance < -s.delta,
            );
            s.infeasible_ticks += usize::from(r.qp_status == QpStatus::Infeasible);
            s.degraded_ticks += usize::from(r.qp_status == QpStatus::Degraded);
            s.clamp_anomalies += usize::from(r.clamp_anomaly);
            s.premise_failures += usize::from(r.premise_ok == Some(false));
            s.base_proximal_ticks += usize::from(r.base_proximal);
            s.over_budget_ticks += usize::from(r.pde_time + r.qp_time > s.dt);
            s.min_h = s.min_h.min(r.min_h_samples);
            s.min_clearance = s.min_clearance.min(r.min_true_clearance);
            s.mean_qp_time += r.qp_time;
            if r.field_refreshed {
                field_ticks += 1;
                s.mean_pde_time += r.pde_time;
                s.mean_buffer_time += r.buffer_time;
            }
            s.max_kkt_residual = s.max_kkt_residual.max(r.kkt_residual);
            let dev = r
                .v_safe
                .iter()
                .zip(&r.v_nom)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            let dev = crate::math::sqrt(dev);
            s.mean_deviation += dev;
            s.max_deviation = s.max_deviation.max(dev);
        }
        if !records.is_empty() {
            let n = records.len() as f64;
            s.mean_qp_time /= n;
            s.mean_deviation /= n;
        }
        if field_ticks > 0 {
            s.mean_pde_time /= field_ticks as f64;
            s.mean_buffer_time /= field_ticks as f64;
        }
        s
    }
}

/// Records and summary of a finished (or aborted) episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub records: Vec<TelemetryRecord>,
    pub summary: EpisodeSummary,
}

/// Runs `scenario` headless and lockstep for `ticks` ticks (default: its
/// duration times its rate).
pub fn run_episode(
    scenario: &Scenario,
    options: EngineOptions,
    ticks: Option<usize>,
    clock: &dyn Clock,
) -> crate::Result<EpisodeOutcome> {
    let mut engine = Engine::new(scenario.clone(), options)?;
    let ticks = ticks.unwrap_or_else(|| scenario.ticks());
    let mut records = Vec::with_capacity(ticks);
    let mut aborted = None;
    for _ in 0..ticks {
        match engine.step(clock) {
            Ok(r) => records.push(r),
            Err(e) => {
                aborted = Some(alloc::format!("tick {}: {e}", engine.tick()));
                break;
            }
        }
    }
    let mut summary = EpisodeSummary::from_records(&records, engine.summary_base());
    summary.aborted = aborted;
    Ok(EpisodeOutcome { records, summary })
}

//! Headless episodes that stream telemetry to disk.
//!
//! Lockstep mode runs field and control stages in one thread, tick by tick,
//! and is reproducible. Concurrent mode runs the field pipeline in its own
//! thread and the control loop at wall-clock pace against whatever field was
//! published last, the way a live controller would.

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use psfguard_core::shapes::ObstacleShape;
use psfguard_core::sim::{
    Clock, Engine, EngineOptions, EpisodeSummary, FieldBuilder, FieldJob, FieldSnapshot, NullClock,
    Scenario, TelemetryRecord,
};

use crate::io::{save, write_field, write_occupancy, write_samples_csv};
use crate::telemetry::{write_summary, TelemetryWriter, SUMMARY_FILE, TELEMETRY_FILE};

/// Seconds since construction, from the monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct StdClock {
    start: Instant,
}

impl Default for StdClock {
    fn default() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Lockstep,
    Concurrent,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub engine: EngineOptions,
    pub ticks: Option<usize>,
    /// Dump the field and its grid every this many ticks.
    pub dump_every: Option<usize>,
    pub mode: Mode,
    /// Zero every timing column so that files are byte-identical across runs.
    pub null_clock: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot set up the episode: {0}")]
    Setup(#[from] psfguard_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// How a finished episode maps to a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Violations,
    Aborted,
}

impl Outcome {
    pub fn of(summary: &EpisodeSummary) -> Self {
        if summary.aborted.is_some() {
            Outcome::Aborted
        } else if summary.violations > 0 {
            Outcome::Violations
        } else {
            Outcome::Clean
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Clean => 0,
            Outcome::Violations => 1,
            Outcome::Aborted => 3,
        }
    }
}

/// Runs `scenario` and writes telemetry, summary and requested dumps into
/// `out`.
pub fn run_to_dir(
    scenario: &Scenario,
    options: &RunOptions,
    out: &Path,
) -> Result<EpisodeSummary, RunError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut engine = Engine::new(scenario.clone(), options.engine)?;
    tracing::info!("{}", engine.describe());
    let samples_path = out.join("samples.csv");
    save(&samples_path, |w| write_samples_csv(w, engine.samples()))
        .map_err(io_err(&samples_path))?;

    let telemetry_path = out.join(TELEMETRY_FILE);
    let mut writer = TelemetryWriter::create(&telemetry_path).map_err(io_err(&telemetry_path))?;
    let ticks = options.ticks.unwrap_or_else(|| scenario.ticks());
    let clock = StdClock::default();
    let clock: &dyn Clock = if options.null_clock {
        &NullClock
    } else {
        &clock
    };
    let mut records = Vec::with_capacity(ticks);
    let aborted = match options.mode {
        Mode::Lockstep => run_lockstep(&mut engine, ticks, clock, |engine, r| {
            dump_if_due(engine, options.dump_every, r.tick, out)?;
            writer.write(&r).map_err(io_err(&telemetry_path))?;
            records.push(r);
            Ok(())
        })?,
        Mode::Concurrent => run_concurrent(
            &mut engine,
            ticks,
            clock,
            options.null_clock,
            |engine, r| {
                dump_if_due(engine, options.dump_every, r.tick, out)?;
                writer.write(&r).map_err(io_err(&telemetry_path))?;
                records.push(r);
                Ok(())
            },
        )?,
    };
    writer.flush().map_err(io_err(&telemetry_path))?;
    let mut summary = EpisodeSummary::from_records(&records, engine.summary_base());
    summary.aborted = aborted;
    let summary_path = out.join(SUMMARY_FILE);
    write_summary(&summary_path, &summary).map_err(io_err(&summary_path))?;
    Ok(summary)
}

fn run_lockstep(
    engine: &mut Engine,
    ticks: usize,
    clock: &dyn Clock,
    mut sink: impl FnMut(&Engine, TelemetryRecord) -> Result<(), RunError>,
) -> Result<Option<String>, RunError> {
    for _ in 0..ticks {
        match engine.step(clock) {
            Ok(r) => sink(engine, r)?,
            Err(e) => return Ok(Some(format!("tick {}: {e}", engine.tick()))),
        }
    }
    Ok(None)
}

fn dump_if_due(
    engine: &Engine,
    every: Option<usize>,
    tick: usize,
    out: &Path,
) -> Result<(), RunError> {
    let (Some(k), Some(snapshot)) = (every, engine.snapshot()) else {
        return Ok(());
    };
    if k == 0 || !tick.is_multiple_of(k) {
        return Ok(());
    }
    let field_path = out.join(format!("field_{tick:06}.bin"));
    save(&field_path, |w| write_field(w, &snapshot.pair.current)).map_err(io_err(&field_path))?;
    let grid_path = out.join(format!("occupancy_{tick:06}.bin"));
    save(&grid_path, |w| write_occupancy(w, &snapshot.pde_grid)).map_err(io_err(&grid_path))
}

enum FieldMsg {
    Job(FieldJob, Option<Box<FieldBuilder>>),
    Stop,
}

/// Field thread: builds a field for the newest job, skipping stale ones.
/// When the moving obstacles have not changed it publishes the settled
/// field once instead of rebuilding.
fn field_loop(
    jobs: mpsc::Receiver<FieldMsg>,
    results: mpsc::Sender<Result<(FieldSnapshot, u64), psfguard_core::Error>>,
    clock: &dyn Clock,
) {
    let mut builder: Option<FieldBuilder> = None;
    let mut last: Option<(u64, Vec<ObstacleShape>)> = None;
    let mut current: Option<FieldSnapshot> = None;
    let mut settled_sent = false;
    while let Ok(first) = jobs.recv() {
        let mut newest = None;
        for msg in std::iter::once(first).chain(jobs.try_iter()) {
            match msg {
                FieldMsg::Stop => return,
                FieldMsg::Job(job, b) => {
                    if let Some(b) = b {
                        builder = Some(*b);
                        last = None;
                        current = None;
                    }
                    newest = Some(job);
                }
            }
        }
        let (Some(job), Some(b)) = (newest, builder.as_mut()) else {
            continue;
        };
        let unchanged =
            matches!(&last, Some((e, shapes)) if *e == job.epoch && *shapes == job.dynamic_shapes);
        let published = if unchanged {
            match &current {
                Some(s) if !settled_sent && s.pair.previous.is_some() => {
                    settled_sent = true;
                    Ok(s.settled())
                }
                _ => continue,
            }
        } else {
            settled_sent = false;
            b.build(&job.dynamic_shapes, job.t, clock)
        };
        let failed = published.is_err();
        if let Ok(s) = &published {
            current = Some(s.clone());
            last = Some((job.epoch, job.dynamic_shapes));
        }
        if results.send(published.map(|s| (s, job.epoch))).is_err() || failed {
            return;
        }
    }
}

fn run_concurrent(
    engine: &mut Engine,
    ticks: usize,
    clock: &dyn Clock,
    null_clock: bool,
    mut sink: impl FnMut(&Engine, TelemetryRecord) -> Result<(), RunError>,
) -> Result<Option<String>, RunError> {
    let dt = Duration::from_secs_f64(engine.scenario().dt());
    let (job_tx, job_rx) = mpsc::channel();
    let (res_tx, res_rx) = mpsc::channel();
    thread::scope(|scope| {
        scope.spawn(move || {
            if null_clock {
                field_loop(job_rx, res_tx, &NullClock)
            } else {
                field_loop(job_rx, res_tx, &StdClock::default())
            }
        });
        let result = (|| {
            let mut builder_epoch = None;
            let start = Instant::now();
            for tick in 0..ticks {
                let fresh_builder = (builder_epoch != Some(engine.epoch()))
                    .then(|| Box::new(engine.field_builder().clone()));
                builder_epoch = Some(engine.epoch());
                let _ = job_tx.send(FieldMsg::Job(engine.field_job(), fresh_builder));
                // the first field of an epoch is waited for; later ones are
                // picked up whenever they are ready
                let mut incoming = Vec::new();
                if engine.snapshot().is_none() {
                    match res_rx.recv() {
                        Ok(r) => incoming.push(r),
                        Err(_) => return Ok(Some(format!("tick {tick}: field thread stopped"))),
                    }
                }
                incoming.extend(res_rx.try_iter());
                for r in incoming {
                    match r {
                        Ok((snapshot, epoch)) => {
                            engine.install_snapshot(snapshot, epoch);
                        }
                        Err(e) => return Ok(Some(format!("tick {tick}: {e}"))),
                    }
                }
                let refreshed = engine.take_fresh();
                let shapes = engine.obstacles_now();
                match engine.control_tick(&shapes, refreshed, clock) {
                    Ok(r) => sink(engine, r)?,
                    Err(e) => return Ok(Some(format!("tick {tick}: {e}"))),
                }
                let due = start + dt * (tick as u32 + 1);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
            Ok(None)
        })();
        let _ = job_tx.send(FieldMsg::Stop);
        result
    })
}

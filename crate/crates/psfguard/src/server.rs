//! Live sessions: the episode runs indefinitely in a simulation thread,
//! clients steer it over a WebSocket at `/ws`, and state frames are
//! broadcast at a fixed rate, newest first.
//!
//! Every message in either direction is a JSON text frame with a `type`
//! discriminator. Commands are queued to the simulation thread and applied
//! between control ticks; within one batch a pose-stream command
//! (`set_target`, `move_obstacle` for one index) is dropped when a newer one
//! for the same key follows it.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::mpsc::{self, SyncSender, TryRecvError, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use psfguard_core::grid::{GridDims, WorldBounds};
use psfguard_core::shapes::ShapeKind;
use psfguard_core::sim::{Engine, EngineOptions, NominalSpec, Scenario, TelemetryRecord};
use psfguard_core::Vec3;
use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, watch};
use tower_http::services::ServeDir;

use crate::io::{field_slice, Axis, FieldSlice};
use crate::runner::StdClock;
use crate::scenario_file::{orientation_of, pose_from_parts};
use crate::telemetry::TelemetryWriter;

pub const BROADCAST_HZ: f64 = 30.0;
const QUEUE_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub position: [f64; 3],
    /// `[w, x, y, z]`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
}

impl PoseEntry {
    pub fn of(pose: &psfguard_core::Pose) -> Self {
        Self {
            position: pose.translation.vector.into(),
            orientation: Some(orientation_of(pose)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Track this end-effector point; switches to the external nominal mode.
    SetTarget {
        target: [f64; 3],
    },
    MoveObstacle {
        index: usize,
        pose: PoseEntry,
    },
    SetNominalMode {
        nominal: NominalSpec,
    },
    Pause,
    Resume,
    /// Back to the scenario's initial state.
    Reset,
    SetGain {
        name: String,
        value: f64,
    },
    /// Choose the heatmap layer sent in state frames.
    SetSlice {
        axis: Axis,
        offset: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SetTarget { .. } => "set_target",
            Command::MoveObstacle { .. } => "move_obstacle",
            Command::SetNominalMode { .. } => "set_nominal_mode",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::Reset => "reset",
            Command::SetGain { .. } => "set_gain",
            Command::SetSlice { .. } => "set_slice",
        }
    }

    /// Latest-wins key for pose-stream commands.
    fn stream_key(&self) -> Option<usize> {
        match self {
            Command::SetTarget { .. } => Some(usize::MAX),
            Command::MoveObstacle { index, .. } => Some(*index),
            _ => None,
        }
    }
}

/// A command plus the client's send time in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveCommand {
    pub client_time: Option<f64>,
    pub command: Command,
}

impl LiveCommand {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
        let obj = value
            .as_object_mut()
            .ok_or("a command must be a JSON object")?;
        let client_time = match obj.remove("client_time") {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or("client_time must be a number")?),
        };
        let command = serde_json::from_value(value).map_err(|e| e.to_string())?;
        Ok(Self {
            client_time,
            command,
        })
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.command).expect("commands serialize");
        if let (Some(t), Some(obj)) = (self.client_time, v.as_object_mut()) {
            obj.insert("client_time".into(), t.into());
        }
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleState {
    pub link: usize,
    pub position: [f64; 3],
    /// `None` on the base link, which has no barrier row.
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub shape: ShapeKind,
    pub pose: PoseEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub tick: usize,
    pub paused: bool,
    pub q: Vec<f64>,
    pub link_poses: Vec<PoseEntry>,
    pub samples: Vec<SampleState>,
    pub obstacles: Vec<ObstacleState>,
    pub slice: Option<FieldSlice>,
    /// The record of the tick that produced this state.
    pub telemetry: Option<TelemetryRecord>,
    /// Why the session stopped stepping on its own, if it did.
    pub halted: Option<String>,
}

/// Static facts about the session, sent once on connect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub scenario: String,
    pub dof: usize,
    pub n_samples: usize,
    pub bounds: WorldBounds,
    pub dims: GridDims,
    pub control_rate: f64,
    pub broadcast_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(SessionInfo),
    State(Box<StateFrame>),
    Ack {
        command: String,
        client_time: Option<f64>,
        /// Tick before which the command took effect.
        tick: usize,
        /// False when a newer command for the same pose stream replaced it.
        applied: bool,
    },
    Error {
        message: String,
        client_time: Option<f64>,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub engine: EngineOptions,
    /// Write the session's telemetry here as JSON lines.
    pub telemetry: Option<PathBuf>,
    /// Directory served at `/`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot set up the session: {0}")]
    Setup(#[from] psfguard_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

type Reply = oneshot::Sender<ServerMessage>;

struct Pending {
    command: LiveCommand,
    reply: Reply,
}

struct AppState {
    commands: SyncSender<Pending>,
    frames: watch::Receiver<Arc<String>>,
    info: SessionInfo,
}

struct Session {
    engine: Engine,
    original: Scenario,
    paused: bool,
    slice: (Axis, f64),
    last: Option<TelemetryRecord>,
    halted: Option<String>,
    writer: Option<TelemetryWriter<std::io::BufWriter<std::fs::File>>>,
}

impl Session {
    fn apply(&mut self, command: &Command) -> Result<(), String> {
        let e = |e: psfguard_core::Error| e.to_string();
        match command {
            Command::SetTarget { target } => {
                if !target.iter().all(|v| v.is_finite()) {
                    return Err("target must be finite".into());
                }
                self.engine.set_target(Vec3::from(*target));
            }
            Command::MoveObstacle { index, pose } => {
                let pose = pose_from_parts(pose.position, pose.orientation)?;
                self.engine.move_obstacle(*index, pose).map_err(e)?;
            }
            Command::SetNominalMode { nominal } => {
                self.engine.set_nominal(nominal.clone()).map_err(e)?
            }
            Command::Pause => self.paused = true,
            Command::Resume => {
                self.paused = false;
                self.halted = None;
            }
            Command::Reset => {
                self.engine.reset(&self.original).map_err(e)?;
                self.last = None;
                self.halted = None;
            }
            Command::SetGain { name, value } => self.engine.set_gain(name, *value).map_err(e)?,
            Command::SetSlice { axis, offset } => {
                let b = self.original.bounds;
                let a = axis.index();
                if !(*offset >= b.min[a] && *offset <= b.max[a]) {
                    return Err(format!("slice offset {offset} lies outside the workspace"));
                }
                self.slice = (*axis, *offset);
            }
        }
        Ok(())
    }

    /// Applies a batch in arrival order, dropping superseded stream commands.
    fn apply_batch(&mut self, batch: Vec<Pending>) {
        let tick = self.engine.tick();
        let superseded: Vec<bool> = (0..batch.len())
            .map(|i| {
                let Some(key) = batch[i].command.command.stream_key() else {
                    return false;
                };
                batch[i + 1..]
                    .iter()
                    .map(|p| p.command.command.stream_key())
                    .take_while(Option::is_some)
                    .any(|k| k == Some(key))
            })
            .collect();
        for (p, skip) in batch.into_iter().zip(superseded) {
            let client_time = p.command.client_time;
            let msg = if skip {
                Ok(false)
            } else {
                self.apply(&p.command.command).map(|_| true)
            };
            let msg = match msg {
                Ok(applied) => ServerMessage::Ack {
                    command: p.command.command.name().into(),
                    client_time,
                    tick,
                    applied,
                },
                Err(message) => ServerMessage::Error {
                    message,
                    client_time,
                },
            };
            let _ = p.reply.send(msg);
        }
    }

    fn frame(&self) -> StateFrame {
        let live = self.engine.live();
        let samples = self
            .engine
            .samples()
            .iter()
            .zip(&live.sample_positions)
            .zip(&live.sample_h)
            .map(|((p, y), h)| SampleState {
                link: p.link,
                position: (*y).into(),
                h: h.is_finite().then_some(*h),
            })
            .collect();
        let (q, t, tick) = match &self.last {
            Some(r) => (r.q.clone(), r.t, r.tick),
            None => (
                self.engine.q().to_vec(),
                self.engine.t(),
                self.engine.tick(),
            ),
        };
        StateFrame {
            t,
            tick,
            paused: self.paused,
            q,
            link_poses: live.link_poses.iter().map(PoseEntry::of).collect(),
            samples,
            obstacles: live
                .obstacles
                .iter()
                .map(|o| ObstacleState {
                    shape: o.kind,
                    pose: PoseEntry::of(&o.pose),
                })
                .collect(),
            slice: self
                .engine
                .snapshot()
                .map(|s| field_slice(&s.pair.current, self.slice.0, self.slice.1)),
            telemetry: self.last.clone(),
            halted: self.halted.clone(),
        }
    }
}

fn simulate(
    mut session: Session,
    commands: mpsc::Receiver<Pending>,
    frames: watch::Sender<Arc<String>>,
) {
    let clock = StdClock::default();
    let dt = Duration::from_secs_f64(session.engine.scenario().dt());
    let mut due = Instant::now();
    loop {
        let mut batch = Vec::new();
        if session.paused {
            match commands.recv_timeout(Duration::from_millis(50)) {
                Ok(p) => batch.push(p),
                Err(mpsc::RecvTimeoutError::Timeout) => {}
                Err(mpsc::RecvTimeoutError::Disconnected) => return,
            }
        }
        loop {
            match commands.try_recv() {
                Ok(p) => batch.push(p),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        let changed = !batch.is_empty();
        session.apply_batch(batch);
        if session.paused {
            if changed {
                frames.send_replace(Arc::new(
                    ServerMessage::State(Box::new(session.frame())).to_json(),
                ));
            }
            due = Instant::now();
            continue;
        }
        match session.engine.step(&clock) {
            Ok(record) => {
                if let Some(w) = session.writer.as_mut() {
                    if let Err(e) = w.write(&record).and_then(|_| w.flush()) {
                        tracing::error!("telemetry: {e}");
                        session.writer = None;
                    }
                }
                session.last = Some(record);
            }
            Err(e) => {
                // the episode cannot continue as is; hold until a client
                // resets or moves things out of the way
                let message = format!("tick {}: {e}", session.engine.tick());
                tracing::warn!("session halted: {message}");
                session.halted = Some(message);
                session.paused = true;
            }
        }
        frames.send_replace(Arc::new(
            ServerMessage::State(Box::new(session.frame())).to_json(),
        ));
        due += dt;
        match due.checked_duration_since(Instant::now()) {
            Some(wait) => thread::sleep(wait),
            // running behind: do not try to catch up
            None => due = Instant::now(),
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

async fn client(socket: WebSocket, app: Arc<AppState>) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = tokio::sync::mpsc::unbounded_channel::<ServerMessage>();
    let _ = out_tx.send(ServerMessage::Hello(app.info.clone()));
    let mut frames = app.frames.clone();
    frames.mark_changed();
    let writer = tokio::spawn(async move {
        let mut every = tokio::time::interval(Duration::from_secs_f64(1.0 / BROADCAST_HZ));
        every.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            let text = tokio::select! {
                msg = out_rx.recv() => match msg {
                    Some(m) => m.to_json(),
                    None => break,
                },
                _ = every.tick() => {
                    match frames.has_changed() {
                        Ok(true) => frames.borrow_and_update().as_str().to_owned(),
                        Ok(false) => continue,
                        Err(_) => break,
                    }
                }
            };
            if sink.send(Message::text(text)).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let command = match LiveCommand::parse(&text) {
            Ok(c) => c,
            Err(message) => {
                let _ = out_tx.send(ServerMessage::Error {
                    message,
                    client_time: None,
                });
                continue;
            }
        };
        let client_time = command.client_time;
        let (reply, answer) = oneshot::channel();
        match app.commands.try_send(Pending { command, reply }) {
            Ok(()) => {
                let out = out_tx.clone();
                tokio::spawn(async move {
                    if let Ok(m) = answer.await {
                        let _ = out.send(m);
                    }
                });
            }
            Err(e) => {
                let message = match e {
                    TrySendError::Full(_) => "command queue full; command dropped",
                    TrySendError::Disconnected(_) => "session has ended",
                };
                let _ = out_tx.send(ServerMessage::Error {
                    message: message.into(),
                    client_time,
                });
            }
        }
    }
    drop(out_tx);
    let _ = writer.await;
}

const PLACEHOLDER: &str = "<!doctype html><title>psfguard</title>\
<p>Live session running. State frames and commands are on the WebSocket at <code>/ws</code>; \
start the server with <code>--ui DIR</code> to serve a browser client here.</p>";

/// Builds the session and its router. The simulation thread stops once the
/// router (and every connection) is dropped.
pub fn session_router(scenario: Scenario, options: ServeOptions) -> Result<Router, ServeError> {
    let engine = Engine::new(scenario.clone(), options.engine)?;
    let info = SessionInfo {
        scenario: scenario.name.clone(),
        dof: scenario.robot.dof(),
        n_samples: engine.samples().count(),
        bounds: scenario.bounds,
        dims: scenario.dims,
        control_rate: scenario.control_rate,
        broadcast_hz: BROADCAST_HZ,
    };
    let writer = match &options.telemetry {
        Some(path) => Some(
            TelemetryWriter::create(path).map_err(|source| ServeError::Io {
                path: path.clone(),
                source,
            })?,
        ),
        None => None,
    };
    let center = (scenario.bounds.min[2] + scenario.bounds.max[2]) / 2.0;
    let session = Session {
        engine,
        original: scenario,
        paused: false,
        slice: (Axis::Z, center),
        last: None,
        halted: None,
        writer,
    };
    let first = Arc::new(ServerMessage::State(Box::new(session.frame())).to_json());
    let (frame_tx, frame_rx) = watch::channel(first);
    let (cmd_tx, cmd_rx) = mpsc::sync_channel(QUEUE_DEPTH);
    thread::Builder::new()
        .name("simulation".into())
        .spawn(move || simulate(session, cmd_rx, frame_tx))
        .map_err(|source| ServeError::Io {
            path: PathBuf::new(),
            source,
        })?;
    let app = Arc::new(AppState {
        commands: cmd_tx,
        frames: frame_rx,
        info,
    });
    let router = Router::new().route("/ws", get(ws_handler)).with_state(app);
    Ok(match options.ui_dir.filter(|d| d.is_dir()) {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(PLACEHOLDER).into_response() })),
    })
}

/// Serves a session on `listener` until the process ends.
pub async fn serve(
    listener: tokio::net::TcpListener,
    scenario: Scenario,
    options: ServeOptions,
) -> std::io::Result<()> {
    let router = session_router(scenario, options).map_err(std::io::Error::other)?;
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    if let Some(a) = addr {
        tracing::info!("serving on http://{a} (WebSocket at /ws)");
    }
    axum::serve(listener, router).await
}

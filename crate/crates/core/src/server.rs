//! Live simulation service for demonstration collection.
//!
//! [`Session`] is the synchronous state machine: it owns the simulation,
//! applies commands between steps and writes the dataset. [`serve`] wraps it
//! in a WebSocket endpoint at `/ws`. A single task owns the session and
//! steps it on a timer; connections talk to it through a mailbox and receive
//! snapshots over a broadcast channel.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::dataset::{DatasetHeader, DatasetWriter, DemonstrationRecord, DATASET_VERSION};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::sim::{Method, ScenarioSpec, Simulation, StepReport};
use crate::switch_ls::{LearnedSwitch, ViTConfig};
use crate::switch_rs::Mode;
use crate::world::WorldModel;

/// Robots the expert controls unless configured otherwise.
pub const DEFAULT_CONTROLLED: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlAction {
    Pause,
    Resume,
    Step,
    Reset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordAction {
    Start,
    Stop,
}

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Toggle { id: usize },
    Control { action: ControlAction },
    Record {
        action: RecordAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub goal: Vec2,
    pub mode: Mode,
    pub theta_rot: f64,
    pub arrived: bool,
    pub collided: bool,
    pub controlled: bool,
    /// Sticky expert override, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub human_override: Option<Mode>,
    /// Ray endpoints in world coordinates; controlled robots only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rays: Option<Vec<Vec2>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub episode: u64,
    pub paused: bool,
    pub done: bool,
    pub recording: bool,
    pub robots: Vec<RobotView>,
}

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    /// Sent once on connect.
    World { world: WorldModel, radius: f64, controlled_ids: Vec<usize> },
    Ack { message: String },
    Error { message: String },
}

impl ServerMessage {
    fn ack(message: impl Into<String>) -> Self {
        ServerMessage::Ack { message: message.into() }
    }

    fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

struct Recorder {
    writer: DatasetWriter,
    path: PathBuf,
}

/// Outcome of handling one client message.
#[derive(Clone, Debug, PartialEq)]
pub struct Handled {
    pub reply: ServerMessage,
    /// Snapshot to broadcast when the command stepped or reset the run.
    pub snapshot: Option<Snapshot>,
}

pub struct Session {
    spec: ScenarioSpec,
    learned: Option<LearnedSwitch>,
    sim: Simulation,
    controlled: Vec<usize>,
    paused: bool,
    episode: u64,
    recorder: Option<Recorder>,
}

impl Session {
    /// Controls the first three robots (or all, when fewer).
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        let k = spec.robots.len().min(DEFAULT_CONTROLLED);
        Self::with_controlled(spec, (0..k).collect())
    }

    pub fn with_controlled(spec: ScenarioSpec, controlled: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = controlled.iter().find(|&&id| id >= spec.robots.len()) {
            return Err(Error::config(format!("controlled robot {bad} does not exist")));
        }
        let learned = match (spec.params.method, &spec.params.weights) {
            (Method::ApfLs, Some(path)) => Some(LearnedSwitch::load(path)?),
            _ => None,
        };
        let sim = Self::build_sim(&spec, &learned)?;
        Ok(Self { spec, learned, sim, controlled, paused: false, episode: 0, recorder: None })
    }

    fn build_sim(spec: &ScenarioSpec, learned: &Option<LearnedSwitch>) -> Result<Simulation> {
        match learned {
            Some(ls) => Simulation::with_learned_switch(spec.clone(), ls.clone()),
            None => Simulation::new(spec.clone()),
        }
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn controlled(&self) -> &[usize] {
        &self.controlled
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn set_paused(&mut self, paused: bool) {
        self.paused = paused;
    }

    pub fn is_recording(&self) -> bool {
        self.recorder.is_some()
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Whether the timer should advance the run.
    pub fn should_advance(&self) -> bool {
        !self.paused && !self.sim.is_done()
    }

    pub fn world_message(&self) -> ServerMessage {
        ServerMessage::World {
            world: self.spec.world.clone(),
            radius: self.spec.params.radius,
            controlled_ids: self.controlled.clone(),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let cfg = self.spec.params.scan_config();
        let robots = self
            .sim
            .robots()
            .iter()
            .map(|r| {
                let controlled = self.controlled.contains(&r.id);
                let rays = controlled
                    .then_some(r.last_scan.as_ref())
                    .flatten()
                    .map(|scan| {
                        scan.rays()
                            .iter()
                            .map(|l| r.state.position() + l.rotate(r.state.psi))
                            .collect::<Vec<_>>()
                    });
                debug_assert!(rays.as_ref().is_none_or(|v| v.len() == cfg.ray_count));
                RobotView {
                    id: r.id,
                    x: r.state.x,
                    y: r.state.y,
                    psi: r.state.psi,
                    goal: r.goal,
                    mode: r.mode(),
                    theta_rot: r.memory.theta_rot,
                    arrived: r.arrived_at.is_some(),
                    collided: r.in_collision,
                    controlled,
                    human_override: r.human_override,
                    rays,
                }
            })
            .collect();
        Snapshot {
            t: self.sim.t(),
            episode: self.episode,
            paused: self.paused,
            done: self.sim.is_done(),
            recording: self.is_recording(),
            robots,
        }
    }

    /// Flips the sticky override of a controlled robot: no override becomes
    /// the opposite of its current mode, an override is cleared.
    pub fn toggle(&mut self, id: usize) -> Result<Option<Mode>> {
        if !self.controlled.contains(&id) {
            return Err(Error::domain(format!("robot {id} is not controlled (controlled: {:?})", self.controlled)));
        }
        let r = &self.sim.robots()[id];
        let next = match r.human_override {
            Some(_) => None,
            None => Some(match r.mode() {
                Mode::Apf => Mode::Wf,
                Mode::Wf => Mode::Apf,
            }),
        };
        self.sim.set_override(id, next)?;
        Ok(next)
    }

    /// One simulation step; records demonstrations while recording.
    pub fn advance(&mut self) -> Result<Snapshot> {
        let report = self.sim.step()?;
        self.record(&report)?;
        Ok(self.snapshot())
    }

    fn record(&mut self, report: &StepReport) -> Result<()> {
        let Some(rec) = &mut self.recorder else {
            return Ok(());
        };
        for obs in report.observations.iter().filter(|o| self.controlled.contains(&o.robot)) {
            rec.writer.write(&DemonstrationRecord {
                episode: self.episode,
                t: report.t,
                robot: obs.robot,
                observation: obs.observation.as_slice().to_vec(),
                label: obs.label.indicator(),
            })?;
        }
        Ok(())
    }

    /// Restarts the scenario as a new episode. Recording carries on.
    pub fn reset(&mut self) -> Result<Snapshot> {
        self.sim = Self::build_sim(&self.spec, &self.learned)?;
        self.sim.set_capture_observations(self.recorder.is_some());
        self.episode += 1;
        Ok(self.snapshot())
    }

    pub fn start_recording(&mut self, path: PathBuf) -> Result<()> {
        if let Some(rec) = &self.recorder {
            return Err(Error::config(format!("already recording to {}", rec.path.display())));
        }
        let t_seq = match &self.learned {
            Some(ls) => ls.config().t_seq,
            None => ViTConfig::standard(self.spec.params.ray_count).t_seq,
        };
        let header = DatasetHeader {
            version: DATASET_VERSION,
            ray_count: self.spec.params.ray_count,
            t_seq,
            controlled_ids: self.controlled.clone(),
            scenario_hash: self.spec.content_hash()?,
        };
        let writer = DatasetWriter::create(&path, header)
            .map_err(|e| Error::config(format!("cannot record to {}: {e}", path.display())))?;
        self.recorder = Some(Recorder { writer, path });
        self.sim.set_capture_observations(true);
        Ok(())
    }

    /// Returns the number of records written, or `None` when not recording.
    pub fn stop_recording(&mut self) -> Result<Option<usize>> {
        let Some(rec) = self.recorder.take() else {
            return Ok(None);
        };
        self.sim.set_capture_observations(false);
        Ok(Some(rec.writer.finish()?))
    }

    /// Applies one client message. Called only between steps.
    pub fn handle(&mut self, msg: ClientMessage) -> Handled {
        let result = match msg {
            ClientMessage::Toggle { id } => self.toggle(id).map(|m| {
                let what = m.map_or("cleared".to_string(), |m| format!("{m:?}").to_uppercase());
                (format!("robot {id} override {what}"), None)
            }),
            ClientMessage::Control { action } => self.control(action),
            ClientMessage::Record { action: RecordAction::Start, path } => match path {
                Some(p) => self.start_recording(p.clone()).map(|_| (format!("recording to {}", p.display()), None)),
                None => Err(Error::config("record start needs a path")),
            },
            ClientMessage::Record { action: RecordAction::Stop, .. } => self.stop_recording().map(|n| match n {
                Some(n) => (format!("recording stopped, {n} records"), None),
                None => ("not recording".to_string(), None),
            }),
        };
        match result {
            Ok((message, snapshot)) => Handled { reply: ServerMessage::ack(message), snapshot },
            Err(e) => Handled { reply: ServerMessage::error(e.to_string()), snapshot: None },
        }
    }

    fn control(&mut self, action: ControlAction) -> Result<(String, Option<Snapshot>)> {
        match action {
            ControlAction::Pause => {
                self.paused = true;
                Ok(("paused".into(), None))
            }
            ControlAction::Resume => {
                self.paused = false;
                Ok(("resumed".into(), None))
            }
            ControlAction::Step if !self.paused => Err(Error::config("step is only available while paused")),
            ControlAction::Step if self.sim.is_done() => Err(Error::config("run is finished")),
            ControlAction::Step => Ok(("stepped".into(), Some(self.advance()?))),
            ControlAction::Reset => Ok(("reset".into(), Some(self.reset()?))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Multiplier on the real-time step rate.
    pub speed: f64,
    pub controlled: Option<Vec<usize>>,
    pub start_paused: bool,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { addr: ([127, 0, 0, 1], 8080).into(), speed: 1.0, controlled: None, start_paused: false }
    }
}

enum Request {
    Hello,
    Client(ClientMessage),
}

struct Envelope {
    request: Request,
    reply: oneshot::Sender<Vec<ServerMessage>>,
}

#[derive(Clone)]
struct AppState {
    mailbox: mpsc::Sender<Envelope>,
    snapshots: broadcast::Sender<String>,
}

/// A running server.
pub struct ServerHandle {
    pub addr: SocketAddr,
    task: JoinHandle<()>,
    owner: JoinHandle<()>,
}

impl ServerHandle {
    pub fn abort(&self) {
        self.task.abort();
        self.owner.abort();
    }

    /// Waits until the HTTP server stops.
    pub async fn join(self) -> Result<()> {
        self.task.await.map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

/// Binds the listener and starts the loop owner. Port 0 picks a free port.
pub async fn start(spec: ScenarioSpec, cfg: ServeConfig) -> Result<ServerHandle> {
    if !(cfg.speed > 0.0 && cfg.speed.is_finite()) {
        return Err(Error::config("speed must be positive"));
    }
    let mut session = match cfg.controlled.clone() {
        Some(ids) => Session::with_controlled(spec, ids)?,
        None => Session::new(spec)?,
    };
    session.set_paused(cfg.start_paused);
    let period = Duration::from_secs_f64(session.spec.params.kinematics.dt / cfg.speed);

    let listener = TcpListener::bind(cfg.addr).await?;
    let addr = listener.local_addr()?;
    let (mailbox, inbox) = mpsc::channel(64);
    let (snapshots, _) = broadcast::channel(256);
    let owner = tokio::spawn(own_session(session, period, inbox, snapshots.clone()));

    let app = Router::new().route("/ws", get(ws_handler)).with_state(AppState { mailbox, snapshots });
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok(ServerHandle { addr, task, owner })
}

/// Runs until the process is stopped.
pub async fn serve(spec: ScenarioSpec, cfg: ServeConfig) -> Result<()> {
    start(spec, cfg).await?.join().await
}

async fn own_session(
    mut session: Session,
    period: Duration,
    mut inbox: mpsc::Receiver<Envelope>,
    snapshots: broadcast::Sender<String>,
) {
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let publish = |s: Snapshot| {
        let _ = snapshots.send(ServerMessage::Snapshot(s).to_json());
    };
    loop {
        tokio::select! {
            env = inbox.recv() => {
                let Some(env) = env else { break };
                let replies = match env.request {
                    Request::Hello => vec![session.world_message(), ServerMessage::Snapshot(session.snapshot())],
                    Request::Client(msg) => {
                        let h = session.handle(msg);
                        if let Some(s) = h.snapshot {
                            publish(s);
                        }
                        vec![h.reply]
                    }
                };
                let _ = env.reply.send(replies);
            }
            _ = ticker.tick() => {
                if !session.should_advance() {
                    continue;
                }
                match session.advance() {
                    Ok(s) => publish(s),
                    Err(e) => {
                        session.set_paused(true);
                        let _ = snapshots.send(ServerMessage::error(format!("simulation paused: {e}")).to_json());
                    }
                }
            }
        }
    }
    let _ = session.stop_recording();
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn ask(state: &AppState, request: Request) -> Vec<ServerMessage> {
    let (reply, rx) = oneshot::channel();
    if state.mailbox.send(Envelope { request, reply }).await.is_err() {
        return vec![ServerMessage::error("simulation is not running")];
    }
    rx.await.unwrap_or_else(|_| vec![ServerMessage::error("simulation is not running")])
}

async fn connection(socket: WebSocket, state: AppState) {
    let (mut tx, mut rx) = socket.split();
    let mut snapshots = state.snapshots.subscribe();
    for m in ask(&state, Request::Hello).await {
        if tx.send(Message::Text(m.to_json())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let replies = match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(msg) => ask(&state, Request::Client(msg)).await,
                    Err(e) => vec![ServerMessage::error(format!("bad message: {e}"))],
                };
                for m in replies {
                    if tx.send(Message::Text(m.to_json())).await.is_err() {
                        return;
                    }
                }
            }
            out = snapshots.recv() => {
                match out {
                    Ok(text) => {
                        if tx.send(Message::Text(text)).await.is_err() {
                            break;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_instance, Layout};

    fn session() -> Session {
        let spec = generate_instance(&Layout::Swap, 6, 1).unwrap();
        let mut s = Session::new(spec).unwrap();
        s.set_paused(true);
        s
    }

    #[test]
    fn wire_format() {
        let m: ClientMessage = serde_json::from_str(r#"{"type":"toggle","id":2}"#).unwrap();
        assert_eq!(m, ClientMessage::Toggle { id: 2 });
        let m: ClientMessage = serde_json::from_str(r#"{"type":"control","action":"pause"}"#).unwrap();
        assert_eq!(m, ClientMessage::Control { action: ControlAction::Pause });
        let m: ClientMessage = serde_json::from_str(r#"{"type":"record","action":"start","path":"/tmp/x"}"#).unwrap();
        assert_eq!(m, ClientMessage::Record { action: RecordAction::Start, path: Some("/tmp/x".into()) });
        let m: ClientMessage = serde_json::from_str(r#"{"type":"record","action":"stop"}"#).unwrap();
        assert_eq!(m, ClientMessage::Record { action: RecordAction::Stop, path: None });

        let v: serde_json::Value = serde_json::from_str(&ServerMessage::Snapshot(session().snapshot()).to_json()).unwrap();
        assert_eq!(v["type"], "snapshot");
        assert_eq!(v["t"], 0);
        assert_eq!(v["robots"].as_array().unwrap().len(), 6);
        assert_eq!(v["robots"][0]["mode"], "apf");
        assert_eq!(v["robots"][0]["controlled"], true);
        assert_eq!(v["robots"][3]["controlled"], false);
    }

    #[test]
    fn toggle_flips_and_restores() {
        let mut s = session();
        s.advance().unwrap();
        assert_eq!(s.snapshot().robots[0].mode, Mode::Apf);
        assert_eq!(s.toggle(0).unwrap(), Some(Mode::Wf));
        assert_eq!(s.advance().unwrap().robots[0].mode, Mode::Wf);
        assert_eq!(s.toggle(0).unwrap(), None);
        assert_eq!(s.advance().unwrap().robots[0].human_override, None);
    }

    #[test]
    fn uncontrolled_toggle_is_rejected() {
        let mut s = session();
        let h = s.handle(ClientMessage::Toggle { id: 4 });
        assert!(matches!(h.reply, ServerMessage::Error { .. }));
        assert_eq!(s.simulation().robots()[4].human_override, None);
    }

    #[test]
    fn step_only_while_paused() {
        let mut s = session();
        let h = s.handle(ClientMessage::Control { action: ControlAction::Step });
        assert_eq!(h.snapshot.unwrap().t, 1);
        s.handle(ClientMessage::Control { action: ControlAction::Resume });
        let h = s.handle(ClientMessage::Control { action: ControlAction::Step });
        assert!(matches!(h.reply, ServerMessage::Error { .. }));
        let h = s.handle(ClientMessage::Control { action: ControlAction::Reset });
        let snap = h.snapshot.unwrap();
        assert_eq!((snap.t, snap.episode), (0, 1));
    }

    #[test]
    fn recording_counts_and_double_stop() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.jsonl");
        let mut s = session();
        s.handle(ClientMessage::Record { action: RecordAction::Start, path: Some(path.clone()) });
        assert!(s.is_recording());
        for _ in 0..10 {
            s.advance().unwrap();
        }
        assert_eq!(s.stop_recording().unwrap(), Some(30));
        let h = s.handle(ClientMessage::Record { action: RecordAction::Stop, path: None });
        assert!(matches!(h.reply, ServerMessage::Ack { .. }));
        let (header, records) = crate::dataset::read_dataset(&path).unwrap();
        assert_eq!(header.controlled_ids, vec![0, 1, 2]);
        assert_eq!(records.len(), 30);
    }

    #[test]
    fn unwritable_path_does_not_start_recording() {
        let mut s = session();
        let h = s.handle(ClientMessage::Record {
            action: RecordAction::Start,
            path: Some("/nonexistent-dir/x/demo.jsonl".into()),
        });
        assert!(matches!(h.reply, ServerMessage::Error { .. }));
        assert!(!s.is_recording());
    }
}

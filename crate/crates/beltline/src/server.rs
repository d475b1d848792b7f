//! Live service: the simulation loop on its own thread, and an HTTP +
//! WebSocket front end that talks to it only by message passing.
//!
//! * `GET /state` latest telemetry frame
//! * `POST /command` command envelope, answered with a reply
//! * `GET /config` effective configuration and parameter ranges
//! * `GET /stream` WebSocket pushing telemetry at `telemetry_hz`
//! * `GET /frame/latest.pgm` most recent capture

use std::path::PathBuf;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use beltline_core::controller::ControllerParams;
use beltline_core::metrics::RunSummary;
use beltline_core::sim::{LatestFrame, Simulation, TelemetryFrame, PROTO_VERSION};
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::{oneshot, watch};

use crate::config::SimConfig;
use crate::eventlog::{BackgroundLog, EventLog};
use crate::protocol::{Command, Envelope, ErrorBody, Reply};
use crate::runner::{dump_frames, log_records, Pacer};

/// Ticks run between command checks when unpaced.
const HEADLESS_BURST: usize = 500;

enum Msg {
    Command(Command, oneshot::Sender<Result<Option<Value>, ErrorBody>>),
    Shutdown,
}

/// Handle on the simulation thread.
#[derive(Clone)]
pub struct Station {
    tx: mpsc::Sender<Msg>,
    telemetry: watch::Receiver<Arc<TelemetryFrame>>,
    frame: watch::Receiver<Option<Arc<LatestFrame>>>,
    config: watch::Receiver<Arc<SimConfig>>,
}

pub struct StationThread {
    station: Station,
    join: Option<thread::JoinHandle<Option<RunSummary>>>,
}

impl StationThread {
    pub fn station(&self) -> Station {
        self.station.clone()
    }

    /// Stops any run in progress, flushes the log and joins the thread.
    /// Returns the summary of the last run, if one was started.
    pub fn shutdown(mut self) -> Option<RunSummary> {
        let _ = self.station.tx.send(Msg::Shutdown);
        self.join.take().and_then(|j| j.join().ok()).flatten()
    }
}

impl Drop for StationThread {
    fn drop(&mut self) {
        if let Some(j) = self.join.take() {
            let _ = self.station.tx.send(Msg::Shutdown);
            let _ = j.join();
        }
    }
}

struct Loop {
    cfg: SimConfig,
    sim: Simulation,
    log: Option<BackgroundLog>,
    frame_dir: Option<PathBuf>,
    pacer: Option<Pacer>,
    telemetry: watch::Sender<Arc<TelemetryFrame>>,
    frame: watch::Sender<Option<Arc<LatestFrame>>>,
    config: watch::Sender<Arc<SimConfig>>,
    ever_started: bool,
}

impl Loop {
    fn publish(&self) {
        self.telemetry.send_replace(Arc::new(self.sim.snapshot()));
    }

    fn pump_events(&mut self) {
        let events = self.sim.drain_events();
        if events.is_empty() {
            return;
        }
        if events.iter().any(|e| matches!(e, beltline_core::sim::SimEvent::Capture { .. })) {
            self.frame.send_replace(self.sim.latest_frame().cloned().map(Arc::new));
            if let Some(dir) = &self.frame_dir {
                if let Err(e) = dump_frames(&self.sim, &events, dir) {
                    tracing::warn!("frame dump: {e}");
                }
            }
        }
        if let Some(log) = &self.log {
            for rec in log_records(events) {
                log.send(rec);
            }
        }
    }

    fn apply(&mut self, cmd: Command) -> Result<Option<Value>, ErrorBody> {
        let out = match cmd {
            Command::Start => {
                if self.sim.is_running() {
                    return Err(ErrorBody {
                        kind: "invalid".into(),
                        message: "a run is already in progress".into(),
                        field: None,
                    });
                }
                self.sim.start();
                self.ever_started = true;
                self.pacer = (!self.cfg.run.headless).then(|| Pacer::new(self.cfg.run.time_scale, self.sim.now_ms()));
                None
            }
            Command::Stop => {
                let summary = self.sim.stop();
                self.pump_events();
                Some(serde_json::to_value(summary).expect("summary serialises"))
            }
            Command::SetParams(patch) => {
                self.sim.set_params(&patch)?;
                self.cfg.controller = *self.sim.params();
                self.config.send_replace(Arc::new(self.cfg.clone()));
                None
            }
            Command::SetScenario(scenario) => {
                self.sim.set_scenario(scenario)?;
                self.cfg.scenario = scenario;
                if self.cfg.recipe.as_ref().is_some_and(|r| r.case_kind != scenario.case_kind) {
                    self.cfg.recipe = None;
                }
                self.config.send_replace(Arc::new(self.cfg.clone()));
                None
            }
            Command::SnapshotFrame => {
                let Some(latest) = self.sim.latest_frame() else {
                    return Err(ErrorBody::unavailable("no frame has been captured yet"));
                };
                let mut result = json!({
                    "object_id": latest.object_id,
                    "capture_ms": latest.capture_ms,
                    "ref": format!("/frame/latest.pgm?object_id={}", latest.object_id),
                });
                if let Some(dir) = &self.frame_dir {
                    let path = dir.join(format!("frame_{}.pgm", latest.object_id));
                    crate::pgm::save(&latest.frame, &path)
                        .map_err(|e| ErrorBody::unavailable(format!("writing {}: {e}", path.display())))?;
                    result["path"] = json!(path);
                }
                self.frame.send_replace(Some(Arc::new(latest.clone())));
                Some(result)
            }
        };
        self.publish();
        Ok(out)
    }

    fn run(mut self, rx: mpsc::Receiver<Msg>) -> Option<RunSummary> {
        let period = Duration::from_secs_f64(1.0 / f64::from(self.cfg.server.telemetry_hz));
        let mut last_publish = Instant::now();
        loop {
            // Commands land between ticks only.
            let msg = if self.sim.is_running() {
                rx.try_recv().map_err(|e| matches!(e, mpsc::TryRecvError::Disconnected))
            } else {
                rx.recv_timeout(period).map_err(|e| matches!(e, mpsc::RecvTimeoutError::Disconnected))
            };
            match msg {
                Ok(Msg::Command(cmd, reply)) => {
                    let _ = reply.send(self.apply(cmd));
                    continue;
                }
                Ok(Msg::Shutdown) | Err(true) => break,
                Err(false) => {}
            }

            if self.sim.is_running() {
                match &self.pacer {
                    Some(p) => {
                        let target = p.target_ms();
                        let mut budget = HEADLESS_BURST;
                        while self.sim.is_running() && self.sim.now_ms() < target && budget > 0 {
                            self.sim.step();
                            self.pump_events();
                            budget -= 1;
                        }
                        if self.sim.now_ms() >= target {
                            thread::sleep(Duration::from_millis(1));
                        }
                    }
                    None => {
                        for _ in 0..HEADLESS_BURST {
                            if !self.sim.is_running() {
                                break;
                            }
                            self.sim.step();
                            self.pump_events();
                        }
                    }
                }
                if self.sim.is_finished() {
                    // Final frame of a run that hit its limit.
                    self.publish();
                    last_publish = Instant::now();
                    continue;
                }
            }
            if last_publish.elapsed() >= period {
                self.publish();
                last_publish = Instant::now();
            }
        }
        if self.sim.is_running() {
            self.sim.stop();
            self.pump_events();
            self.publish();
        }
        if let Some(log) = self.log.take() {
            let lost = log.close();
            if !lost.is_empty() {
                tracing::error!("{} log record(s) could not be written", lost.len());
            }
        }
        self.ever_started.then(|| self.sim.summary())
    }
}

/// Starts the simulation thread. With `autostart` the run begins at once.
pub fn spawn_station(cfg: SimConfig, autostart: bool) -> anyhow::Result<StationThread> {
    cfg.validate()?;
    let sim = Simulation::new(cfg.engine())?;
    let log = match &cfg.run.log_path {
        Some(p) => Some(BackgroundLog::spawn(EventLog::append_to(p)?)),
        None => None,
    };
    if let Some(dir) = &cfg.run.frame_dir {
        std::fs::create_dir_all(dir)?;
    }
    let (telemetry, telemetry_rx) = watch::channel(Arc::new(sim.snapshot()));
    let (frame, frame_rx) = watch::channel(None);
    let (config, config_rx) = watch::channel(Arc::new(cfg.clone()));
    let (tx, rx) = mpsc::channel();
    let mut lp = Loop {
        frame_dir: cfg.run.frame_dir.clone(),
        cfg,
        sim,
        log,
        pacer: None,
        telemetry,
        frame,
        config,
        ever_started: false,
    };
    if autostart {
        lp.apply(Command::Start).map_err(|e| anyhow::anyhow!(e.message))?;
    }
    let join = thread::Builder::new().name("sim-loop".into()).spawn(move || lp.run(rx))?;
    Ok(StationThread {
        station: Station {
            tx,
            telemetry: telemetry_rx,
            frame: frame_rx,
            config: config_rx,
        },
        join: Some(join),
    })
}

impl Station {
    pub fn telemetry(&self) -> Arc<TelemetryFrame> {
        self.telemetry.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<TelemetryFrame>> {
        self.telemetry.clone()
    }

    pub async fn command(&self, env: &Envelope) -> Reply {
        let cmd = match Command::parse(env) {
            Ok(c) => c,
            Err(e) => return Reply::err(env.id.clone(), e),
        };
        let (tx, rx) = oneshot::channel();
        if self.tx.send(Msg::Command(cmd, tx)).is_err() {
            return Reply::err(env.id.clone(), ErrorBody::unavailable("simulation loop has stopped"));
        }
        match rx.await {
            Ok(Ok(result)) => Reply::ok(env.id.clone(), result),
            Ok(Err(e)) => Reply::err(env.id.clone(), e),
            Err(_) => Reply::err(env.id.clone(), ErrorBody::unavailable("simulation loop has stopped")),
        }
    }
}

#[derive(Serialize)]
struct ConfigView<'a> {
    proto_version: u32,
    config: &'a SimConfig,
    ranges: &'a [beltline_core::controller::ParamRange],
    recipe: beltline_core::camera::InspectionRecipe,
    commands: &'a [&'a str],
    telemetry_hz: u32,
}

async fn get_state(State(st): State<Station>) -> Json<TelemetryFrame> {
    Json((*st.telemetry()).clone())
}

async fn get_config(State(st): State<Station>) -> Response {
    let cfg = st.config.borrow().clone();
    let view = ConfigView {
        proto_version: PROTO_VERSION,
        config: &cfg,
        ranges: &ControllerParams::RANGES,
        recipe: cfg.engine().recipe(),
        commands: &Command::NAMES,
        telemetry_hz: cfg.server.telemetry_hz,
    };
    Json(view).into_response()
}

fn reply_status(reply: &Reply) -> StatusCode {
    match &reply.error {
        None => StatusCode::OK,
        Some(e) if e.is_protocol() => StatusCode::BAD_REQUEST,
        Some(e) if e.kind == "unavailable" => StatusCode::SERVICE_UNAVAILABLE,
        Some(_) => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

async fn post_command(State(st): State<Station>, body: axum::body::Bytes) -> Response {
    let env: Envelope = match serde_json::from_slice(&body) {
        Ok(e) => e,
        Err(e) => {
            let reply = Reply::err(Value::Null, ErrorBody::protocol(format!("malformed envelope: {e}")));
            return (StatusCode::BAD_REQUEST, Json(reply)).into_response();
        }
    };
    let reply = st.command(&env).await;
    (reply_status(&reply), Json(reply)).into_response()
}

async fn get_frame(State(st): State<Station>) -> Response {
    let latest = st.frame.borrow().clone();
    match latest {
        Some(f) => (
            [
                (header::CONTENT_TYPE, "image/x-portable-graymap".to_owned()),
                (header::CACHE_CONTROL, "no-store".to_owned()),
                (header::HeaderName::from_static("x-object-id"), f.object_id.to_string()),
            ],
            crate::pgm::encode(&f.frame),
        )
            .into_response(),
        None => (StatusCode::NOT_FOUND, "no frame captured yet").into_response(),
    }
}

async fn get_stream(ws: WebSocketUpgrade, State(st): State<Station>) -> Response {
    ws.on_upgrade(move |socket| stream_client(socket, st))
}

/// Pushes the latest frame every telemetry period when it changed.
/// Intermediate frames are coalesced; order is never changed. Text
/// messages from the client are treated as command envelopes.
async fn stream_client(mut socket: WebSocket, st: Station) {
    let hz = st.config.borrow().server.telemetry_hz.max(1);
    let mut rx = st.subscribe();
    let mut tick = tokio::time::interval(Duration::from_secs_f64(1.0 / f64::from(hz)));
    tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    let first = rx.borrow_and_update().clone();
    if send_json(&mut socket, &*first).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            _ = tick.tick() => {
                if rx.has_changed().unwrap_or(false) {
                    let frame = rx.borrow_and_update().clone();
                    if send_json(&mut socket, &*frame).await.is_err() {
                        break;
                    }
                }
            }
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<Envelope>(&text) {
                        Ok(env) => st.command(&env).await,
                        Err(e) => Reply::err(Value::Null, ErrorBody::protocol(format!("malformed envelope: {e}"))),
                    };
                    if send_json(&mut socket, &reply).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn send_json<T: Serialize>(socket: &mut WebSocket, value: &T) -> Result<(), axum::Error> {
    let text = serde_json::to_string(value).expect("telemetry serialises");
    socket.send(Message::Text(text.into())).await
}

pub fn router(station: Station) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/command", post(post_command))
        .route("/config", get(get_config))
        .route("/stream", get(get_stream))
        .route("/frame/latest.pgm", get(get_frame))
        .with_state(station)
}

/// Serves until `shutdown` resolves, then stops the simulation thread and
/// returns the summary of the last run.
pub async fn serve(
    listener: tokio::net::TcpListener,
    station: StationThread,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<Option<RunSummary>> {
    let app = router(station.station());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(tokio::task::spawn_blocking(move || station.shutdown()).await?)
}

//! Fixed-step simulation engine.
//!
//! One master tick is 1 ms. Each tick the supervisor runs (and, on control
//! period boundaries, the PID), the feeder places parts, the plant advances,
//! the sensor is sampled and the camera finishes any capture or inspection
//! that fell due. Commands are applied by the owner between ticks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::{run_recipe, Camera, CameraConfig, InspectionRecipe, Missed, Outcome, RenderPose, ScheduledCapture, ToolResult};
use crate::controller::{
    indicate, pid_step, restabilize, set_params, supervisor_tick, ControllerParams, ControllerState, ParamsPatch, Phase,
    TriggerPulse,
};
use crate::metrics::{ConfusionCounts, InspectionEvent, RunEnd, RunEndTag, RunSummary};
use crate::plant::{set_illumination, BeltGeometry, Illumination, MotorParams, MotorState, ObjectInstance, PhotoSensor};
use crate::rng::SimRng;
use crate::scenarios::{recipe_for, CaseKind, ObjectStream, ScenarioConfig, Truth};
use crate::vision::Frame;
use crate::{CoreError, CoreResult};

/// Version of the telemetry and command protocol.
pub const PROTO_VERSION: u32 = 1;
/// Master tick, ms.
pub const TICK_MS: u64 = 1;
const DT_S: f64 = TICK_MS as f64 / 1000.0;

/// When a run ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunLimit {
    /// Simulated time, ms.
    DurationMs(u64),
    /// Number of parts fed; the run ends once each is inspected or has
    /// left the belt.
    Objects(u64),
    /// Runs until stopped.
    Unbounded,
}

/// Everything the engine needs to run.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub motor: MotorParams,
    pub geometry: BeltGeometry,
    pub sensor_latency_ms: u32,
    /// Drive the belt at a fixed surface speed (cm/s) instead of through
    /// the motor. The speed loop still runs against the motor model.
    pub belt_speed_override: Option<f64>,
    pub controller: ControllerParams,
    pub camera: CameraConfig,
    pub scenario: ScenarioConfig,
    /// Replaces the shipped recipe of the scenario's case.
    pub recipe: Option<InspectionRecipe>,
    /// Seeds per-capture sensor noise.
    pub seed: u64,
    pub limit: RunLimit,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            motor: MotorParams::default(),
            geometry: BeltGeometry::default(),
            sensor_latency_ms: 0,
            belt_speed_override: None,
            controller: ControllerParams::default(),
            camera: CameraConfig::default(),
            scenario: ScenarioConfig::default(),
            recipe: None,
            seed: 0,
            limit: RunLimit::Objects(500),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> CoreResult<()> {
        self.motor.validate()?;
        self.geometry.validate()?;
        self.controller.validate()?;
        self.camera.validate()?;
        self.scenario.validate()?;
        if let Some(v) = self.belt_speed_override {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CoreError::range("plant.belt_speed_override", v, 0.0, f64::MAX));
            }
        }
        if let Some(r) = &self.recipe {
            r.validate()?;
            if r.case_kind != self.scenario.case_kind {
                return Err(CoreError::invalid("recipe.case_kind", "recipe and scenario cases differ"));
            }
        }
        Ok(())
    }

    pub fn recipe(&self) -> InspectionRecipe {
        self.recipe.clone().unwrap_or_else(|| recipe_for(self.scenario.case_kind))
    }
}

/// Something that happened during a tick, in the order it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SimEvent {
    Edge { t_ms: u64, object_id: u64 },
    Trigger { t_ms: u64, object_id: Option<u64>, width_us: u32 },
    MissedTrigger { t_ms: u64, object_id: Option<u64>, reason: MissReason },
    Capture { t_ms: f64, object_id: u64 },
    Verdict(InspectionEvent),
    Exit { t_ms: u64, object_id: u64, inspected: bool },
    RunEnd(RunEnd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    Busy,
    TooShort,
    NoObject,
}

/// Position of one part for belt displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMarker {
    pub id: u64,
    pub x: f64,
    pub length: f64,
    pub truth: Truth,
    pub verdict: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastVerdict {
    pub object_id: u64,
    pub outcome: Outcome,
    pub truth: Truth,
    pub t_ms: f64,
}

/// Consistent snapshot of the running line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub proto_version: u32,
    pub t_ms: u64,
    pub running: bool,
    /// Set on the last frame of a run.
    pub terminal: bool,
    pub case: CaseKind,
    pub phase: Phase,
    /// Operator status line (the station's LCD).
    pub status: String,
    pub belt_speed_cmps: f64,
    pub pulses_per_period: u32,
    pub setpoint: f64,
    pub duty: u8,
    pub nivel_luz: u8,
    pub green_led: bool,
    pub red_led: bool,
    pub last_verdict: Option<LastVerdict>,
    pub counts: ConfusionCounts,
    pub summary: RunSummary,
    pub last_frame_ref: Option<String>,
    pub objects: Vec<ObjectMarker>,
}

/// The most recent captured frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LatestFrame {
    pub object_id: u64,
    pub capture_ms: f64,
    pub frame: Frame,
}

#[derive(Debug, Clone)]
struct PendingCapture {
    scheduled: ScheduledCapture,
    object_id: u64,
    edge_ms: u64,
}

#[derive(Debug, Clone)]
struct PendingVerdict {
    object_id: u64,
    truth: Truth,
    outcome: Outcome,
    tools: Vec<ToolResult>,
    edge_ms: u64,
    trigger_ms: u64,
    capture_ms: f64,
    verdict_ms: f64,
}

/// The simulated station. Owns all mutable state.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: EngineConfig,
    recipe: InspectionRecipe,
    now: u64,
    started: bool,
    finished: bool,
    motor: MotorState,
    illum: Illumination,
    belt_speed: f64,
    objects: Vec<ObjectInstance>,
    sensor: PhotoSensor,
    /// Time of the latest rising edge per object.
    edges: BTreeMap<u64, u64>,
    ctrl: ControllerState,
    period_pulses: u32,
    last_period_pulses: u32,
    camera: Camera,
    pending_capture: Option<PendingCapture>,
    pending_verdict: Option<PendingVerdict>,
    stream: ObjectStream,
    feeding: bool,
    spawned: u64,
    resolved: u64,
    judged: BTreeMap<u64, Outcome>,
    counts: ConfusionCounts,
    uninspected: u64,
    last_verdict: Option<LastVerdict>,
    latest_frame: Option<LatestFrame>,
    events: Vec<SimEvent>,
}

impl Simulation {
    pub fn new(cfg: EngineConfig) -> CoreResult<Self> {
        cfg.validate()?;
        Ok(Self::fresh(cfg))
    }

    fn fresh(cfg: EngineConfig) -> Self {
        Self {
            recipe: cfg.recipe(),
            now: 0,
            started: false,
            finished: false,
            motor: MotorState::default(),
            illum: Illumination::from_level(cfg.controller.nivel_luz),
            belt_speed: 0.0,
            objects: Vec::new(),
            sensor: PhotoSensor::new(cfg.sensor_latency_ms as usize),
            edges: BTreeMap::new(),
            ctrl: ControllerState::default(),
            period_pulses: 0,
            last_period_pulses: 0,
            camera: Camera::new(cfg.camera),
            pending_capture: None,
            pending_verdict: None,
            stream: ObjectStream::new(cfg.scenario),
            feeding: false,
            spawned: 0,
            resolved: 0,
            judged: BTreeMap::new(),
            counts: ConfusionCounts::default(),
            uninspected: 0,
            last_verdict: None,
            latest_frame: None,
            events: Vec::new(),
            cfg,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ControllerParams {
        &self.cfg.controller
    }

    pub fn now_ms(&self) -> u64 {
        self.now
    }

    pub fn is_running(&self) -> bool {
        self.started && !self.finished
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn phase(&self) -> Phase {
        self.ctrl.phase
    }

    pub fn controller_state(&self) -> &ControllerState {
        &self.ctrl
    }

    pub fn motor(&self) -> &MotorState {
        &self.motor
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn counts(&self) -> ConfusionCounts {
        self.counts
    }

    pub fn missed_triggers(&self) -> u64 {
        self.camera.missed_triggers
    }

    pub fn captures(&self) -> u64 {
        self.camera.captures
    }

    /// Pulses counted over the last complete control period.
    pub fn pulses_per_period(&self) -> u32 {
        self.last_period_pulses
    }

    pub fn latest_frame(&self) -> Option<&LatestFrame> {
        self.latest_frame.as_ref()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::from_counts(
            self.counts,
            self.now as f64 / 1000.0,
            self.camera.missed_triggers,
            self.uninspected,
        )
    }

    /// Takes the events produced since the last call.
    pub fn drain_events(&mut self) -> Vec<SimEvent> {
        core::mem::take(&mut self.events)
    }

    /// Starts the run. Starting a finished run begins a new one from rest
    /// with the current configuration.
    pub fn start(&mut self) {
        if self.finished {
            *self = Self::fresh(self.cfg.clone());
        }
        self.started = true;
    }

    /// Ends the run and emits the run-end record. Idempotent.
    pub fn stop(&mut self) -> RunSummary {
        self.finish(true);
        self.summary()
    }

    fn finish(&mut self, stopped: bool) {
        if self.finished {
            return;
        }
        self.finished = true;
        let s = self.summary();
        self.events.push(SimEvent::RunEnd(RunEnd {
            event: RunEndTag::RunEnd,
            t_ms: self.now as f64,
            elapsed_s: s.elapsed_s,
            missed_triggers: s.missed_triggers,
            uninspected: s.uninspected,
            stopped,
        }));
    }

    /// Validated parameter update, applied between ticks. A new speed
    /// setpoint sends the supervisor back to stabilisation.
    pub fn set_params(&mut self, patch: &ParamsPatch) -> CoreResult<()> {
        let next = set_params(&self.cfg.controller, patch)?;
        let setpoint_changed = next.setpoint != self.cfg.controller.setpoint;
        self.cfg.controller = next;
        self.illum = Illumination::from_level(next.nivel_luz);
        if setpoint_changed && self.ctrl.phase != Phase::Init {
            restabilize(&mut self.ctrl);
        }
        Ok(())
    }

    /// Sets the lighting level; same effect as a `nivel_luz` patch.
    pub fn set_illumination(&mut self, nivel: i64) -> CoreResult<()> {
        let illum = set_illumination(nivel)?;
        self.cfg.controller.nivel_luz = illum.nivel;
        self.illum = illum;
        Ok(())
    }

    /// Replaces the scenario (and its shipped recipe) for the next run.
    /// Rejected while a run is in progress.
    pub fn set_scenario(&mut self, scenario: ScenarioConfig) -> CoreResult<()> {
        if self.is_running() {
            return Err(CoreError::invalid("scenario", "stop the run before changing the scenario"));
        }
        scenario.validate()?;
        let mut cfg = self.cfg.clone();
        cfg.scenario = scenario;
        if cfg.recipe.as_ref().is_some_and(|r| r.case_kind != scenario.case_kind) {
            cfg.recipe = None;
        }
        let started = self.started && !self.finished;
        *self = Self::fresh(cfg);
        self.started = started;
        Ok(())
    }

    /// Runs to the configured limit and returns the final summary.
    pub fn run_to_end(&mut self) -> RunSummary {
        self.start();
        while !self.finished {
            self.step();
        }
        self.summary()
    }

    /// Advances one master tick. Does nothing unless running.
    pub fn step(&mut self) {
        if !self.is_running() {
            return;
        }
        let t = self.now;
        let params = self.cfg.controller;

        let sensor = self.sensor.state();
        if let Some(pulse) = supervisor_tick(&mut self.ctrl, &params, &sensor, TICK_MS as u32, t) {
            self.on_trigger(pulse);
        }
        if t % u64::from(params.control_period) == 0 {
            self.last_period_pulses = self.period_pulses;
            self.period_pulses = 0;
            if t > 0 {
                let duty = pid_step(&params, f64::from(self.last_period_pulses), &mut self.ctrl);
                self.motor.duty = duty;
            } else {
                self.motor.duty = pid_step(&params, 0.0, &mut self.ctrl);
            }
        }

        if self.ctrl.phase == Phase::Armed {
            self.feeding = true;
        }
        if self.feeding {
            self.feed();
        }

        let (pulses, revs) = self.motor.advance_revs(&self.cfg.motor, self.motor.duty, DT_S);
        self.period_pulses += pulses;
        let speed = match self.cfg.belt_speed_override {
            Some(v) => v,
            None => revs * 2.0 * core::f64::consts::PI * self.cfg.geometry.pulley_radius / DT_S,
        };
        self.belt_speed = speed;
        let adv = crate::plant::belt_advance_at(&mut self.objects, speed, &self.cfg.geometry, DT_S);

        self.now = t + TICK_MS;
        let now = self.now;
        for obj in adv.exited {
            self.on_exit(obj.id, now);
        }

        let s = self.sensor.sample(&self.objects, &self.cfg.geometry);
        if s.rising_edge() {
            if let Some(id) = s.object_id {
                self.edges.insert(id, now);
                self.events.push(SimEvent::Edge { t_ms: now, object_id: id });
            }
        }

        self.service_camera();

        if self.limit_reached() {
            self.finish(false);
        }
    }

    fn limit_reached(&self) -> bool {
        match self.cfg.limit {
            RunLimit::DurationMs(d) => self.now >= d,
            RunLimit::Objects(n) => {
                self.spawned >= n && self.resolved >= n && self.pending_capture.is_none() && self.pending_verdict.is_none()
            }
            RunLimit::Unbounded => false,
        }
    }

    fn feed(&mut self) {
        if let RunLimit::Objects(n) = self.cfg.limit {
            if self.spawned >= n {
                return;
            }
        }
        let pitch = self.cfg.scenario.pitch;
        let x = match self.objects.iter().map(|o| o.x).reduce(f64::min) {
            // The most recently placed part is the most upstream one.
            Some(last) if last >= pitch => last - pitch,
            Some(_) => return,
            None => 0.0,
        };
        let obj = self.stream.next_at(x);
        self.objects.push(obj);
        self.spawned += 1;
    }

    fn on_trigger(&mut self, pulse: TriggerPulse) {
        self.events.push(SimEvent::Trigger {
            t_ms: pulse.start_time,
            object_id: pulse.object_id,
            width_us: pulse.width,
        });
        let Some(object_id) = pulse.object_id else {
            self.events.push(SimEvent::MissedTrigger {
                t_ms: pulse.start_time,
                object_id: None,
                reason: MissReason::NoObject,
            });
            return;
        };
        match self.camera.trigger(pulse) {
            Ok(scheduled) => {
                let edge_ms = self.edges.get(&object_id).copied().unwrap_or(pulse.start_time);
                self.pending_capture = Some(PendingCapture {
                    scheduled,
                    object_id,
                    edge_ms,
                });
            }
            Err(m) => self.events.push(SimEvent::MissedTrigger {
                t_ms: pulse.start_time,
                object_id: Some(object_id),
                reason: match m {
                    Missed::Busy => MissReason::Busy,
                    Missed::TooShort => MissReason::TooShort,
                },
            }),
        }
    }

    fn service_camera(&mut self) {
        let now = self.now as f64;
        if self
            .pending_capture
            .as_ref()
            .is_some_and(|p| p.scheduled.capture_time <= now)
        {
            let p = self.pending_capture.take().expect("checked above");
            self.capture(p);
        }
        if self
            .pending_verdict
            .as_ref()
            .is_some_and(|v| v.verdict_ms <= now)
        {
            let v = self.pending_verdict.take().expect("checked above");
            self.conclude(v);
        }
    }

    fn capture(&mut self, p: PendingCapture) {
        let Some(obj) = self.objects.iter().find(|o| o.id == p.object_id) else {
            return;
        };
        let capture_ms = p.scheduled.capture_time;
        // Position at the frame boundary, which may fall between ticks.
        let back = self.belt_speed * (self.now as f64 - capture_ms) / 1000.0;
        let x_capture = obj.x - back;
        let cam = self.camera.config();
        let shift_px = libm::round((x_capture - self.cfg.geometry.inspect_pos) * cam.px_per_cm) as i32;
        let blur_px = libm::round(self.belt_speed * cam.exposure_ms / 1000.0 * cam.px_per_cm) as u32;
        let pose = RenderPose { shift_px, blur_px };
        let noise_seed = SimRng::with_stream(self.cfg.seed, p.object_id).next_u64();
        let obj = obj.clone();
        let event = self.camera.capture(&p.scheduled, &obj, &self.illum, pose, noise_seed);
        self.events.push(SimEvent::Capture {
            t_ms: capture_ms,
            object_id: obj.id,
        });
        let verdict = run_recipe(&event.frame, &self.recipe);
        self.latest_frame = Some(LatestFrame {
            object_id: obj.id,
            capture_ms,
            frame: event.frame,
        });
        let v = PendingVerdict {
            object_id: obj.id,
            truth: obj.truth,
            outcome: verdict.outcome,
            tools: verdict.tool_results,
            edge_ms: p.edge_ms,
            trigger_ms: p.scheduled.pulse.start_time,
            capture_ms,
            verdict_ms: p.scheduled.verdict_time,
        };
        if v.verdict_ms <= self.now as f64 {
            self.conclude(v);
        } else {
            self.pending_verdict = Some(v);
        }
    }

    fn conclude(&mut self, v: PendingVerdict) {
        self.counts.record(v.outcome, v.truth);
        // Indicators follow every verdict, whatever the supervisor phase.
        let (green, red) = indicate(v.outcome);
        self.ctrl.green_led = green;
        self.ctrl.red_led = red;
        self.resolved += 1;
        self.judged.insert(v.object_id, v.outcome);
        self.last_verdict = Some(LastVerdict {
            object_id: v.object_id,
            outcome: v.outcome,
            truth: v.truth,
            t_ms: v.verdict_ms,
        });
        self.events.push(SimEvent::Verdict(InspectionEvent {
            t_ms: v.verdict_ms,
            object_id: v.object_id,
            case: self.cfg.scenario.case_kind,
            truth: v.truth,
            verdict: v.outcome,
            tools: v.tools,
            latency_ms: v.verdict_ms - v.trigger_ms as f64,
            edge_ms: v.edge_ms as f64,
            trigger_ms: v.trigger_ms as f64,
            capture_ms: v.capture_ms,
        }));
    }

    fn on_exit(&mut self, id: u64, now: u64) {
        self.edges.remove(&id);
        let inspected = self.judged.remove(&id).is_some();
        let awaiting = self.pending_capture.as_ref().is_some_and(|p| p.object_id == id)
            || self.pending_verdict.as_ref().is_some_and(|v| v.object_id == id);
        if !inspected && !awaiting {
            self.uninspected += 1;
            self.resolved += 1;
        }
        self.events.push(SimEvent::Exit {
            t_ms: now,
            object_id: id,
            inspected,
        });
    }

    fn status_line(&self) -> String {
        let p = &self.cfg.controller;
        match self.ctrl.phase {
            _ if self.finished => format!("Run ended at {:.1} s", self.now as f64 / 1000.0),
            _ if !self.started => String::from("Ready"),
            Phase::Init => String::from("Starting"),
            Phase::Stabilizing => format!(
                "Stabilizing {:.1}/{:.1} s",
                f64::from(self.ctrl.phase_timer) / 1000.0,
                f64::from(p.t_espera) / 1000.0
            ),
            Phase::Armed => format!("Armed, {} inspected", self.counts.total()),
            Phase::Triggering => format!("Capturing, {} inspected", self.counts.total()),
        }
    }

    pub fn snapshot(&self) -> TelemetryFrame {
        TelemetryFrame {
            proto_version: PROTO_VERSION,
            t_ms: self.now,
            running: self.is_running(),
            terminal: self.finished,
            case: self.cfg.scenario.case_kind,
            phase: self.ctrl.phase,
            status: self.status_line(),
            belt_speed_cmps: self.belt_speed,
            pulses_per_period: self.last_period_pulses,
            setpoint: self.cfg.controller.setpoint,
            duty: self.motor.duty,
            nivel_luz: self.illum.nivel,
            green_led: self.ctrl.green_led,
            red_led: self.ctrl.red_led,
            last_verdict: self.last_verdict.clone(),
            counts: self.counts,
            summary: self.summary(),
            last_frame_ref: self
                .latest_frame
                .as_ref()
                .map(|f| format!("/frame/latest.pgm?object_id={}", f.object_id)),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectMarker {
                    id: o.id,
                    x: o.x,
                    length: o.length,
                    truth: o.truth,
                    verdict: self.judged.get(&o.id).copied(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(case: CaseKind, limit: RunLimit) -> EngineConfig {
        let mut scenario = ScenarioConfig::new(case);
        scenario.seed = 3;
        EngineConfig {
            scenario,
            limit,
            controller: ControllerParams {
                t_espera: 1500,
                ..ControllerParams::default()
            },
            ..EngineConfig::default()
        }
    }

    #[test]
    fn zero_duration_inspects_nothing() {
        let mut sim = Simulation::new(quick(CaseKind::A, RunLimit::DurationMs(0))).unwrap();
        let s = sim.run_to_end();
        assert_eq!(s.inspected, 0);
        assert_eq!(s.sensitivity_pct, None);
    }

    #[test]
    fn no_trigger_before_armed() {
        let mut sim = Simulation::new(quick(CaseKind::B, RunLimit::DurationMs(1400))).unwrap();
        sim.run_to_end();
        let ev = sim.drain_events();
        assert!(!ev.iter().any(|e| matches!(e, SimEvent::Trigger { .. })));
        assert_eq!(sim.phase(), Phase::Stabilizing);
    }

    #[test]
    fn small_run_resolves_every_object() {
        let mut sim = Simulation::new(quick(CaseKind::B, RunLimit::Objects(12))).unwrap();
        let s = sim.run_to_end();
        assert_eq!(s.inspected + s.uninspected, 12);
        assert_eq!(s.inspected, 12);
        let ev = sim.drain_events();
        assert!(matches!(ev.last(), Some(SimEvent::RunEnd(_))));
    }

    #[test]
    fn setpoint_change_restabilizes() {
        let mut sim = Simulation::new(quick(CaseKind::A, RunLimit::Unbounded)).unwrap();
        sim.start();
        for _ in 0..2000 {
            sim.step();
        }
        assert!(sim.phase().sensor_enabled());
        sim.set_params(&ParamsPatch {
            setpoint: Some(100.0),
            ..ParamsPatch::default()
        })
        .unwrap();
        assert_eq!(sim.snapshot().phase, Phase::Stabilizing);
        let err = sim.set_params(&ParamsPatch {
            nivel_luz: Some(300),
            ..ParamsPatch::default()
        });
        assert!(matches!(err, Err(CoreError::Range { .. })));
        assert_eq!(sim.params().nivel_luz, 255);
    }

    #[test]
    fn scenario_change_needs_a_stopped_run() {
        let mut sim = Simulation::new(quick(CaseKind::A, RunLimit::Unbounded)).unwrap();
        sim.start();
        sim.step();
        assert!(sim.set_scenario(ScenarioConfig::new(CaseKind::C)).is_err());
        sim.stop();
        sim.set_scenario(ScenarioConfig::new(CaseKind::C)).unwrap();
        assert_eq!(sim.snapshot().case, CaseKind::C);
    }

    #[test]
    fn stop_emits_terminal_frame() {
        let mut sim = Simulation::new(quick(CaseKind::A, RunLimit::Unbounded)).unwrap();
        sim.start();
        for _ in 0..10 {
            sim.step();
        }
        sim.stop();
        let snap = sim.snapshot();
        assert!(snap.terminal && !snap.running);
        assert_eq!(snap.t_ms, 10);
        sim.step();
        assert_eq!(sim.now_ms(), 10);
    }
}

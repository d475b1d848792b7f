//! Embedded supervisor: PID belt-speed loop, stabilisation wait, sensor
//! arming, trigger pulse generation and the pass/fail indicator LEDs.

use serde::{Deserialize, Serialize};

use crate::camera::Outcome;
use crate::plant::SensorState;
use crate::{CoreError, CoreResult};

/// Highest accepted speed setpoint, pulses per control period.
pub const SETPOINT_MAX: f64 = 1000.0;

/// Supervisor parameters. Defaults are the station's factory settings;
/// the PID gains were tuned against the first-order motor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Encoder pulses per control period.
    pub setpoint: f64,
    pub nivel_luz: u8,
    /// Stabilisation wait in ms.
    pub t_espera: u32,
    /// Trigger pulse width in µs.
    pub time_trig: u32,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// PID period in ms.
    pub control_period: u32,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            setpoint: 200.0,
            nivel_luz: 255,
            t_espera: 6000,
            time_trig: 2000,
            kp: 0.45,
            ki: 0.55,
            kd: 0.0,
            control_period: 150,
            u_min: 0.0,
            u_max: 255.0,
        }
    }
}

/// Documented range of one parameter, as published to clients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
}

impl ControllerParams {
    pub const RANGES: [ParamRange; 10] = [
        ParamRange { name: "setpoint", min: 0.0, max: SETPOINT_MAX, integer: false },
        ParamRange { name: "nivel_luz", min: 0.0, max: 255.0, integer: true },
        ParamRange { name: "t_espera", min: 0.0, max: 600_000.0, integer: true },
        ParamRange { name: "time_trig", min: 1.0, max: 1_000_000.0, integer: true },
        ParamRange { name: "kp", min: 0.0, max: 1000.0, integer: false },
        ParamRange { name: "ki", min: 0.0, max: 1000.0, integer: false },
        ParamRange { name: "kd", min: 0.0, max: 1000.0, integer: false },
        ParamRange { name: "control_period", min: 1.0, max: 10_000.0, integer: true },
        ParamRange { name: "u_min", min: 0.0, max: 255.0, integer: false },
        ParamRange { name: "u_max", min: 0.0, max: 255.0, integer: false },
    ];

    fn range(name: &str) -> ParamRange {
        *Self::RANGES
            .iter()
            .find(|r| r.name == name)
            .expect("known parameter")
    }

    pub fn validate(&self) -> CoreResult<()> {
        let check = |name: &'static str, v: f64| {
            let r = Self::range(name);
            if v.is_finite() && v >= r.min && v <= r.max {
                Ok(())
            } else {
                Err(CoreError::range(name, v, r.min, r.max))
            }
        };
        check("setpoint", self.setpoint)?;
        check("t_espera", f64::from(self.t_espera))?;
        check("time_trig", f64::from(self.time_trig))?;
        check("kp", self.kp)?;
        check("ki", self.ki)?;
        check("kd", self.kd)?;
        check("control_period", f64::from(self.control_period))?;
        check("u_min", self.u_min)?;
        check("u_max", self.u_max)?;
        if self.u_min >= self.u_max {
            return Err(CoreError::invalid("u_min", "require u_min < u_max"));
        }
        Ok(())
    }
}

/// Partial parameter update. Integer fields are carried as `i64` so that
/// out-of-range requests (e.g. a light level of 300) can be rejected with a
/// range error instead of a decode failure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsPatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nivel_luz: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_espera: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_trig: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ki: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_period: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
}

fn int_field<T: TryFrom<i64>>(name: &'static str, v: i64) -> CoreResult<T> {
    let r = ControllerParams::range(name);
    if (v as f64) < r.min || (v as f64) > r.max {
        return Err(CoreError::range(name, v as f64, r.min, r.max));
    }
    T::try_from(v).map_err(|_| CoreError::range(name, v as f64, r.min, r.max))
}

/// Validated merge of `patch` into `current`. Nothing is applied unless the
/// whole merged parameter set is valid.
pub fn set_params(current: &ControllerParams, patch: &ParamsPatch) -> CoreResult<ControllerParams> {
    let mut next = *current;
    if let Some(v) = patch.setpoint {
        next.setpoint = v;
    }
    if let Some(v) = patch.nivel_luz {
        next.nivel_luz = int_field("nivel_luz", v)?;
    }
    if let Some(v) = patch.t_espera {
        next.t_espera = int_field("t_espera", v)?;
    }
    if let Some(v) = patch.time_trig {
        next.time_trig = int_field("time_trig", v)?;
    }
    if let Some(v) = patch.kp {
        next.kp = v;
    }
    if let Some(v) = patch.ki {
        next.ki = v;
    }
    if let Some(v) = patch.kd {
        next.kd = v;
    }
    if let Some(v) = patch.control_period {
        next.control_period = int_field("control_period", v)?;
    }
    if let Some(v) = patch.u_min {
        next.u_min = v;
    }
    if let Some(v) = patch.u_max {
        next.u_max = v;
    }
    next.validate()?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[default]
    Init,
    Stabilizing,
    Armed,
    Triggering,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Init => "Init",
            Phase::Stabilizing => "Stabilizing",
            Phase::Armed => "Armed",
            Phase::Triggering => "Triggering",
        }
    }

    /// Whether the photoelectric sensor is enabled.
    pub fn sensor_enabled(&self) -> bool {
        matches!(self, Phase::Armed | Phase::Triggering)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub phase: Phase,
    pub integrator: f64,
    pub prev_error: f64,
    /// Time spent in the current phase, ms.
    pub phase_timer: u32,
    /// Remaining trigger pulse width, µs.
    pub trigger_remaining: u32,
    pub green_led: bool,
    pub red_led: bool,
}

/// A trigger pulse sent to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerPulse {
    /// Simulation time of the rising edge, ms.
    pub start_time: u64,
    /// Pulse width, µs.
    pub width: u32,
    /// Object that interrupted the beam.
    pub object_id: Option<u64>,
}

/// One PID update. Returns the duty byte for the next control period.
///
/// Positional form with conditional integration: the integrator takes the
/// new error only if the resulting output stays inside `[u_min, u_max]`.
pub fn pid_step(params: &ControllerParams, measured_pulses: f64, state: &mut ControllerState) -> u8 {
    let e = params.setpoint - measured_pulses;
    let derivative = params.kd * (e - state.prev_error);
    let candidate = state.integrator + e;
    let unsaturated = params.kp * e + params.ki * candidate + derivative;
    let u = if unsaturated >= params.u_min && unsaturated <= params.u_max {
        state.integrator = candidate;
        unsaturated
    } else {
        (params.kp * e + params.ki * state.integrator + derivative).clamp(params.u_min, params.u_max)
    };
    let bound = (params.u_max - params.u_min) / params.ki.max(f64::EPSILON);
    state.integrator = state.integrator.clamp(-bound, bound);
    state.prev_error = e;
    libm::round(u.clamp(0.0, 255.0)) as u8
}

/// Phase-machine step of `dt` ms at simulation time `now` (ms).
///
/// Init enters Stabilizing at once; Stabilizing arms the sensor after
/// `t_espera`; an armed rising edge emits a pulse and holds Triggering for
/// `time_trig`, during which further edges are ignored.
pub fn supervisor_tick(
    state: &mut ControllerState,
    params: &ControllerParams,
    sensor: &SensorState,
    dt: u32,
    now: u64,
) -> Option<TriggerPulse> {
    debug_assert!(dt > 0);
    match state.phase {
        Phase::Init => {
            state.phase = Phase::Stabilizing;
            state.phase_timer = 0;
            None
        }
        Phase::Stabilizing => {
            state.phase_timer = state.phase_timer.saturating_add(dt);
            if state.phase_timer >= params.t_espera {
                state.phase = Phase::Armed;
                state.phase_timer = 0;
            }
            None
        }
        Phase::Armed => {
            state.phase_timer = state.phase_timer.saturating_add(dt);
            if sensor.rising_edge() {
                state.phase = Phase::Triggering;
                state.phase_timer = 0;
                state.trigger_remaining = params.time_trig;
                Some(TriggerPulse {
                    start_time: now,
                    width: params.time_trig,
                    object_id: sensor.object_id,
                })
            } else {
                None
            }
        }
        Phase::Triggering => {
            state.phase_timer = state.phase_timer.saturating_add(dt);
            state.trigger_remaining = state.trigger_remaining.saturating_sub(dt.saturating_mul(1000));
            if state.trigger_remaining == 0 {
                state.phase = Phase::Armed;
                state.phase_timer = 0;
            }
            None
        }
    }
}

/// Forces re-stabilisation, e.g. after a speed setpoint change.
pub fn restabilize(state: &mut ControllerState) {
    state.phase = Phase::Stabilizing;
    state.phase_timer = 0;
    state.trigger_remaining = 0;
}

/// Indicator LEDs for a verdict: green for a pass, red for a fail.
pub fn indicate(outcome: Outcome) -> (bool, bool) {
    match outcome {
        Outcome::Pass => (true, false),
        Outcome::Fail => (false, true),
    }
}

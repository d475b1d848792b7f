//! Virtual plant: geared DC motor with output-shaft encoder, belt kinematics,
//! object conveyance, diffuse photoelectric sensor and LED lighting.
//!
//! All state advances through explicit `dt` steps; nothing here reads a clock.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::scenarios::{Appearance, CaseKind, Truth};
use crate::{CoreError, CoreResult};

/// Rated output-shaft speed of the gearmotor (after the 1:34 reduction).
pub const MOTOR_MAX_RPM: f64 = 110.0;
/// Encoder pulses per output-shaft revolution.
pub const ENCODER_PULSES_PER_REV: f64 = 748.0;
/// Mechanical time constant of the first-order motor model.
pub const MOTOR_TAU_S: f64 = 0.3;
pub const GEAR_RATIO: f64 = 34.0;
/// Belt speed at rated motor speed.
pub const BELT_MAX_SPEED_CMPS: f64 = 67.0;
/// Upper bound for the belt speed given the shipped pulley radius.
pub const BELT_SPEED_CEILING_CMPS: f64 = 67.06;
pub const DUTY_MAX: u8 = 255;

/// Constants of the first-order motor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorParams {
    pub max_rpm: f64,
    pub tau_s: f64,
    pub pulses_per_rev: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            max_rpm: MOTOR_MAX_RPM,
            tau_s: MOTOR_TAU_S,
            pulses_per_rev: ENCODER_PULSES_PER_REV,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.max_rpm > 0.0 && self.max_rpm.is_finite()) {
            return Err(CoreError::range("plant.motor.max_rpm", self.max_rpm, 0.0, f64::MAX));
        }
        if !(self.tau_s > 0.0 && self.tau_s.is_finite()) {
            return Err(CoreError::range("plant.motor.tau_s", self.tau_s, 0.0, f64::MAX));
        }
        if !(self.pulses_per_rev >= 1.0 && self.pulses_per_rev.is_finite()) {
            return Err(CoreError::range(
                "plant.motor.pulses_per_rev",
                self.pulses_per_rev,
                1.0,
                f64::MAX,
            ));
        }
        Ok(())
    }

    /// Steady-state output speed for a PWM duty byte.
    pub fn steady_rpm(&self, duty: u8) -> f64 {
        self.max_rpm * f64::from(duty) / f64::from(DUTY_MAX)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    /// Output-shaft speed in rpm.
    pub omega_out: f64,
    /// Fractional encoder pulses not yet emitted.
    pub encoder_accum: f64,
    pub duty: u8,
}

impl MotorState {
    /// Advances the motor by `dt` seconds under `duty`, following
    /// `dω/dt = (ω_ss(duty) − ω)/τ` with the exact exponential solution, so
    /// the result does not depend on how an interval is partitioned.
    pub fn motor_step(&self, params: &MotorParams, duty: u8, dt: f64) -> MotorState {
        debug_assert!(dt > 0.0);
        let target = params.steady_rpm(duty);
        let decay = libm::exp(-dt / params.tau_s);
        let omega = target + (self.omega_out - target) * decay;
        MotorState {
            omega_out: omega.clamp(0.0, params.max_rpm),
            encoder_accum: self.encoder_accum,
            duty,
        }
    }

    /// Emits the whole encoder pulses produced by turning at the current
    /// speed for `dt` seconds. The fractional remainder is carried.
    pub fn encoder_pulses(&mut self, params: &MotorParams, dt: f64) -> u32 {
        let revs = self.omega_out / 60.0 * dt;
        self.accumulate(params, revs)
    }

    /// Steps the motor and emits the encoder pulses for the exact shaft
    /// rotation over the step (integral of the exponential speed profile).
    pub fn advance(&mut self, params: &MotorParams, duty: u8, dt: f64) -> u32 {
        self.advance_revs(params, duty, dt).0
    }

    /// [`advance`](Self::advance), also returning the shaft rotation in
    /// revolutions.
    pub fn advance_revs(&mut self, params: &MotorParams, duty: u8, dt: f64) -> (u32, f64) {
        let target = params.steady_rpm(duty);
        let decay = libm::exp(-dt / params.tau_s);
        let rpm_seconds = target * dt + (self.omega_out - target) * params.tau_s * (1.0 - decay);
        let next = self.motor_step(params, duty, dt);
        self.omega_out = next.omega_out;
        self.duty = duty;
        let revs = rpm_seconds.max(0.0) / 60.0;
        (self.accumulate(params, revs), revs)
    }

    fn accumulate(&mut self, params: &MotorParams, revs: f64) -> u32 {
        self.encoder_accum += params.pulses_per_rev * revs;
        let whole = libm::floor(self.encoder_accum);
        self.encoder_accum -= whole;
        // Guard against a -0.0 or tiny negative residue from rounding.
        if self.encoder_accum < 0.0 {
            self.encoder_accum = 0.0;
        }
        whole as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeltGeometry {
    /// Belt length in cm.
    pub length: f64,
    pub width: f64,
    /// Drive pulley radius in cm, chosen so rated motor speed gives 67 cm/s.
    pub pulley_radius: f64,
    /// Photoelectric sensor position, cm from the belt start.
    pub sensor_pos: f64,
    /// Camera optical axis, cm from the belt start. The camera is aimed so
    /// that a part is centred in the frame when its leading edge is here.
    pub inspect_pos: f64,
}

impl Default for BeltGeometry {
    fn default() -> Self {
        Self {
            length: 50.0,
            width: 4.0,
            pulley_radius: 5.82,
            sensor_pos: 10.0,
            inspect_pos: 10.5,
        }
    }
}

impl BeltGeometry {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(CoreError::range("plant.geometry.length", self.length, 0.0, f64::MAX));
        }
        if !(self.width > 0.0) {
            return Err(CoreError::range("plant.geometry.width", self.width, 0.0, f64::MAX));
        }
        if !(self.pulley_radius > 0.0 && self.pulley_radius.is_finite()) {
            return Err(CoreError::range(
                "plant.geometry.pulley_radius",
                self.pulley_radius,
                0.0,
                f64::MAX,
            ));
        }
        if !(self.sensor_pos > 0.0 && self.sensor_pos <= self.inspect_pos) {
            return Err(CoreError::invalid(
                "plant.geometry.sensor_pos",
                "require 0 < sensor_pos <= inspect_pos",
            ));
        }
        if !(self.inspect_pos < self.length) {
            return Err(CoreError::invalid(
                "plant.geometry.inspect_pos",
                "require inspect_pos < length",
            ));
        }
        Ok(())
    }

    /// Belt surface speed in cm/s for an output-shaft speed in rpm.
    pub fn belt_speed(&self, omega_rpm: f64) -> f64 {
        omega_rpm * 2.0 * PI * self.pulley_radius / 60.0
    }
}

/// A part travelling on the belt. `x` is the leading (downstream) edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u64,
    pub case_kind: CaseKind,
    pub truth: Truth,
    pub x: f64,
    pub length: f64,
    pub appearance: Appearance,
}

impl ObjectInstance {
    pub fn trailing_edge(&self) -> f64 {
        self.x - self.length
    }

    pub fn spans(&self, pos: f64) -> bool {
        self.trailing_edge() <= pos && pos <= self.x
    }
}

/// Result of one conveyance step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeltAdvance {
    pub belt_speed: f64,
    /// Objects that fell off the downstream end during this step.
    pub exited: Vec<ObjectInstance>,
}

/// Moves every object downstream by `belt_speed·dt` and removes those whose
/// trailing edge has passed the end of the belt.
pub fn belt_advance(
    objects: &mut Vec<ObjectInstance>,
    omega_out: f64,
    geom: &BeltGeometry,
    dt: f64,
) -> BeltAdvance {
    let belt_speed = geom.belt_speed(omega_out);
    belt_advance_at(objects, belt_speed, geom, dt)
}

/// Same as [`belt_advance`] with the surface speed given directly.
pub fn belt_advance_at(
    objects: &mut Vec<ObjectInstance>,
    belt_speed: f64,
    geom: &BeltGeometry,
    dt: f64,
) -> BeltAdvance {
    debug_assert!(dt >= 0.0);
    let dx = belt_speed * dt;
    for obj in objects.iter_mut() {
        obj.x += dx;
    }
    let mut exited = Vec::new();
    objects.retain(|obj| {
        if obj.trailing_edge() > geom.length {
            exited.push(obj.clone());
            false
        } else {
            true
        }
    });
    BeltAdvance { belt_speed, exited }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorState {
    pub blocked: bool,
    pub prev_blocked: bool,
    /// Object currently interrupting the beam, if any.
    pub object_id: Option<u64>,
}

impl SensorState {
    pub fn rising_edge(&self) -> bool {
        self.blocked && !self.prev_blocked
    }
}

/// Samples the diffuse sensor: blocked iff some object's closed span
/// `[x − length, x]` contains the sensor position.
pub fn sensor_sample(
    objects: &[ObjectInstance],
    geom: &BeltGeometry,
    sensor: &SensorState,
) -> SensorState {
    let hit = objects.iter().find(|o| o.spans(geom.sensor_pos));
    SensorState {
        blocked: hit.is_some(),
        prev_blocked: sensor.blocked,
        object_id: hit.map(|o| o.id),
    }
}

/// Photoelectric sensor with a switching latency expressed in whole plant
/// steps. Zero latency reproduces [`sensor_sample`] exactly.
#[derive(Debug, Clone, Default)]
pub struct PhotoSensor {
    latency_steps: usize,
    pending: VecDeque<(bool, Option<u64>)>,
    state: SensorState,
}

impl PhotoSensor {
    pub fn new(latency_steps: usize) -> Self {
        Self {
            latency_steps,
            pending: VecDeque::with_capacity(latency_steps + 1),
            state: SensorState::default(),
        }
    }

    pub fn state(&self) -> SensorState {
        self.state
    }

    pub fn sample(&mut self, objects: &[ObjectInstance], geom: &BeltGeometry) -> SensorState {
        let raw = sensor_sample(objects, geom, &self.state);
        self.pending.push_back((raw.blocked, raw.object_id));
        let (blocked, object_id) = if self.pending.len() > self.latency_steps {
            self.pending.pop_front().unwrap_or_default()
        } else {
            (false, None)
        };
        self.state = SensorState {
            blocked,
            prev_blocked: self.state.blocked,
            object_id,
        };
        self.state
    }
}

/// LED lighting level as commanded by the PWM byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    pub nivel: u8,
    pub relative_lux: f64,
}

impl Illumination {
    pub fn from_level(nivel: u8) -> Self {
        Self {
            nivel,
            relative_lux: f64::from(nivel) / 255.0,
        }
    }
}

impl Default for Illumination {
    fn default() -> Self {
        Self::from_level(255)
    }
}

/// Maps a lighting setpoint to relative light output (linear in the PWM
/// byte). Values outside 0–255 are rejected.
pub fn set_illumination(nivel: i64) -> CoreResult<Illumination> {
    u8::try_from(nivel)
        .map(Illumination::from_level)
        .map_err(|_| CoreError::range("nivel_luz", nivel as f64, 0.0, 255.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{Appearance, CaseKind, Truth};
    use alloc::vec;
    use proptest::prelude::*;

    fn obj(id: u64, x: f64, length: f64) -> ObjectInstance {
        ObjectInstance {
            id,
            case_kind: CaseKind::B,
            truth: Truth::Good,
            x,
            length,
            appearance: Appearance::good(CaseKind::B),
        }
    }

    #[test]
    fn rest_stays_at_rest() {
        let p = MotorParams::default();
        let s = MotorState::default().motor_step(&p, 0, 0.7);
        assert_eq!(s.omega_out, 0.0);
    }

    #[test]
    fn full_duty_reaches_rated_speed() {
        let p = MotorParams::default();
        let mut s = MotorState::default();
        for _ in 0..10_000 {
            s = s.motor_step(&p, 255, 0.001);
        }
        assert!((s.omega_out - 110.0).abs() < 1e-9);
    }

    #[test]
    fn step_response_after_one_time_constant() {
        let p = MotorParams::default();
        let mut s = MotorState::default();
        for _ in 0..300 {
            s = s.motor_step(&p, 255, 0.001);
        }
        let expected = 110.0 * (1.0 - (-1.0f64).exp());
        assert!((s.omega_out - expected).abs() < 1e-9);
        assert!((s.omega_out - 69.5).abs() < 0.05);
    }

    #[test]
    fn one_revolution_is_748_pulses() {
        let p = MotorParams::default();
        // 60 rpm for 1 s is exactly one revolution.
        let mut s = MotorState {
            omega_out: 60.0,
            ..Default::default()
        };
        let total: u32 = (0..1000).map(|_| s.encoder_pulses(&p, 0.001)).sum();
        assert!((747..=748).contains(&total));
        assert!(f64::from(total) + s.encoder_accum - 748.0 < 1e-6);
    }

    #[test]
    fn encoder_at_rated_speed_for_one_second() {
        let p = MotorParams::default();
        let mut s = MotorState {
            omega_out: 110.0,
            ..Default::default()
        };
        assert_eq!(s.encoder_pulses(&p, 1.0), 1371);
        assert!((s.encoder_accum - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn stopped_encoder_is_silent() {
        let p = MotorParams::default();
        let mut s = MotorState::default();
        assert_eq!(s.encoder_pulses(&p, 5.0), 0);
    }

    #[test]
    fn pulley_maps_rated_speed_to_belt_max() {
        let g = BeltGeometry::default();
        let v = g.belt_speed(110.0);
        assert!((v - 67.0).abs() < 0.06, "{v}");
        assert!(v <= BELT_SPEED_CEILING_CMPS);
    }

    #[test]
    fn zero_dt_leaves_positions() {
        let g = BeltGeometry::default();
        let mut objs = vec![obj(0, 12.5, 3.0)];
        let r = belt_advance(&mut objs, 110.0, &g, 0.0);
        assert_eq!(objs[0].x, 12.5);
        assert!(r.exited.is_empty());
    }

    #[test]
    fn object_past_end_is_despawned() {
        let g = BeltGeometry::default();
        let mut objs = vec![obj(0, 49.0, 2.0)];
        let r = belt_advance_at(&mut objs, 67.0, &g, 0.1);
        assert!(objs.is_empty());
        assert_eq!(r.exited.len(), 1);
        assert!((r.exited[0].x - 55.7).abs() < 1e-9);
    }

    #[test]
    fn sensor_empty_belt() {
        let g = BeltGeometry::default();
        assert!(!sensor_sample(&[], &g, &SensorState::default()).blocked);
    }

    #[test]
    fn sensor_closed_interval_at_leading_edge() {
        let g = BeltGeometry::default();
        let s = sensor_sample(&[obj(3, g.sensor_pos, 2.0)], &g, &SensorState::default());
        assert!(s.blocked && s.rising_edge());
        assert_eq!(s.object_id, Some(3));
    }

    #[test]
    fn sensor_rate_at_max_speed() {
        // Two objects 10.31 cm apart at 67 cm/s.
        let g = BeltGeometry::default();
        let mut objs = vec![obj(0, g.sensor_pos - 0.5, 2.0), obj(1, g.sensor_pos - 0.5 - 10.31, 2.0)];
        let mut sensor = SensorState::default();
        let mut edges = Vec::new();
        for step in 1..=400 {
            belt_advance_at(&mut objs, 67.0, &g, 0.001);
            sensor = sensor_sample(&objs, &g, &sensor);
            if sensor.rising_edge() {
                edges.push(step);
            }
        }
        assert_eq!(edges.len(), 2);
        let spacing_ms = f64::from(edges[1] - edges[0]);
        assert!((spacing_ms - 153.9).abs() <= 1.0, "{spacing_ms}");
        assert!((60_000.0 / spacing_ms - 390.0).abs() < 3.0);
    }

    #[test]
    fn delayed_sensor_lags_by_latency() {
        let g = BeltGeometry::default();
        let objs = vec![obj(0, g.sensor_pos, 1.0)];
        let mut s = PhotoSensor::new(3);
        let seen: Vec<bool> = (0..5).map(|_| s.sample(&objs, &g).blocked).collect();
        assert_eq!(seen, vec![false, false, false, true, true]);
    }

    #[test]
    fn illumination_levels() {
        assert_eq!(set_illumination(255).unwrap().relative_lux, 1.0);
        assert_eq!(set_illumination(0).unwrap().relative_lux, 0.0);
        assert!((set_illumination(128).unwrap().relative_lux - 0.50196).abs() < 1e-5);
        assert_eq!(set_illumination(300).unwrap_err().kind(), "range");
        assert_eq!(set_illumination(-1).unwrap_err().kind(), "range");
    }

    proptest! {
        #[test]
        fn pulse_conservation(steps in proptest::collection::vec((0u8..=255, 1u32..50), 1..60)) {
            // Any partition of the same duty schedule yields the same total
            // within one pulse of the exact rotation.
            let p = MotorParams::default();
            let mut coarse = MotorState::default();
            let mut fine = MotorState::default();
            let mut revs = 0.0;
            let (mut total_coarse, mut total_fine) = (0u64, 0u64);
            for &(duty, ms) in &steps {
                let dt = f64::from(ms) / 1000.0;
                let target = p.steady_rpm(duty);
                let decay = (-dt / p.tau_s).exp();
                revs += (target * dt + (coarse.omega_out - target) * p.tau_s * (1.0 - decay)) / 60.0;
                total_coarse += u64::from(coarse.advance(&p, duty, dt));
                for _ in 0..ms {
                    total_fine += u64::from(fine.advance(&p, duty, 0.001));
                }
            }
            let exact = 748.0 * revs;
            prop_assert!((total_coarse as f64 - exact).abs() < 1.0 + 1e-6);
            prop_assert!((total_fine as f64 - exact).abs() < 1.0 + 1e-6);
        }

        #[test]
        fn speed_ceiling(duties in proptest::collection::vec(0u8..=255, 1..500)) {
            let p = MotorParams::default();
            let g = BeltGeometry::default();
            let mut s = MotorState::default();
            for d in duties {
                s.advance(&p, d, 0.001);
                prop_assert!(s.omega_out <= 110.0 && s.omega_out >= 0.0);
                prop_assert!(g.belt_speed(s.omega_out) <= BELT_SPEED_CEILING_CMPS);
            }
        }

        #[test]
        fn edges_equal_objects(n in 1usize..12, len in 0.5f64..5.0, gap in 0.5f64..8.0, speed in 5.0f64..67.0) {
            let g = BeltGeometry::default();
            let pitch = len + gap;
            let mut objs: Vec<_> = (0..n).map(|i| obj(i as u64, -(i as f64) * pitch, len)).collect();
            let mut sensor = SensorState::default();
            let mut edges = 0;
            let mut last_x: Vec<f64> = objs.iter().map(|o| o.x).collect();
            while !objs.is_empty() {
                belt_advance_at(&mut objs, speed, &g, 0.001);
                sensor = sensor_sample(&objs, &g, &sensor);
                edges += usize::from(sensor.rising_edge());
                // Ordering: leading edges keep their spacing.
                for w in objs.windows(2) {
                    prop_assert!(w[0].x > w[1].x);
                }
                let now: Vec<f64> = objs.iter().map(|o| o.x).collect();
                for (a, b) in now.iter().zip(last_x.iter().skip(last_x.len() - now.len())) {
                    prop_assert!(a >= b);
                }
                last_x = now;
            }
            prop_assert_eq!(edges, n);
        }
    }
}

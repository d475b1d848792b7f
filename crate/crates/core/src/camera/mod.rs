//! Virtual smart camera: free-running 60 fps frame clock, trigger handling,
//! synthetic capture and recipe execution.

pub mod render;
mod recipe;

use serde::{Deserialize, Serialize};

use crate::controller::TriggerPulse;
use crate::plant::{Illumination, ObjectInstance};
use crate::vision::Frame;
use crate::{CoreError, CoreResult};

pub use recipe::{run_recipe, Criterion, InspectionRecipe, Outcome, ThresholdMode, Tool, ToolResult, ToolSpec, Verdict};
pub use render::{render, render_at, RenderPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fps: f64,
    /// Offset of the frame clock's first boundary, ms.
    pub clock_phase_ms: f64,
    /// Time from capture to verdict, ms.
    pub inspection_time_ms: f64,
    /// Standard deviation of additive sensor noise, grey levels.
    pub noise_sigma: f64,
    /// Image scale along the belt.
    pub px_per_cm: f64,
    /// Exposure for optional motion blur, ms (0 disables blur).
    pub exposure_ms: f64,
    /// Shortest trigger pulse the camera input can latch, µs.
    pub min_pulse_us: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fps: 60.0,
            clock_phase_ms: 0.0,
            inspection_time_ms: 5.0,
            noise_sigma: 4.0,
            px_per_cm: 64.0,
            exposure_ms: 0.0,
            min_pulse_us: 1000,
        }
    }
}

impl CameraConfig {
    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.fps
    }

    pub fn validate(&self) -> CoreResult<()> {
        if !(self.fps > 0.0 && self.fps <= 10_000.0) {
            return Err(CoreError::range("camera.fps", self.fps, 0.0, 10_000.0));
        }
        if !(self.inspection_time_ms >= 0.0 && self.inspection_time_ms.is_finite()) {
            return Err(CoreError::range(
                "camera.inspection_time_ms",
                self.inspection_time_ms,
                0.0,
                f64::MAX,
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma <= 128.0) {
            return Err(CoreError::range("camera.noise_sigma", self.noise_sigma, 0.0, 128.0));
        }
        if !(self.px_per_cm > 0.0 && self.px_per_cm.is_finite()) {
            return Err(CoreError::range("camera.px_per_cm", self.px_per_cm, 0.0, f64::MAX));
        }
        if !(self.exposure_ms >= 0.0 && self.exposure_ms.is_finite()) {
            return Err(CoreError::range("camera.exposure_ms", self.exposure_ms, 0.0, f64::MAX));
        }
        if !(self.clock_phase_ms.is_finite() && self.clock_phase_ms >= 0.0) {
            return Err(CoreError::range(
                "camera.clock_phase_ms",
                self.clock_phase_ms,
                0.0,
                f64::MAX,
            ));
        }
        Ok(())
    }
}

/// First frame-clock boundary at or after `t_ms`.
pub fn next_frame_boundary(t_ms: f64, period_ms: f64, phase_ms: f64) -> f64 {
    let k = (t_ms - phase_ms) / period_ms;
    let nearest = libm::round(k);
    // Absorb rounding noise so a trigger exactly on a boundary has zero latency.
    let k = if libm::fabs(k - nearest) < 1e-9 {
        nearest
    } else {
        libm::ceil(k)
    };
    phase_ms + k.max(0.0) * period_ms
}

/// A frame taken in response to a trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureEvent {
    pub trigger_time: f64,
    pub capture_time: f64,
    pub object_id: u64,
    pub frame: Frame,
}

/// A trigger accepted by the camera and waiting for its frame boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledCapture {
    pub pulse: TriggerPulse,
    pub capture_time: f64,
    pub verdict_time: f64,
}

/// Why a trigger did not produce a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Missed {
    /// The camera was still capturing or inspecting.
    Busy,
    /// Pulse shorter than the input can latch.
    TooShort,
}

/// Trigger-side state of the camera.
#[derive(Debug, Clone)]
pub struct Camera {
    cfg: CameraConfig,
    busy_until: f64,
    pub missed_triggers: u64,
    pub captures: u64,
}

impl Camera {
    pub fn new(cfg: CameraConfig) -> Self {
        Self {
            cfg,
            busy_until: f64::NEG_INFINITY,
            missed_triggers: 0,
            captures: 0,
        }
    }

    pub fn config(&self) -> &CameraConfig {
        &self.cfg
    }

    /// Accepts a pulse and schedules its capture at the next frame boundary.
    /// The camera stays busy until the verdict; pulses arriving meanwhile are
    /// dropped and counted.
    pub fn trigger(&mut self, pulse: TriggerPulse) -> Result<ScheduledCapture, Missed> {
        let t = pulse.start_time as f64;
        if pulse.width < self.cfg.min_pulse_us {
            self.missed_triggers += 1;
            return Err(Missed::TooShort);
        }
        if t < self.busy_until {
            self.missed_triggers += 1;
            return Err(Missed::Busy);
        }
        let capture_time = next_frame_boundary(t, self.cfg.frame_period_ms(), self.cfg.clock_phase_ms);
        let verdict_time = capture_time + self.cfg.inspection_time_ms;
        self.busy_until = verdict_time;
        Ok(ScheduledCapture {
            pulse,
            capture_time,
            verdict_time,
        })
    }

    /// Renders the scheduled frame of `obj`.
    pub fn capture(
        &mut self,
        scheduled: &ScheduledCapture,
        obj: &ObjectInstance,
        illum: &Illumination,
        pose: RenderPose,
        noise_seed: u64,
    ) -> CaptureEvent {
        self.captures += 1;
        CaptureEvent {
            trigger_time: scheduled.pulse.start_time as f64,
            capture_time: scheduled.capture_time,
            object_id: obj.id,
            frame: render_at(obj, illum, pose, noise_seed, &self.cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(t: u64) -> TriggerPulse {
        TriggerPulse {
            start_time: t,
            width: 2000,
            object_id: Some(1),
        }
    }

    #[test]
    fn trigger_on_boundary_has_zero_latency() {
        let mut cam = Camera::new(CameraConfig::default());
        // 50 ms is exactly three frame periods.
        let s = cam.trigger(pulse(50)).unwrap();
        assert!((s.capture_time - 50.0).abs() < 1e-9);
        assert_eq!(next_frame_boundary(0.0, 1000.0 / 60.0, 0.0), 0.0);
    }

    #[test]
    fn mid_period_latency_is_below_one_frame() {
        let period = 1000.0 / 60.0;
        for t in 0..1000u64 {
            let c = next_frame_boundary(t as f64, period, 0.0);
            let lat = c - t as f64;
            assert!((0.0..period).contains(&lat), "t={t} lat={lat}");
        }
    }

    #[test]
    fn busy_camera_drops_pulses() {
        let mut cam = Camera::new(CameraConfig::default());
        assert!(cam.trigger(pulse(1)).is_ok());
        assert_eq!(cam.trigger(pulse(10)), Err(Missed::Busy));
        assert_eq!(cam.missed_triggers, 1);
        assert!(cam.trigger(pulse(40)).is_ok());
    }

    #[test]
    fn short_pulse_is_missed() {
        let mut cam = Camera::new(CameraConfig::default());
        let p = TriggerPulse {
            width: 10,
            ..pulse(0)
        };
        assert_eq!(cam.trigger(p), Err(Missed::TooShort));
    }

    #[test]
    fn max_rate_never_misses() {
        let mut cam = Camera::new(CameraConfig::default());
        for k in 0..390u64 {
            assert!(cam.trigger(pulse(7 + k * 154)).is_ok());
        }
        assert_eq!(cam.missed_triggers, 0);
    }
}

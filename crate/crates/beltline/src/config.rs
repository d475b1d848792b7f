//! JSON configuration file.
//!
//! Every section is optional; absent fields take the station's factory
//! defaults. See `docs/config.md` for the schema.

use std::fmt;
use std::path::{Path, PathBuf};

use beltline_core::camera::{CameraConfig, InspectionRecipe};
use beltline_core::controller::ControllerParams;
use beltline_core::plant::{BeltGeometry, MotorParams};
use beltline_core::scenarios::ScenarioConfig;
use beltline_core::sim::{EngineConfig, RunLimit};
use beltline_core::CoreError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub controller: ControllerParams,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    /// Overrides the shipped recipe of the scenario's case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<InspectionRecipe>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub server: ServerConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub motor: MotorParams,
    pub geometry: BeltGeometry,
    /// Photoelectric sensor switching delay, ms.
    pub sensor_latency_ms: u32,
    /// Fixed belt surface speed in cm/s, bypassing the motor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belt_speed_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_count: Option<u64>,
    /// Overrides `scenario.seed` and seeds sensor noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Run as fast as possible instead of in step with the wall clock.
    pub headless: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_path: Option<PathBuf>,
    /// Directory receiving `frame_<object_id>.pgm` for every capture.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_dir: Option<PathBuf>,
    /// Simulated seconds per wall-clock second when not headless.
    pub time_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration_s: None,
            object_count: Some(500),
            seed: None,
            headless: true,
            log_path: None,
            frame_dir: None,
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub telemetry_hz: u32,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".to_owned(),
            telemetry_hz: 10,
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            controller: ControllerParams::default(),
            camera: CameraConfig::default(),
            scenario: ScenarioConfig::default(),
            recipe: None,
            run: RunConfig::default(),
            server: ServerConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// The document does not match the schema.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    /// The document parsed but violates an invariant.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    /// Dotted path of the offending field.
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Io { .. } => "",
            ConfigError::Schema { path, .. } | ConfigError::Invalid { path, .. } => path,
        }
    }

    fn invalid(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            path: path.into(),
            message: message.to_string(),
        }
    }

    fn core(section: &str, e: CoreError) -> Self {
        let path = match e.field() {
            Some(f) if f.starts_with(section) => f.to_owned(),
            Some(f) => format!("{section}.{f}"),
            None => section.to_owned(),
        };
        ConfigError::invalid(path, e)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses without validating, so that command-line overrides can be
/// applied before the final check.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Schema {
            path: if path == "." { String::new() } else { path },
            message: inner.to_string(),
        }
    })
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plant.motor.validate().map_err(|e| ConfigError::core("plant.motor", e))?;
        self.plant
            .geometry
            .validate()
            .map_err(|e| ConfigError::core("plant.geometry", e))?;
        if let Some(v) = self.plant.belt_speed_override {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid("plant.belt_speed_override", "must be a non-negative speed"));
            }
        }
        self.controller.validate().map_err(|e| ConfigError::core("controller", e))?;
        self.camera.validate().map_err(|e| ConfigError::core("camera", e))?;
        self.scenario.validate().map_err(|e| ConfigError::core("scenario", e))?;
        if let Some(r) = &self.recipe {
            r.validate().map_err(|e| ConfigError::core("recipe", e))?;
            if r.case_kind != self.scenario.case_kind {
                return Err(ConfigError::invalid("recipe.case_kind", "must match scenario.case_kind"));
            }
        }
        match (self.run.duration_s, self.run.object_count) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(ConfigError::invalid(
                    "run",
                    "exactly one of duration_s and object_count must be set",
                ))
            }
            (Some(d), None) if !(d >= 0.0 && d.is_finite()) => {
                return Err(ConfigError::invalid("run.duration_s", "must be a non-negative number of seconds"))
            }
            _ => {}
        }
        if !(self.run.time_scale > 0.0 && self.run.time_scale.is_finite()) {
            return Err(ConfigError::invalid("run.time_scale", "must be positive"));
        }
        if self.server.telemetry_hz < 1 {
            return Err(ConfigError::invalid("server.telemetry_hz", "must be at least 1"));
        }
        Ok(())
    }

    pub fn limit(&self) -> RunLimit {
        match (self.run.duration_s, self.run.object_count) {
            (Some(d), _) => RunLimit::DurationMs((d * 1000.0).round() as u64),
            (None, Some(n)) => RunLimit::Objects(n),
            (None, None) => RunLimit::Unbounded,
        }
    }

    /// Engine configuration, with the run seed (when set) seeding both the
    /// object stream and sensor noise.
    pub fn engine(&self) -> EngineConfig {
        let mut scenario = self.scenario;
        if let Some(seed) = self.run.seed {
            scenario.seed = seed;
        }
        EngineConfig {
            motor: self.plant.motor,
            geometry: self.plant.geometry,
            sensor_latency_ms: self.plant.sensor_latency_ms,
            belt_speed_override: self.plant.belt_speed_override,
            controller: self.controller,
            camera: self.camera,
            scenario,
            recipe: self.recipe.clone(),
            seed: scenario.seed,
            limit: self.limit(),
        }
    }

    pub fn set_duration(&mut self, seconds: f64) {
        self.run.duration_s = Some(seconds);
        self.run.object_count = None;
    }

    pub fn set_object_count(&mut self, n: u64) {
        self.run.object_count = Some(n);
        self.run.duration_s = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_factory_defaults() {
        let cfg = parse_config("{}").unwrap();
        cfg.validate().unwrap();
        let c = cfg.controller;
        assert_eq!((c.setpoint, c.nivel_luz, c.t_espera, c.time_trig), (200.0, 255, 6000, 2000));
    }

    #[test]
    fn seed_override_reaches_scenario() {
        let mut cfg = SimConfig::default();
        cfg.scenario.seed = 4;
        assert_eq!(cfg.engine().scenario.seed, 4);
        cfg.run.seed = Some(9);
        assert_eq!(cfg.engine().scenario.seed, 9);
        assert_eq!(cfg.engine().seed, 9);
    }

    #[test]
    fn limit_switches() {
        let mut cfg = SimConfig::default();
        cfg.set_duration(2.5);
        assert_eq!(cfg.limit(), RunLimit::DurationMs(2500));
        cfg.set_object_count(7);
        assert_eq!(cfg.limit(), RunLimit::Objects(7));
    }
}

//! Batch runs: build the station from a config, run it to its limit and
//! stream log records out.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use beltline_core::metrics::{LogRecord, RunSummary};
use beltline_core::sim::{SimEvent, Simulation};

use crate::config::SimConfig;
use crate::eventlog::EventLog;
use crate::pgm;

/// Keeps simulated time in step with the wall clock.
pub struct Pacer {
    origin: Instant,
    sim_origin_ms: u64,
    scale: f64,
}

impl Pacer {
    pub fn new(scale: f64, sim_now_ms: u64) -> Self {
        Self {
            origin: Instant::now(),
            sim_origin_ms: sim_now_ms,
            scale,
        }
    }

    /// Simulated time the loop should have reached by now.
    pub fn target_ms(&self) -> u64 {
        let wall = self.origin.elapsed().as_secs_f64();
        self.sim_origin_ms + (wall * self.scale * 1000.0) as u64
    }
}

/// Log records carried by a batch of engine events.
pub fn log_records(events: impl IntoIterator<Item = SimEvent>) -> impl Iterator<Item = LogRecord> {
    events.into_iter().filter_map(|e| match e {
        SimEvent::Verdict(ev) => Some(LogRecord::Inspection(ev)),
        SimEvent::RunEnd(end) => Some(LogRecord::End(end)),
        _ => None,
    })
}

/// Writes the latest capture as `frame_<object_id>.pgm` if one was taken
/// in `events`.
pub fn dump_frames(sim: &Simulation, events: &[SimEvent], dir: &Path) -> std::io::Result<()> {
    if !events.iter().any(|e| matches!(e, SimEvent::Capture { .. })) {
        return Ok(());
    }
    if let Some(latest) = sim.latest_frame() {
        pgm::save(&latest.frame, &dir.join(format!("frame_{}.pgm", latest.object_id)))?;
    }
    Ok(())
}

/// Runs the configured scenario to its limit. Log records go to `log`;
/// captured frames go to `frame_dir` when given. Paced by the wall clock
/// unless the config says headless.
pub fn run_with<W: Write>(
    cfg: &SimConfig,
    mut log: Option<&mut EventLog<W>>,
    frame_dir: Option<&Path>,
) -> anyhow::Result<RunSummary> {
    let mut sim = Simulation::new(cfg.engine()).context("invalid configuration")?;
    sim.start();
    let pacer = (!cfg.run.headless).then(|| Pacer::new(cfg.run.time_scale, 0));
    while !sim.is_finished() {
        if let Some(p) = &pacer {
            if sim.now_ms() >= p.target_ms() {
                std::thread::sleep(Duration::from_millis(1));
                continue;
            }
        }
        sim.step();
        let events = sim.drain_events();
        if events.is_empty() {
            continue;
        }
        if let Some(dir) = frame_dir {
            dump_frames(&sim, &events, dir).with_context(|| format!("writing frames to {}", dir.display()))?;
        }
        if let Some(log) = log.as_deref_mut() {
            for rec in log_records(events) {
                log.append(&rec)?;
            }
        }
    }
    Ok(sim.summary())
}

/// Runs with the log and frame directory named in the config.
pub fn run(cfg: &SimConfig) -> anyhow::Result<RunSummary> {
    let frame_dir: Option<PathBuf> = cfg.run.frame_dir.clone();
    if let Some(dir) = &frame_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    match &cfg.run.log_path {
        Some(path) => {
            let mut log = EventLog::create(path).with_context(|| format!("opening log {}", path.display()))?;
            run_with(cfg, Some(&mut log), frame_dir.as_deref())
        }
        None => run_with::<std::io::Sink>(cfg, None, frame_dir.as_deref()),
    }
}

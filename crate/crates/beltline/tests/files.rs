//! Configuration files and event logs on disk.

use std::io::Write;

use beltline::config::{load_config, parse_config, ConfigError, SimConfig};
use beltline::eventlog::{self, EventLog};
use beltline::runner;
use beltline_core::metrics::{summarize, summarize_runs, LogRecord};
use beltline_core::scenarios::CaseKind;
use proptest::prelude::*;

fn schema_path(text: &str) -> String {
    match parse_config(text) {
        Err(e @ ConfigError::Schema { .. }) => e.path().to_owned(),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

fn invalid_path(text: &str) -> String {
    let cfg = parse_config(text).expect("parses");
    match cfg.validate() {
        Err(e @ ConfigError::Invalid { .. }) => e.path().to_owned(),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn schema_errors_name_the_field() {
    assert_eq!(schema_path(r#"{"controller": {"nivel_luz": 300}}"#), "controller.nivel_luz");
    assert_eq!(schema_path(r#"{"scenario": {"case_kind": "D"}}"#), "scenario.case_kind");
    assert_eq!(schema_path(r#"{"run": {"objects": 3}}"#), "run.objects");
    assert_eq!(schema_path(r#"{"plant": {"motor": {"tau_s": "slow"}}}"#), "plant.motor.tau_s");
}

#[test]
fn invariant_errors_name_the_field() {
    let p = invalid_path(r#"{"scenario": {"case_kind": "A", "pitch": 4.0, "object_length": 5.0}}"#);
    assert!(p.starts_with("scenario."), "{p}");
    assert_eq!(invalid_path(r#"{"run": {"duration_s": 10}}"#), "run");
    assert_eq!(invalid_path(r#"{"run": {"time_scale": 0}}"#), "run.time_scale");
    assert_eq!(invalid_path(r#"{"controller": {"kp": -1}}"#), "controller.kp");
    assert_eq!(
        invalid_path(r#"{"scenario": {"case_kind": "B"}, "recipe": {"case_kind": "A", "tools": []}}"#)
            .split('.')
            .next(),
        Some("recipe")
    );
}

#[test]
fn empty_sections_take_defaults() {
    let cfg = parse_config(r#"{"controller": {}, "plant": {}, "run": {}}"#).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg, SimConfig::default());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config(std::path::Path::new("/nonexistent/beltline.json")).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
}

#[test]
fn shipped_example_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}

fn small_run(case: CaseKind, seed: u64, objects: u64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.scenario.case_kind = case;
    cfg.controller.t_espera = 500;
    cfg.run.seed = Some(seed);
    cfg.set_object_count(objects);
    cfg
}

#[test]
fn replaying_a_log_reproduces_the_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let mut cfg = small_run(CaseKind::B, 11, 25);
    cfg.run.log_path = Some(path.clone());
    let live = runner::run(&cfg).unwrap();
    let replayed = eventlog::replay(&path).unwrap();
    assert_eq!(replayed, live);

    // A second run appended to the same file is summarised on its own.
    let mut second = small_run(CaseKind::A, 12, 10);
    second.run.log_path = None;
    let mut log = EventLog::append_to(&path).unwrap();
    let live2 = runner::run_with(&second, Some(&mut log), None).unwrap();
    drop(log);
    let records = eventlog::read_log(&path).unwrap();
    assert_eq!(summarize(&records), live2);
    let runs = summarize_runs(&records);
    assert_eq!(runs, vec![live, live2]);
}

#[test]
fn frame_dump_writes_one_pgm_per_capture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(CaseKind::C, 5, 4);
    let s = runner::run_with::<std::io::Sink>(&cfg, None, Some(dir.path())).unwrap();
    let n = std::fs::read_dir(dir.path()).unwrap().count() as u64;
    assert_eq!(n, s.counts.total());
    let frame = beltline::pgm::load(&dir.path().join("frame_0.pgm")).unwrap();
    assert_eq!((frame.width(), frame.height()), (640, 480));
}

#[test]
fn corrupt_log_line_is_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let mut cfg = small_run(CaseKind::A, 1, 3);
    cfg.run.log_path = Some(path.clone());
    runner::run(&cfg).unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    writeln!(f, "{{\"t_ms\": oops}}").unwrap();
    let err = eventlog::read_log(&path).unwrap_err().to_string();
    assert!(err.contains("line 5"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_round_trips_through_json(
        setpoint in 50.0f64..200.0,
        nivel in any::<u8>(),
        t_espera in 0u32..20_000,
        pitch in 12.0f64..40.0,
        fraction in 0.0f64..=1.0,
        seed in any::<u64>(),
        objects in 1u64..10_000,
        headless in any::<bool>(),
    ) {
        let mut cfg = SimConfig::default();
        cfg.controller.setpoint = setpoint;
        cfg.controller.nivel_luz = nivel;
        cfg.controller.t_espera = t_espera;
        cfg.scenario.pitch = pitch;
        cfg.scenario.defect_fraction = fraction;
        cfg.run.seed = Some(seed);
        cfg.run.headless = headless;
        cfg.set_object_count(objects);
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn log_records_round_trip(case in prop_oneof![Just(CaseKind::A), Just(CaseKind::B), Just(CaseKind::C)], seed in any::<u64>()) {
        let mut log = EventLog::new(Vec::new());
        let summary = runner::run_with(&small_run(case, seed, 6), Some(&mut log), None).unwrap();
        let bytes = log.into_inner();
        let records = eventlog::parse_log(bytes.as_slice()).unwrap();
        prop_assert!(matches!(records.last(), Some(LogRecord::End(_))));
        let text: String = records.iter().map(eventlog::to_line).collect();
        prop_assert_eq!(text.as_bytes(), bytes.as_slice());
        prop_assert_eq!(summarize(&records), summary);
    }
}

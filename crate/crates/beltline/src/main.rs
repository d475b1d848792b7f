use std::path::PathBuf;

use anyhow::Context;
use beltline::config::{load_config, SimConfig};
use beltline::{eventlog, pgm, runner, server};
use beltline_core::camera::{render_at, run_recipe, RenderPose};
use beltline_core::metrics::{LogRecord, CSV_HEADER};
use beltline_core::plant::{Illumination, ObjectInstance};
use beltline_core::rng::SimRng;
use beltline_core::scenarios::{defect_inject_with, Appearance, CaseKind, Truth};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beltline", version, about = "Conveyor-belt visual inspection station simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario, headless or behind the telemetry service.
    Run(RunArgs),
    /// Recompute the run summary from a saved event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Print a CSV row instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Render a single frame for recipe debugging.
    Frame(FrameArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<CaseKind>,
    #[arg(long, conflicts_with = "duration")]
    objects: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run faster than real time.
    #[arg(long)]
    headless: bool,
    /// Serve the control and telemetry protocol on this address.
    #[arg(long, value_name = "ADDR")]
    serve: Option<String>,
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write every captured frame into this directory.
    #[arg(long, value_name = "DIR")]
    frames: Option<PathBuf>,
    /// With --serve, start the run without waiting for a start command.
    #[arg(long)]
    autostart: bool,
}

#[derive(Args)]
struct FrameArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: CaseKind,
    /// Defect severity in (0, 1]; 0 renders a good part.
    #[arg(long, default_value_t = 0.0)]
    defect: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Horizontal offset from the frame centre, px.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    shift: i32,
}

fn base_config(path: Option<&PathBuf>) -> anyhow::Result<SimConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SimConfig::default()),
    }
}

fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let mut cfg = base_config(a.config.as_ref())?;
    if let Some(case) = a.scenario {
        cfg.scenario.case_kind = case;
        if cfg.recipe.as_ref().is_some_and(|r| r.case_kind != case) {
            cfg.recipe = None;
        }
    }
    if let Some(n) = a.objects {
        cfg.set_object_count(n);
    }
    if let Some(d) = a.duration {
        cfg.set_duration(d);
    }
    if a.seed.is_some() {
        cfg.run.seed = a.seed;
    }
    if a.headless {
        cfg.run.headless = true;
    }
    if let Some(bind) = &a.serve {
        cfg.server.bind.clone_from(bind);
    }
    if a.log.is_some() {
        cfg.run.log_path = a.log;
    }
    if a.frames.is_some() {
        cfg.run.frame_dir = a.frames;
    }
    cfg.validate()?;

    let summary = match a.serve {
        None => Some(runner::run(&cfg)?),
        Some(_) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&cfg.server.bind)
                    .await
                    .with_context(|| format!("binding {}", cfg.server.bind))?;
                tracing::info!("listening on http://{}", listener.local_addr()?);
                eprintln!("listening on http://{}", listener.local_addr()?);
                let station = server::spawn_station(cfg.clone(), a.autostart)?;
                server::serve(listener, station, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?
        }
    };
    if let Some(s) = summary {
        println!("{}", serde_json::to_string_pretty(&s)?);
    }
    Ok(())
}

fn cmd_replay(log: PathBuf, csv: bool) -> anyhow::Result<()> {
    let records = eventlog::read_log(&log).with_context(|| format!("reading {}", log.display()))?;
    let summary = beltline_core::metrics::summarize(&records);
    if csv {
        let case = records
            .iter()
            .rev()
            .find_map(|r| match r {
                LogRecord::Inspection(ev) => Some(ev.case),
                LogRecord::End(_) => None,
            })
            .unwrap_or(CaseKind::A);
        println!("{CSV_HEADER}");
        println!("{}", summary.csv_row(case));
    } else {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(())
}

fn cmd_frame(a: FrameArgs) -> anyhow::Result<()> {
    let cfg = base_config(a.config.as_ref())?;
    let mut scenario = cfg.scenario;
    scenario.case_kind = a.case;
    let model = if cfg.scenario.case_kind == a.case {
        cfg.scenario.defect_model()
    } else {
        scenario.defect_model = None;
        scenario.defect_model()
    };
    let mut rng = SimRng::new(a.seed);
    let (appearance, truth) = if a.defect > 0.0 {
        (
            defect_inject_with(a.case, a.defect, &Appearance::good(a.case), &model, &mut rng)?,
            Truth::Defective,
        )
    } else {
        (Appearance::good(a.case), Truth::Good)
    };
    let obj = ObjectInstance {
        id: 0,
        case_kind: a.case,
        truth,
        x: 0.0,
        length: scenario.object_length,
        appearance,
    };
    let illum = Illumination::from_level(cfg.controller.nivel_luz);
    let pose = RenderPose {
        shift_px: a.shift,
        blur_px: 0,
    };
    let frame = render_at(&obj, &illum, pose, rng.next_u64(), &cfg.camera);
    pgm::save(&frame, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let recipe = match &cfg.recipe {
        Some(r) if r.case_kind == a.case => r.clone(),
        _ => beltline_core::scenarios::recipe_for(a.case),
    };
    let verdict = run_recipe(&frame, &recipe);
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Replay { log, csv } => cmd_replay(log, csv),
        Cmd::Frame(a) => cmd_frame(a),
    }
}

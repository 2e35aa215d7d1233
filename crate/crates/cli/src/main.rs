use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use mctrack::cascade::Mode;
use mctrack::config::RoutineConfig;
use mctrack::eval::{evaluate, EvalOptions};
use mctrack::io::{
    calibration_from_json, calibration_to_json, detections_from_jsonl, detections_to_jsonl, read_jsonl, write_jsonl,
    TargetRecord,
};
use mctrack::pipeline;
use mctrack::sim::{render_detections, Scenario, TruthRecord};

const BUILTIN: [(&str, &str); 3] = [
    ("clean-4cam", include_str!("../scenarios/clean-4cam.json")),
    (
        "opposite-only-episode",
        include_str!("../scenarios/opposite-only-episode.json"),
    ),
    (
        "crowded-distractors",
        include_str!("../scenarios/crowded-distractors.json"),
    ),
];

#[derive(Parser)]
#[command(
    name = "mctrack",
    version,
    about = "Multi-camera 3D tracking: simulate, track, evaluate"
)]
struct Cli {
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cascade,
    TriangulationOnly,
    PlaneOnly,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cascade => Mode::Cascade,
            ModeArg::TriangulationOnly => Mode::TriangulationOnly,
            ModeArg::PlaneOnly => Mode::PlaneOnly,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario to detections, truth, calibration and routine config.
    Simulate {
        /// Scenario JSON file or built-in name.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track detections and write the target and all tracks.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        /// Routine config JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "cascade")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score target output against ground truth.
    Evaluate {
        #[arg(long)]
        tracklets: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Routine config to embed in the report.
        #[arg(long)]
        config: Option<PathBuf>,
        /// First scored frame.
        #[arg(long)]
        from: Option<i64>,
        /// Last scored frame.
        #[arg(long)]
        to: Option<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, track and evaluate in one go.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "cascade")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    Scenarios,
}

/// Failures mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Input(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn input_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn read(path: &Path, as_config: bool) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(|e| {
            if as_config {
                Failure::Config(e)
            } else {
                Failure::Input(e)
            }
        })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_scenario(arg: &str, seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = match BUILTIN.iter().find(|(name, _)| *name == arg) {
        Some((_, text)) => text.to_string(),
        None => read(Path::new(arg), true)?,
    };
    let mut s = Scenario::from_json(&text)
        .with_context(|| format!("scenario {arg}"))
        .map_err(config_err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn simulate(scenario: &Scenario, out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (dets, truth) = render_detections(scenario).map_err(config_err)?;
    let rig = scenario.rig().map_err(config_err)?;
    write(&out.join("detections.jsonl"), &detections_to_jsonl(&dets))?;
    write(&out.join("truth.jsonl"), &write_jsonl(&truth))?;
    write(&out.join("calib.json"), &calibration_to_json(&rig))?;
    let routine = serde_json::to_string_pretty(&scenario.routine()).context("routine config")?;
    write(&out.join("routine.json"), &routine)?;
    let resolved = serde_json::to_string_pretty(scenario).context("scenario")?;
    write(&out.join("scenario.json"), &resolved)?;
    log::info!("{} detections over {} frames", dets.len(), scenario.frames);
    Ok(())
}

fn track(
    detections: &Path,
    calib: &Path,
    config: &Path,
    mode: Mode,
    out: &Path,
    threads: usize,
) -> Result<(), Failure> {
    let cfg = RoutineConfig::from_json(&read(config, true)?).map_err(config_err)?;
    let rig = calibration_from_json(&read(calib, true)?)
        .with_context(|| format!("calibration {}", calib.display()))
        .map_err(config_err)?;
    let dets = detections_from_jsonl(&read(detections, false)?, &rig)
        .with_context(|| format!("detections {}", detections.display()))
        .map_err(input_err)?;
    let result = pipeline::run(&rig, &dets, &cfg, mode, threads).context("tracking")?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(&out.join("tracklets.jsonl"), &write_jsonl(&result.target_records))?;
    write(&out.join("tracks.jsonl"), &write_jsonl(&result.track_records()))?;
    write(
        &out.join("windows.json"),
        &serde_json::to_string_pretty(&result.windows).context("window summaries")?,
    )?;
    log::info!(
        "{} tracks, {} target frames, {} interpolated",
        result.tracks.len(),
        result.target_records.len(),
        result.interpolated_frames
    );
    Ok(())
}

fn evaluate_cmd(
    tracklets: &Path,
    truth: &Path,
    config: Option<&Path>,
    range: Option<(i64, i64)>,
    out: &Path,
) -> Result<(), Failure> {
    let records: Vec<TargetRecord> = read_jsonl(&read(tracklets, false)?)
        .with_context(|| format!("tracklets {}", tracklets.display()))
        .map_err(input_err)?;
    let truth: Vec<TruthRecord> = read_jsonl(&read(truth, false)?)
        .with_context(|| format!("truth {}", truth.display()))
        .map_err(input_err)?;
    let opts = EvalOptions {
        frames: range,
        ..EvalOptions::default()
    };
    let mut report = evaluate(&records, &truth, &opts).map_err(input_err)?;
    if let Some(path) = config {
        let cfg = RoutineConfig::from_json(&read(path, true)?).map_err(config_err)?;
        report.config = Some(serde_json::to_value(cfg).context("config")?);
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(
        &out.join("report.json"),
        &serde_json::to_string_pretty(&report).context("report")?,
    )?;
    println!(
        "id_switches={} aed_m={:.4} failure_rate={:.4} coverage={:.4}",
        report.id_switches, report.aed_m, report.failure_rate, report.coverage
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { scenario, seed, out } => simulate(&load_scenario(&scenario, seed)?, &out),
        Command::Track {
            detections,
            calib,
            config,
            mode,
            out,
        } => track(&detections, &calib, &config, mode.into(), &out, cli.threads),
        Command::Evaluate {
            tracklets,
            truth,
            config,
            from,
            to,
            out,
        } => {
            let range = match (from, to) {
                (None, None) => None,
                (a, b) => Some((a.unwrap_or(i64::MIN), b.unwrap_or(i64::MAX))),
            };
            evaluate_cmd(&tracklets, &truth, config.as_deref(), range, &out)
        }
        Command::Run {
            scenario,
            seed,
            mode,
            out,
        } => {
            simulate(&load_scenario(&scenario, seed)?, &out)?;
            let routine = out.join("routine.json");
            track(
                &out.join("detections.jsonl"),
                &out.join("calib.json"),
                &routine,
                mode.into(),
                &out,
                cli.threads,
            )?;
            evaluate_cmd(
                &out.join("tracklets.jsonl"),
                &out.join("truth.jsonl"),
                Some(&routine),
                None,
                &out,
            )
        }
        Command::Scenarios => {
            for (name, _) in BUILTIN {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRACK_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Config(e) | Failure::Input(e) | Failure::Other(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

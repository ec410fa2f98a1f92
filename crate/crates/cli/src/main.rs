use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use evsink::bench::{format_precision_table, format_timing_table, run_bench};
use evsink::inspect::{evaluate, run_pipeline, PipelineConfig};
use evsink::io::{self, config, Manifest, ReportRow};
use evsink::motion::{flow_from_twist, warp_events, Flow};
use evsink::sim::simulate_sweep;
use evsink::{CameraModel, Twist, DEFAULT_MIN_WINDOW_EVENTS};

#[derive(Parser)]
#[command(
    name = "evsink",
    version,
    about = "Event-camera countersink inspection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a noisy sweep and write its events and ground truth.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        /// Sweep speed in m/s; defaults to the scene's twist.
        #[arg(long)]
        speed: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop all noise sources.
        #[arg(long)]
        clean: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Measure every hole in an event file.
    Inspect {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        /// Planar camera velocity "vx,vy" in m/s.
        #[arg(long, value_parser = parse_twist, allow_hyphen_values = true)]
        twist: Twist,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline settings (TOML); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ground-truth manifest used to label holes and score detection.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Trial number written to the CSV.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// JSON summary of the run.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Repeated noisy sweeps: precision and timing tables.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3,0.5")]
        speeds: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the IWE of one window as a 16-bit PGM, next to its zero-flow
    /// counterpart.
    Render {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_parser = parse_twist, allow_hyphen_values = true)]
        twist: Twist,
        #[arg(long)]
        out: PathBuf,
        /// Camera config; the default 640x480 sweep camera otherwise.
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Window index; the middle window by default.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MIN_WINDOW_EVENTS)]
        window_events: usize,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error("{0}")]
    Data(String),
}

fn parse_twist(s: &str) -> Result<Twist, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"vx,vy\" in m/s, got \"{s}\""));
    }
    let v = |p: &str| {
        p.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("\"{p}\" is not a finite number"))
    };
    Ok(Twist::planar(v(parts[0])?, v(parts[1])?))
}

fn data<E: std::fmt::Display>(context: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", context.display()))
}

fn read_events(path: &Path) -> Result<evsink::EventStream, CliError> {
    io::read_events(path).map_err(|e| match e {
        io::IoError::File { .. } => e.into(),
        other => data(path)(other),
    })
}

fn load_pipeline(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => {
            let c: PipelineConfig = config::load_toml(p)?;
            c.validate().map_err(data(p))?;
            Ok(c)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn simulate(
    scene_path: &Path,
    speed: Option<f64>,
    seed: u64,
    clean: bool,
    out: &Path,
    truth: &Path,
) -> Result<(), CliError> {
    let mut scene = config::load_scene(scene_path)?;
    if let Some(v) = speed {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!(
                "--speed must be positive, got {v}"
            )));
        }
        scene = scene.with_speed(v).map_err(data(scene_path))?;
    }
    scene.noise = if clean {
        evsink::sim::NoiseSpec::none()
    } else {
        scene.noise.with_seed(seed)
    };
    let sim = simulate_sweep(&scene).map_err(data(scene_path))?;
    io::write_events(out, &sim.stream)?;
    io::write_manifest(truth, &Manifest::new(&sim.truth, (!clean).then_some(seed)))?;
    eprintln!(
        "{} events over {:.3} s, {} holes",
        sim.stream.len(),
        sim.truth.duration_ns as f64 * 1e-9,
        sim.truth.holes.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn inspect(
    events: &Path,
    camera: &Path,
    twist: &Twist,
    out: &Path,
    config_path: Option<&Path>,
    truth: Option<&Path>,
    trial: usize,
    summary: Option<&Path>,
) -> Result<(), CliError> {
    let cam: CameraModel = config::load_toml(camera)?;
    let cfg = load_pipeline(config_path)?;
    let stream = read_events(events)?;
    let mut report = run_pipeline(&stream, &cam, twist, &cfg).map_err(data(events))?;
    if let Some(t) = truth {
        let m = io::read_manifest(t)?;
        let scored = evaluate(&mut report, &m.to_truth());
        eprintln!(
            "detection rate {:.3}, {} false positives",
            scored.detection_rate, scored.false_positives
        );
    }
    let rows = ReportRow::from_report(&report, twist.linear_speed(), trial);
    io::write_csv(out, &rows)?;
    if let Some(s) = summary {
        io::write_json(s, &report)?;
    }
    eprintln!(
        "{} holes from {} windows, {:.2} ms per hole",
        rows.len(),
        report.windows,
        report.mean_hole_time_s() * 1e3
    );
    Ok(())
}

fn bench(
    scene_path: &Path,
    speeds: &[f64],
    trials: usize,
    seed: u64,
    config_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    if let Some(v) = speeds.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::Usage(format!(
            "--speeds entries must be positive, got {v}"
        )));
    }
    if trials < 2 {
        return Err(CliError::Usage(format!(
            "--trials must be at least 2, got {trials}"
        )));
    }
    let scene = config::load_scene(scene_path)?;
    let cfg = load_pipeline(config_path)?;
    let result = run_bench(&scene, speeds, trials, seed, &cfg).map_err(data(scene_path))?;
    std::fs::create_dir_all(out).map_err(|e| io::IoError::file(out, e))?;
    let labels: Vec<String> = (1..=scene.holes.len()).map(|i| i.to_string()).collect();
    let s = &result.summary;
    let write = |name: &str, text: String| -> Result<(), CliError> {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| io::IoError::file(&p, e).into())
    };
    io::write_csv(&out.join("holes.csv"), &result.rows())?;
    write(
        "precision_sample.csv",
        format_precision_table(&s.precision_sample, &labels),
    )?;
    write(
        "precision_population.csv",
        format_precision_table(&s.precision_population, &labels),
    )?;
    write("timing.csv", format_timing_table(&s.timing))?;
    io::write_json(&out.join("summary.json"), s)?;
    println!(
        "detection min {:.3} mean {:.3}, false positives {}",
        s.min_detection_rate, s.mean_detection_rate, s.false_positives
    );
    println!(
        "aggregate sigma: sample {:.4} mm, population {:.4} mm; mean |depth error| {:.4} mm",
        s.precision_sample.aggregate, s.precision_population.aggregate, s.mean_abs_depth_error_mm
    );
    println!(
        "per-hole time {:.2} ms; stage ordering {}",
        s.timing.per_hole.total_s() * 1e3,
        s.timing.ordering_line()
    );
    Ok(())
}

fn render(
    events: &Path,
    twist: &Twist,
    out: &Path,
    camera: Option<&Path>,
    window: Option<usize>,
    window_events: usize,
) -> Result<(), CliError> {
    let cam = match camera {
        Some(p) => config::load_toml(p)?,
        None => CameraModel::default_sweep_camera(),
    };
    if window_events < 2 {
        return Err(CliError::Usage("--window-events must be at least 2".into()));
    }
    let stream = read_events(events)?;
    if stream.width != cam.width || stream.height != cam.height {
        return Err(CliError::Data(format!(
            "{}: stream is {}x{}, camera is {}x{}",
            events.display(),
            stream.width,
            stream.height,
            cam.width,
            cam.height
        )));
    }
    let windows = stream.windows(window_events);
    if windows.is_empty() {
        return Err(CliError::Data(format!("{}: no events", events.display())));
    }
    let i = window.unwrap_or(windows.len() / 2);
    let win = windows.get(i).ok_or_else(|| {
        CliError::Usage(format!("--window {i} out of range (0..{})", windows.len()))
    })?;
    let flow = flow_from_twist(twist, &cam).map_err(data(events))?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let sharp = warp_events(win, flow, w, h);
    let blurred = warp_events(win, Flow::new(0.0, 0.0), w, h);
    let zero_path = zero_twist_path(out);
    io::write_pgm(out, &sharp)?;
    io::write_pgm(&zero_path, &blurred)?;
    let (vs, vb) = (sharp.variance(), blurred.variance());
    println!(
        "window {i}: variance {vs:.5} (twist), {vb:.5} (zero twist), contrast ratio {:.3}",
        vs / vb
    );
    println!("wrote {} and {}", out.display(), zero_path.display());
    Ok(())
}

fn zero_twist_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or("iwe".into(), |s| s.to_string_lossy());
    out.with_file_name(format!("{stem}_zero_twist.pgm"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scene,
            speed,
            seed,
            clean,
            out,
            truth,
        } => simulate(&scene, speed, seed, clean, &out, &truth),
        Command::Inspect {
            events,
            camera,
            twist,
            out,
            config,
            truth,
            trial,
            summary,
        } => inspect(
            &events,
            &camera,
            &twist,
            &out,
            config.as_deref(),
            truth.as_deref(),
            trial,
            summary.as_deref(),
        ),
        Command::Bench {
            scene,
            speeds,
            trials,
            seed,
            config,
            out,
        } => bench(&scene, &speeds, trials, seed, config.as_deref(), &out),
        Command::Render {
            events,
            twist,
            out,
            camera,
            window,
            window_events,
        } => render(
            &events,
            &twist,
            &out,
            camera.as_deref(),
            window,
            window_events,
        ),
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("EVSINK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "EVSINK_THREADS must be a positive integer, got \"{v}\""
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("EVSINK_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
